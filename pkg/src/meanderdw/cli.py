"""Command-line entry points.

    meanderdw simulate --config FILE --out DIR [--seed N] [--threads N]
    meanderdw preset NAME --out DIR [--seed N]
    meanderdw design table1
    meanderdw design estimate [--config FILE]
    meanderdw sweep --configs GLOB [--out DIR] [--threads N]
"""

import argparse
import glob
import os
import sys
from concurrent.futures import ProcessPoolExecutor


def _cmd_simulate(args):
    from .runner import run_config_file
    mask, traj, summary = run_config_file(args.config, out_dir=args.out,
                                          seed=args.seed,
                                          threads=args.threads)
    print(f"rows={summary['rows']} status={summary['status']} "
          f"final_state={summary['final_state_index']}")
    return 0


def _cmd_preset(args):
    from .runner import run_preset
    try:
        passed, _ = run_preset(args.name, args.out, seed=args.seed)
    except Exception as err:      # divergence keeps partial artifacts
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0 if passed else 1


def _cmd_design(args):
    from . import design as D
    from .constants import KB
    if args.what == "table1":
        rows = D.material_comparison()
        print(f"{'material':<10} {'theta_SH':>9} {'rho[uOhm.cm]':>13} "
              f"{'J_crit[A/cm2]':>14} {'P/P_ref':>8} {'DMI[mJ/m2]':>11}")
        for r in rows:
            print(f"{r['name']:<10} {r['theta_sh']:>9.2f} "
                  f"{r['rho'] * 1e8:>13.0f} {r['j_crit'] / 1e4:>14.2e} "
                  f"{r['power_norm']:>8.2f} "
                  f"{r['dmi_for_cofeb'] * 1e3:>11.2f}")
        return 0
    # estimate
    if args.config:
        from .config import parse_config
        cfg = parse_config(args.config)
        mat = cfg.material.build()
        inputs = D.DesignInputs(
            t=mat.t_fm, w=cfg.geometry.param("width_wide", 50e-9),
            delta_w=2 * cfg.geometry.param("pinning_notch_depth", 12.5e-9),
            a_ex=mat.a_ex, k_an=mat.k_eff, d_ex=mat.d_ex, m_s=mat.m_s,
            n_layers=2 if cfg.mesh.nz == 2 else 1)
        rho = mat.rho_hm
        width = cfg.geometry.param("center_extent", 500e-9)
        step = cfg.geometry.param("step_length", 100e-9)
    else:
        # the simulated test device column
        inputs = D.DesignInputs(t=1e-9, w=50e-9, delta_w=23.5e-9,
                                a_ex=20e-12, k_an=5e5, d_ex=0.5e-3,
                                m_s=1.1e6, n_layers=1)
        rho, width, step = 2e-6, 500e-9, 100e-9
    rep = D.design_report(inputs, rho_hm=rho, current_path_width=width,
                          j_write=1.5e12, step_length=step, v_wall=100.0)
    print("\n".join(rep.lines()))
    return 0


def _run_one_sweep(item):
    path, out_root, seed = item
    from .runner import run_config_file
    name = os.path.splitext(os.path.basename(path))[0]
    out = os.path.join(out_root, name)
    try:
        _, _, summary = run_config_file(path, out_dir=out, seed=seed)
        return name, summary["status"]
    except Exception as err:
        return name, f"error: {err}"


def _cmd_sweep(args):
    paths = sorted(glob.glob(args.configs))
    if not paths:
        print(f"no configs match {args.configs!r}", file=sys.stderr)
        return 2
    items = [(p, args.out, args.seed) for p in paths]
    failures = 0
    with ProcessPoolExecutor(max_workers=args.threads or None) as pool:
        for name, status in pool.map(_run_one_sweep, items):
            print(f"{name}: {status}")
            failures += status != "completed"
    return 0 if failures == 0 else 1


def main(argv=None):
    ap = argparse.ArgumentParser(prog="meanderdw",
                                 description=__doc__.strip().splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", help="run one experiment config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("preset", help="run a shipped experiment preset")
    p.add_argument("name", choices=["calibration_strip", "fig2_serpentine",
                                    "fig6_fm_vs_saf", "fig8_four_way"])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("design", help="analytical design tables")
    p.add_argument("what", choices=["table1", "estimate"])
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_design)

    p = sub.add_parser("sweep", help="run many configs in a worker pool")
    p.add_argument("--configs", required=True,
                   help="glob pattern of config files")
    p.add_argument("--out", default="out/sweep")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_sweep)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
