"""Command-line front end for the experiment harness.

Config values come from an optional JSON file (--config) with the same
keys as ExperimentConfig; explicit flags override the file.  Thresholds
are given in dB on the command line and converted once, inside the
parameter objects.
"""

import argparse
import json
import sys
from pathlib import Path

from . import harness


def _methods(text: str):
    return tuple(m.strip().upper() for m in text.split(",") if m.strip())


def _floats(text: str):
    return tuple(float(v) for v in text.split(","))


_FLAG_FIELDS = {
    "seed": "seed",
    "methods": "methods",
    "gamma_db": "gamma_db",
    "rho": "rho",
    "eps2": "eps2",
    "eta2": "eta2",
    "channels": "n_channels",
    "perts": "n_perts",
    "randomizations": "n_randomizations",
    "instances": "n_instances",
    "relays": "n_relays",
    "p_t": "p_t",
    "sigma2": "sigma2",
    "sigma_v2": "sigma_v2",
    "sigma2_hat": "sigma2_hat",
    "eps2_hat": "eps2_hat",
    "eta2_hat": "eta2_hat",
}


def build_config(args: argparse.Namespace) -> harness.ExperimentConfig:
    values = {}
    if args.config is not None:
        values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    for flag, field in _FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[field] = v
    values["out_dir"] = args.out
    return harness.ExperimentConfig(**values)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--methods", type=_methods, help="comma list from NR,M4,M2,B2")
    p.add_argument("--gamma-db", dest="gamma_db", type=_floats,
                   help="comma list of SNR thresholds in dB")
    p.add_argument("--rho", type=float, help="outage tolerance")
    p.add_argument("--eps2", type=float, help="first-hop error power")
    p.add_argument("--eta2", type=float, help="second-hop error power")
    p.add_argument("--channels", type=int)
    p.add_argument("--perts", type=int)
    p.add_argument("--randomizations", type=int)
    p.add_argument("--instances", type=int)
    p.add_argument("--relays", type=int)
    p.add_argument("--p-t", dest="p_t", type=float, help="source power")
    p.add_argument("--sigma2", type=float, help="relay noise power")
    p.add_argument("--sigma-v2", dest="sigma_v2", type=float,
                   help="destination noise power")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="relaysafe",
        description="outage-safe relay weight design experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_design = sub.add_parser("design", help="solve the design programs")
    _add_common(p_design)

    p_validate = sub.add_parser("validate", help="satisfaction histograms")
    _add_common(p_validate)
    p_validate.add_argument("--mode", choices=("exact", "quadratic"),
                            default="exact")

    p_tables = sub.add_parser("tables", help="feasibility and rank tables")
    _add_common(p_tables)

    p_mismatch = sub.add_parser("mismatch", help="re-evaluate under mismatch")
    _add_common(p_mismatch)
    p_mismatch.add_argument("--sigma2-hat", dest="sigma2_hat", type=float)
    p_mismatch.add_argument("--eps2-hat", dest="eps2_hat", type=float)
    p_mismatch.add_argument("--eta2-hat", dest="eta2_hat", type=float)

    p_tight = sub.add_parser("tightness", help="threshold dominance sweep")
    _add_common(p_tight)

    args = parser.parse_args(argv)
    config = build_config(args)

    if args.command == "design":
        records = harness.run_design(config)
        for gamma_db in config.gamma_db:
            for name in config.methods:
                cell = [r for r in records
                        if r.method == name and r.gamma_db == gamma_db]
                n_ok = sum(1 for r in cell if r.status == "optimal")
                print(f"design {name} gamma={gamma_db:g}dB: "
                      f"{n_ok}/{len(cell)} feasible")
        print(f"wrote {config.out_dir / 'design.csv'}")
    elif args.command == "validate":
        out = harness.run_validate(config, mode=args.mode)
        for (name, gamma_db), res in sorted(out.items()):
            print(f"validate {name} gamma={gamma_db:g}dB: "
                  f"n={res['n_feasible']} mean={res['mean']:.4f}")
        print(f"wrote {config.out_dir / 'validation.csv'}")
    elif args.command == "tables":
        rows = harness.run_tables(config)
        for row in rows:
            print(f"tables {row['method']} gamma={row['gamma_db']:g}dB: "
                  f"feasibility={row['feasibility']:.3f}")
        print(f"wrote {config.out_dir / 'tables.csv'}")
    elif args.command == "mismatch":
        rows = harness.run_mismatch(config)
        events = sum(r["outage_event"] for r in rows)
        print(f"mismatch: {len(rows)} evaluations, {events} outage events")
        print(f"wrote {config.out_dir / 'mismatch.csv'}")
    elif args.command == "tightness":
        rows = harness.run_tightness(config)
        inside = [r for r in rows if r["in_window"]]
        viol = sum(r["violations"] for r in inside)
        print(f"tightness: {viol} in-window violations over "
              f"{len(inside)} rho values")
        print(f"wrote {config.out_dir / 'tightness.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
