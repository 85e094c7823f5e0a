"""Command-line entry point: ``reserve {constants,solve-lp,gen,simulate,bench}``.

Exit status is 0 on success, 1 on invalid input and 2 on numerical failure.
Errors go to stderr prefixed with ``error:``.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .constants import ls_ratio, mls_ratios, solve_rls_constants
from .harness import (
    TABLE_CONFIGS,
    TABLE_SCALES,
    ExperimentSpec,
    default_policies,
    format_value,
    random_settings_grid,
    run_experiment,
    run_random_settings,
    run_tables,
    tables_grid,
    write_random_outputs,
    write_tables_outputs,
)
from .instance import InstanceError, load_instance, save_instance
from .lp import LPError, dump_routing, solve_for, solve_layered_greedy, solve_routing_lp
from .policies import POLICY_NAMES

log = logging.getLogger("reserve")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _configs(text: str) -> list[tuple[int, int]]:
    out = []
    for item in text.split(","):
        try:
            mins, sessions = item.lower().split("x")
            out.append((int(mins), int(sessions)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected MINUTESxSESSIONS items like 60x8, got {item!r}") from None
    return out


def _csv_out(rows: list[list]) -> None:
    w = csv.writer(sys.stdout, lineterminator="\n")
    for r in rows:
        w.writerow([format_value(v) for v in r])


def cmd_constants(args) -> int:
    k = solve_rls_constants(args.tolerance)
    print(f"r_star={k.r_star:.6f}")
    print(f"z_star={k.z_star:.6f}")
    print(f"h_at_opt={k.h_at_opt:.6f}")
    print(f"ls_ratio={ls_ratio():.6f}")
    rows = [["d", "Uj", "cj", "UjS", "UjL", "ratio_L", "ratio_S", "ratio_all", "choice"]]
    for d in args.d:
        for frac in args.ujs:
            Uj, cj = args.uj, args.cj
            UjS = frac * Uj
            UjL = Uj - UjS
            rL, rS, rA = mls_ratios(d, UjL, UjS, Uj, cj)
            choice = "L" if rL >= max(rS, rA) else ("S" if rS >= rA else "ALL")
            rows.append([d, Uj, cj, UjS, UjL, rL, rS, rA, choice])
    _csv_out(rows)
    return 0


def cmd_solve_lp(args) -> int:
    inst = load_instance(args.instance)
    if args.method == "simplex":
        routing = solve_routing_lp(inst)
    elif args.method == "greedy":
        routing = solve_layered_greedy(inst)
    else:
        routing = solve_for(inst)
    print(f"V_LP={format_value(routing.objective)}")
    print(f"method={routing.method}")
    print(f"n={inst.n} m={inst.m}")
    if args.lp_dump:
        dump_routing(routing, args.lp_dump)
    return 0


def cmd_gen(args) -> int:
    from .generators import (
        make_hospital_scenario,
        make_ls_tightness_instance,
        make_prop1_instance,
        make_random_setting,
    )

    fam = args.family
    if fam == "prop1":
        inst = make_prop1_instance(args.epsilon if args.epsilon is not None else 0.02, args.lambda1_total)
    elif fam == "ls-tight":
        inst = make_ls_tightness_instance(args.epsilon if args.epsilon is not None else 0.01, args.m)
    elif fam == "hospital":
        kw = dict(
            days=args.days,
            sessions_per_day=args.sessions_per_day if args.sessions_per_day is not None else 8,
            session_minutes=args.session_minutes,
            deadline_days=args.deadline_days,
            scale=args.scale,
        )
        if args.monday_only:
            kw["regular_weekdays"] = (0,)
            kw["urgent_weekdays"] = (1, 2, 3, 4)
        inst = make_hospital_scenario(**kw)
    else:
        inst = make_random_setting(
            args.seed, days=args.days, sessions_per_day=args.sessions_per_day if args.sessions_per_day is not None else 4
        )
    save_instance(inst, args.out)
    print(f"wrote {args.out} (family={inst.family}, n={inst.n}, m={inst.m})")
    return 0


def cmd_simulate(args) -> int:
    inst = load_instance(args.instance)
    policies = args.policy
    for p in policies:
        if p not in POLICY_NAMES:
            raise ValueError(f"unknown policy {p!r}; choose from {', '.join(POLICY_NAMES)}")
    policy_params = {}
    if args.d is not None:
        policy_params["mls"] = {"d": args.d}
    spec = ExperimentSpec(
        source=inst,
        policies=tuple(policies),
        replicates=args.replicates,
        master_seed=args.seed,
        denominator=args.denominator,
        policy_params=policy_params,
    )
    rep = run_experiment(spec)
    rows = [["policy", "mean_reward", "stderr", "denominator", "denominator_value", "ratio", "ratio_stderr",
             "wait_mean", "replicates"]]
    for name, p in rep.policies.items():
        rows.append([name, p.mean_reward, p.stderr, rep.denominator, rep.denominator_value, p.ratio,
                     p.ratio_stderr, p.wait_mean, rep.replicates])
    _csv_out(rows)
    return 0


def cmd_bench(args) -> int:
    if args.grid == "tables":
        configs = args.configs or list(TABLE_CONFIGS)
        scales = args.scales or list(TABLE_SCALES)
        variants = args.variants.split(",") if args.variants else ["all-days", "monday-regular"]
        points = tables_grid(configs, scales, variants, days=args.days)
        rows = run_tables(points, replicates=args.replicates, master_seed=args.seed)
        paths = write_tables_outputs(args.out, rows)
    else:
        points = random_settings_grid(args.settings, days=args.days)
        rows, summary = run_random_settings(points, replicates=args.replicates, master_seed=args.seed)
        paths = write_random_outputs(args.out, rows, summary)
    for p in paths:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="reserve", description="Online advance-reservation policies and experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("constants", help="print r*, z*, the LS ratio and a table of MLS ratios")
    c.add_argument("--tolerance", type=float, default=1e-8)
    c.add_argument("--d", type=_ints, default=[2, 3, 5], help="comma-separated d values")
    c.add_argument("--uj", type=float, default=1.0, help="LP load U_j")
    c.add_argument("--cj", type=float, default=1.0, help="capacity c_j")
    c.add_argument("--ujs", type=_floats, default=[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
                   help="comma-separated shares U_j^S / U_j")
    c.set_defaults(func=cmd_constants)

    s = sub.add_parser("solve-lp", help="solve the routing LP of an instance file")
    s.add_argument("--instance", required=True)
    s.add_argument("--lp-dump", metavar="PATH")
    s.add_argument("--method", choices=("auto", "simplex", "greedy"), default="auto")
    s.set_defaults(func=cmd_solve_lp)

    g = sub.add_parser("gen", help="generate an instance file")
    g.add_argument("--family", required=True, choices=("prop1", "ls-tight", "hospital", "random"))
    g.add_argument("--out", required=True)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--lambda1-total", type=float, default=1000.0)
    g.add_argument("--m", type=int, default=500)
    g.add_argument("--days", type=int, default=50)
    g.add_argument("--sessions-per-day", type=int)
    g.add_argument("--session-minutes", type=float, default=60.0)
    g.add_argument("--deadline-days", type=int, default=20)
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--monday-only", action="store_true", help="regular patients arrive on Mondays only, same-day patients on the other weekdays")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen)

    m = sub.add_parser("simulate", help="simulate policies on an instance file")
    m.add_argument("--instance", required=True)
    m.add_argument("--policy", type=lambda t: t.split(","), required=True, help="one name or a comma-separated list")
    m.add_argument("--replicates", type=int, default=200)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--d", type=int, help="MLS parameter d")
    m.add_argument("--denominator", choices=("lp_bound", "prop1_exact", "tightness_exact"), default="lp_bound")
    m.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="run an experiment grid and write CSV files")
    b.add_argument("--grid", required=True, choices=("tables", "random-settings"))
    b.add_argument("--out", required=True)
    b.add_argument("--replicates", type=int, default=200)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--days", type=int, default=50)
    b.add_argument("--configs", type=_configs, help="MINUTESxSESSIONS list, e.g. 60x8,120x4")
    b.add_argument("--scales", type=_floats, help="comma-separated capacity/demand scales")
    b.add_argument("--variants", help="comma-separated subset of all-days,monday-regular")
    b.add_argument("--settings", type=int, default=100, help="number of random settings")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(all="ignore")
    try:
        return args.func(args)
    except (LPError, ArithmeticError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (InstanceError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
