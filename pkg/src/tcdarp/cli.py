"""Command-line entry point: ``tcdarp <subcommand> ...``.

Exit codes: 0 success, 1 the solver could not meet its target (for example
an unattainable class cap), 2 invalid input or flags.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .errors import (
    Infeasible,
    MasterInfeasible,
    ParseError,
    SizeLimit,
    TcdarpError,
    ValidationError,
    VerificationError,
)
from .generator import VEHICLE_PRESETS, GeneratorParams, generate_instance
from .lns import LnsParams, solve_halfday
from .model import Period, dumps_canonical, load_instance, save_instance
from .oracle import oracle_checks
from .plan_io import dumps_plan, load_plan, plan_to_csv, plan_to_geojson, read_plan_data, solution_to_dict
from .pool import RoutePool
from .weekly import WeeklyParams, evaluate_plan, solve_week, threads_from_env


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _decimal(text: str) -> Decimal:
    try:
        val = Decimal(text)
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not val.is_finite() or val < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text!r}")
    return val


def _positive(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if val <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return val


def _nonneg(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if val < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    return val


def _period(text: str) -> Period:
    try:
        return Period.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tcdarp", description="Time-consistent dial-a-ride planning.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic weekly instance")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--users", type=_positive, default=20)
    g.add_argument("--establishments", type=_positive, default=2)
    g.add_argument("--dispersion", type=float, default=8.0, help="mean extra home distance, km")
    g.add_argument("--wheelchair-share", type=float, default=0.3)
    g.add_argument("--electric-share", type=float, default=0.1)
    g.add_argument("--attendance", type=float, default=0.8, help="probability of attending each day")
    g.add_argument("--window-width", type=_nonneg, default=15, help="delivery window width, minutes")
    g.add_argument("--vehicles", choices=sorted(VEHICLE_PRESETS), default="mixed")
    g.add_argument("--out", required=True)

    h = sub.add_parser("solve-halfday", help="run the LNS on one period")
    h.add_argument("--instance", required=True)
    h.add_argument("--period", type=_period, required=True, help="e.g. mon-am")
    h.add_argument("--iterations", type=_nonneg, default=10_000)
    h.add_argument("--seed", type=int, default=0)
    h.add_argument("--out")

    w = sub.add_parser("solve-week", help="weekly plan with the consistency loop")
    w.add_argument("--instance", required=True)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--lambda0", "--lambda", dest="lambda0", type=_decimal, default=Decimal("0"),
                   help="initial currency weight per excess class")
    w.add_argument("--growth", type=_decimal, default=Decimal("2"), help="weight multiplier per round")
    w.add_argument("--max-rounds", type=_nonneg, default=10)
    w.add_argument("--max-classes", type=_positive, help="hard cap on classes per user-half")
    w.add_argument("--window", type=_positive, help="time-class width, minutes (default: instance)")
    w.add_argument("--no-intensify", action="store_true", help="skip narrowed-window re-runs")
    w.add_argument("--iterations", type=_nonneg, default=10_000, help="LNS iterations per period")
    w.add_argument("--intensify-iterations", type=_positive, default=2000)
    w.add_argument("--pool-subset-n", type=_positive, default=50)
    w.add_argument("--master-time-limit", type=float, help="seconds; makes runs timing-dependent")
    w.add_argument("--master-node-limit", type=_positive, default=20_000)
    w.add_argument("--pool-halves", action="store_true", help="class AM and PM times together")
    w.add_argument("--out")

    e = sub.add_parser("evaluate", help="metrics of a plan file")
    e.add_argument("--instance", required=True)
    e.add_argument("--plan", required=True)
    e.add_argument("--emission-factor", type=float, default=0.25, help="kg CO2 per km")
    e.add_argument("--format", choices=("json", "csv"), default="json")

    x = sub.add_parser("export", help="GeoJSON or CSV view of a plan file")
    x.add_argument("--plan", required=True)
    x.add_argument("--format", choices=("geojson", "csv"), required=True)
    x.add_argument("--out")

    v = sub.add_parser("verify-oracle", help="compare solvers with brute force on a tiny instance")
    v.add_argument("--instance", required=True)
    v.add_argument("--period", type=_period, required=True)
    v.add_argument("--iterations", type=_nonneg, default=2000)
    v.add_argument("--seed", type=int, default=0)
    return p


def _json_default(obj):
    if isinstance(obj, Decimal):
        return float(obj)
    raise TypeError(type(obj))


def cmd_generate(a) -> int:
    params = GeneratorParams(seed=a.seed, n_establishments=a.establishments, n_users=a.users,
                             dispersion_km=a.dispersion, wheelchair_share=a.wheelchair_share,
                             electric_share=a.electric_share, attendance_prob=a.attendance,
                             window_width_min=a.window_width, vehicle_catalog_preset=a.vehicles)
    try:
        inst = generate_instance(params)
    except ValueError as exc:
        raise ValidationError("generate", str(exc)) from None
    save_instance(inst, a.out)
    return 0


def cmd_solve_halfday(a) -> int:
    inst = load_instance(a.instance)
    sol, pool = solve_halfday(inst, a.period, LnsParams(iterations=a.iterations, seed=a.seed))
    by_vehicle: dict[str, int] = {}
    for pr in pool:
        by_vehicle[pr.route.vehicle.id] = by_vehicle.get(pr.route.vehicle.id, 0) + 1
    out = {
        "format": "tcdarp-halfday",
        "period": a.period.name,
        "solution": solution_to_dict(sol, inst),
        "pool": {"routes": len(RoutePool(pool)), "by_vehicle": dict(sorted(by_vehicle.items()))},
    }
    _write(dumps_canonical(out), a.out)
    if sol.unassigned:
        print(f"{len(sol.unassigned)} request(s) left unassigned: {sorted(sol.unassigned)}", file=sys.stderr)
        return 1
    return 0


def cmd_solve_week(a) -> int:
    inst = load_instance(a.instance)
    try:
        params = WeeklyParams(lns=LnsParams(iterations=a.iterations, seed=a.seed), lambda0=a.lambda0,
                              lambda_growth=a.growth, max_rounds=a.max_rounds, max_classes=a.max_classes,
                              intensify=not a.no_intensify, intensify_iterations=a.intensify_iterations,
                              width=a.window, pool_subset_n=a.pool_subset_n, pooled_halves=a.pool_halves,
                              master_time_limit=a.master_time_limit, master_node_limit=a.master_node_limit,
                              workers=threads_from_env())
    except ValueError as exc:
        raise ValidationError("solve-week", str(exc)) from None
    plan = solve_week(inst, params)
    _write(dumps_plan(plan, inst), a.out)
    for e in plan.trace:
        print(f"round {e.round}: cost {e.total_cost} classes {e.total_classes}", file=sys.stderr)
    unassigned = sum(len(s.unassigned) for s in plan.solutions.values())
    if unassigned:
        print(f"{unassigned} request(s) left unassigned", file=sys.stderr)
        return 1
    if a.max_classes is not None and not plan.target_met:
        print(f"class cap {a.max_classes} not met", file=sys.stderr)
        return 1
    return 0


def cmd_evaluate(a) -> int:
    inst = load_instance(a.instance)
    plan = load_plan(a.plan, inst)
    metrics = evaluate_plan(inst, plan, a.emission_factor)
    if a.format == "json":
        sys.stdout.write(json.dumps(metrics, indent=2, sort_keys=True, default=_json_default) + "\n")
    else:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["metric", "value"])
        for key in sorted(metrics):
            val = metrics[key]
            if isinstance(val, dict):
                for sub_key, sub_val in val.items():
                    wr.writerow([f"{key}.{sub_key}", sub_val])
            else:
                wr.writerow([key, val])
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_export(a) -> int:
    data = read_plan_data(a.plan)
    try:
        if a.format == "geojson":
            text = dumps_canonical(plan_to_geojson(data))
        else:
            text = plan_to_csv(data)
    except (KeyError, TypeError, IndexError) as exc:
        raise ValidationError("plan", f"malformed route record ({exc!r})") from None
    _write(text, a.out)
    return 0


def cmd_verify_oracle(a) -> int:
    inst = load_instance(a.instance)
    results = oracle_checks(inst, a.period, iterations=a.iterations, seed=a.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


COMMANDS = {
    "generate": cmd_generate,
    "solve-halfday": cmd_solve_halfday,
    "solve-week": cmd_solve_week,
    "evaluate": cmd_evaluate,
    "export": cmd_export,
    "verify-oracle": cmd_verify_oracle,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (MasterInfeasible, Infeasible) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, ValidationError, VerificationError, SizeLimit) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TcdarpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(run())
