"""Command-line front end: simulate, curves, verify.

Reports are machine readable and deterministic: identical invocations
(including seeds) produce byte-identical files.  Exact rationals are
rendered both as floats and as "p/q" strings; plan exports are line-oriented
JSON with one broadcast per line so they diff and stream cleanly.

Exit codes: 0 success, 1 verification failure, 2 invalid invocation.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import analysis, delivery, mn
from .mn import ORIGIN_A, ORIGIN_B, ORIGIN_P
from .system import (
    Demand,
    GF2Combination,
    PacketId,
    SystemConfig,
    build_config,
    demand_from_mapping,
    random_demand,
    worst_demand,
)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_INVALID = 2

OUTDIR_ENV = "TRICACHE_OUTDIR"


class SpecError(Exception):
    """Invalid invocation or configuration; maps to exit code 2."""


def parse_fraction(text: str) -> Fraction:
    """Parse an exact fraction such as '1/2' or '3'; floats are rejected so
    integrality checks stay exact."""
    text = text.strip()
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise SpecError(f"expected an exact fraction like 1/2, got {text!r}: {exc}") from None


def fraction_str(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def float12(value: Fraction | float) -> str:
    return format(float(value), ".12g")


def resolve_output(path: str | None) -> Path | None:
    if path is None or path == "-":
        return None
    p = Path(path)
    outdir = os.environ.get(OUTDIR_ENV)
    if outdir and not p.is_absolute():
        p = Path(outdir) / p
    return p


def _write_text(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


# ---------------------------------------------------------------------------
# simulate

def _config_from_args(args: argparse.Namespace) -> SystemConfig:
    if args.lam is not None:
        if args.M is not None:
            raise SpecError("give either --lambda or --M/--N, not both")
        lam = parse_fraction(args.lam)
        N = args.N if args.N is not None else args.K
        M = lam * N
    else:
        if args.M is None or args.N is None:
            raise SpecError("give --lambda, or both --M and --N")
        M = Fraction(args.M)
        N = args.N
    try:
        return build_config(args.K, M, N)
    except ValueError as exc:
        raise SpecError(str(exc)) from None


def _demand_from_args(args: argparse.Namespace, config: SystemConfig) -> Demand:
    if args.demand == "worst":
        try:
            return worst_demand(config)
        except ValueError as exc:
            raise SpecError(str(exc)) from None
    if args.demand == "random":
        if args.seed is None:
            raise SpecError("--seed is required for --demand random")
        return random_demand(config, random.Random(args.seed))
    if args.demand == "file":
        if args.demand_file is None:
            raise SpecError("--demand-file is required for --demand file")
        raw = json.loads(Path(args.demand_file).read_text())
        mapping = {int(k): (v[0], int(v[1])) for k, v in raw.items()}
        try:
            return demand_from_mapping(config, mapping)
        except ValueError as exc:
            raise SpecError(str(exc)) from None
    raise SpecError(f"unknown demand source {args.demand!r}")


def _rational_fields(value: Fraction) -> dict:
    return {"float": float(value), "exact": fraction_str(value)}


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    demand = _demand_from_args(args, config)
    scheme = args.scheme

    if scheme == "mn":
        broadcasts = mn.mn_delivery(config, demand)
        recovery = mn.verify_full_recovery(config, demand, broadcasts)
        rate = Fraction(len(broadcasts), config.packets_per_file)
        report = {
            "K": config.K,
            "N": config.N,
            "M": _rational_fields(config.M),
            "t": config.t,
            "lambda": _rational_fields(config.lam),
            "scheme": scheme,
            "loads": {"single": len(broadcasts)},
            "F": config.packets_per_file,
            "R": _rational_fields(rate),
            "R_formula": _rational_fields(mn.mn_rate(config)),
            "delta_measured": None,
            "delta_formula": None,
            "verified": recovery.all_ok,
            "unpaired": 0,
            "pairs": 0,
            "singles": 0,
        }
        failures = [
            {"user": u.user, "missing": u.missing, "first_failed": _packet_json(u.first_failed)}
            for u in recovery.failures()
        ]
        plan_lines = None
    else:
        plan = delivery.build_plan(config, demand, scheme)
        problems, recovery = delivery.verify_plan(plan)
        rr = delivery.measure_rate(plan)
        if config.t % 2 == 1:
            if plan.scheme == "lap":
                delta_formula = analysis.delta_lap_exact(config.K, config.t)
            else:
                delta_formula = analysis.delta_improved_exact(config.K, config.t).delta_prime
        else:
            delta_formula = Fraction(0)
        report = {
            "K": config.K,
            "N": config.N,
            "M": _rational_fields(config.M),
            "t": config.t,
            "lambda": _rational_fields(config.lam),
            "scheme": scheme,
            "scheme_used": plan.scheme,
            "loads": {"A": rr.load_a, "B": rr.load_b, "P": rr.load_p},
            "F": rr.packets_per_file,
            "R": _rational_fields(rr.rate),
            "R_formula": _rational_fields(rr.rate_formula),
            "delta_measured": _rational_fields(rr.delta_measured),
            "delta_formula": _rational_fields(delta_formula),
            "verified": recovery.all_ok and not problems,
            "unpaired": rr.unpaired,
            "pairs": rr.pairs,
            "singles": rr.singles,
        }
        failures = [
            {"user": u.user, "missing": u.missing, "first_failed": _packet_json(u.first_failed)}
            for u in recovery.failures()
        ]
        if problems:
            failures.append({"audit": problems})
        plan_lines = _plan_lines(plan)

    if failures:
        report["failures"] = failures

    if args.format == "json":
        text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    else:
        text = _report_csv(report)
    _write_text(resolve_output(args.output), text)

    if plan_lines is not None and args.plan_out:
        path = resolve_output(args.plan_out)
        assert path is not None
        _write_text(path, "".join(plan_lines))

    return EXIT_OK if report["verified"] else EXIT_VERIFICATION


def _report_csv(report: dict) -> str:
    flat: dict[str, object] = {}
    for key, value in sorted(report.items()):
        if key == "failures":
            continue
        if isinstance(value, dict) and set(value) == {"float", "exact"}:
            flat[key] = float12(value["float"])
            flat[key + "_exact"] = value["exact"]
        elif isinstance(value, dict):
            for sub, v in sorted(value.items()):
                flat[f"{key}_{sub}"] = v
        else:
            flat[key] = value
    header = ",".join(flat)
    row = ",".join(str(v) for v in flat.values())
    return header + "\n" + row + "\n"


# ---------------------------------------------------------------------------
# plan files

def _packet_json(packet: PacketId | None) -> list | None:
    if packet is None:
        return None
    return [packet.server, packet.file_index, list(packet.subset)]


def _payload_json(payload: GF2Combination) -> list:
    return [_packet_json(p) for p in payload.sorted_terms()]


def _broadcast_line(kind: str, bc: mn.Broadcast, **extra) -> str:
    record = {
        "kind": kind,
        "origin": bc.origin,
        "payload": _payload_json(bc.payload),
        **extra,
    }
    return json.dumps(record, sort_keys=True) + "\n"


def _plan_lines(plan: delivery.DeliveryPlan) -> list[str]:
    config = plan.config
    meta = {
        "kind": "meta",
        "K": config.K,
        "M": fraction_str(config.M),
        "N": config.N,
        "t": config.t,
        "scheme": plan.scheme,
        "demand": {str(u): [plan.demand.of(u)[0], plan.demand.of(u)[1]] for u in config.users},
    }
    lines = [json.dumps(meta, sort_keys=True) + "\n"]
    for tr in plan.paired:
        s1, s2 = list(tr.s1), list(tr.s2)
        lines.append(_broadcast_line("pair", tr.m_a, s1=s1, s2=s2))
        lines.append(_broadcast_line("pair", tr.m_b, s1=s1, s2=s2))
        lines.append(_broadcast_line("pair", tr.m_p, s1=s1, s2=s2))
    for u in plan.unpaired:
        for bc in u.broadcasts:
            lines.append(_broadcast_line("unpaired", bc, s=list(u.subset)))
    for s in plan.singles:
        lines.append(_broadcast_line("single", s.broadcast, s=list(s.subset)))
    return lines


def _packet_from_json(item: Sequence) -> PacketId:
    server, idx, subset = item
    return PacketId(str(server), int(idx), tuple(int(u) for u in subset))


def load_plan(path: Path) -> delivery.DeliveryPlan:
    """Rebuild a plan structure from an exported file, without trusting it."""
    lines = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    if not lines or lines[0].get("kind") != "meta":
        raise SpecError("plan file must start with a meta line")
    meta = lines[0]
    config = build_config(int(meta["K"]), Fraction(meta["M"]), int(meta["N"]))
    demand = demand_from_mapping(
        config, {int(u): (v[0], int(v[1])) for u, v in meta["demand"].items()}
    )

    def rebuild(record: dict, index_sets: tuple) -> mn.Broadcast:
        payload = GF2Combination.from_terms(
            _packet_from_json(p) for p in record["payload"]
        )
        return mn.Broadcast(record["origin"], index_sets, payload)

    pair_groups: dict[tuple, dict[str, mn.Broadcast]] = {}
    unpaired_groups: dict[tuple, list[mn.Broadcast]] = {}
    singles = []
    for record in lines[1:]:
        kind = record.get("kind")
        if kind == "pair":
            s1 = tuple(record["s1"])
            s2 = tuple(record["s2"])
            bc = rebuild(record, (s1, s2) if record["origin"] == ORIGIN_P else
                         ((s1,) if record["origin"] == ORIGIN_A else (s2,)))
            pair_groups.setdefault((s1, s2), {})[record["origin"]] = bc
        elif kind == "unpaired":
            s = tuple(record["s"])
            unpaired_groups.setdefault(s, []).append(rebuild(record, (s,)))
        elif kind == "single":
            s = tuple(record["s"])
            bc = rebuild(record, (s,))
            singles.append(delivery.SingleAssignment(subset=s, server=bc.origin, broadcast=bc))
        else:
            raise SpecError(f"unknown plan line kind {kind!r}")

    paired = []
    for (s1, s2), group in pair_groups.items():
        missing = {ORIGIN_A, ORIGIN_B, ORIGIN_P} - set(group)
        if missing:
            raise SpecError(
                f"pair ({list(s1)}, {list(s2)}) is missing messages from {sorted(missing)}"
            )
        paired.append(delivery.PairedTriple(s1, s2, group[ORIGIN_A], group[ORIGIN_B], group[ORIGIN_P]))
    unpaired = []
    for s, bcs in unpaired_groups.items():
        if len(bcs) != 2:
            raise SpecError(f"unpaired subset {list(s)} needs exactly two broadcasts")
        servers = tuple(sorted(bc.origin for bc in bcs))
        unpaired.append(
            delivery.UnpairedAssignment(subset=s, servers=servers, broadcasts=tuple(bcs))
        )
    return delivery.DeliveryPlan(
        config=config,
        demand=demand,
        scheme=str(meta.get("scheme", "lap")),
        paired=tuple(paired),
        unpaired=tuple(unpaired),
        singles=tuple(singles),
    )


def cmd_verify(args: argparse.Namespace) -> int:
    path = Path(args.plan)
    if not path.exists():
        raise SpecError(f"plan file {path} does not exist")
    try:
        plan = load_plan(path)
    except SpecError:
        raise
    except Exception as exc:
        raise SpecError(f"malformed plan file: {exc}") from None
    problems, recovery = delivery.verify_plan(plan)
    for p in problems:
        print(f"audit failure: {p}")
    for u in recovery.failures():
        print(f"decode failure: user {u.user} misses {u.missing} packets, "
              f"first {u.first_failed}")
    if problems or not recovery.all_ok:
        return EXIT_VERIFICATION
    print(f"plan ok: {len(plan.paired)} pairs, {len(plan.unpaired)} unpaired, "
          f"{len(plan.singles)} singles, all users decode")
    return EXIT_OK


# ---------------------------------------------------------------------------
# curves

CURVE_COLUMNS = [
    "lambda", "lambda_num", "lambda_den",
    "K", "t", "regime",
    "n_exact", "ni_exact",
    "ni_over_n", "ni_over_n_num", "ni_over_n_den",
    "asymptote", "asymptote_num", "asymptote_den",
    "delta", "delta_num", "delta_den",
    "delta_prime", "delta_prime_num", "delta_prime_den",
    "delta_ratio", "delta_ratio_num", "delta_ratio_den",
]


def _rational_cells(value: Fraction | None) -> list[str]:
    if value is None:
        return ["", "", ""]
    return [float12(value), str(value.numerator), str(value.denominator)]


def _curve_csv(rows: list[analysis.CurveRow]) -> str:
    lines = [",".join(CURVE_COLUMNS)]
    for r in rows:
        cells = (
            _rational_cells(r.lam)
            + [str(r.K), str(r.t), str(r.regime), str(r.n), str(r.n_i)]
            + _rational_cells(r.ni_over_n)
            + _rational_cells(r.asymptote)
            + _rational_cells(r.delta)
            + _rational_cells(r.delta_prime)
            + _rational_cells(r.delta_ratio)
        )
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _grid_point(point: tuple[int, str]) -> tuple[list, list]:
    K, lam_text = point
    rows, skipped = analysis.ratio_curves([K], [Fraction(lam_text)])
    return rows, skipped


def cmd_curves(args: argparse.Namespace) -> int:
    try:
        K_values = [int(k) for k in args.K.split(",") if k]
    except ValueError as exc:
        raise SpecError(f"bad --K list: {exc}") from None
    lambdas = [parse_fraction(item) for item in args.lambdas.split(",") if item]
    if not K_values or not lambdas:
        raise SpecError("curves need at least one K and one lambda")

    if args.jobs > 1:
        points = [(K, str(lam)) for lam in lambdas for K in K_values]
        rows: list[analysis.CurveRow] = []
        skipped: list[analysis.SkippedPoint] = []
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for point_rows, point_skips in pool.map(_grid_point, points):
                rows.extend(point_rows)
                skipped.extend(point_skips)
    else:
        rows, skipped = analysis.ratio_curves(K_values, lambdas)

    for s in skipped:
        print(f"skipped lambda={s.lam} K={s.K}: {s.reason}", file=sys.stderr)
    if not rows:
        print("no admissible grid points", file=sys.stderr)
        return EXIT_INVALID
    _write_text(resolve_output(args.output), _curve_csv(rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tricache",
        description="Three-server coded caching: simulate delivery plans, "
        "verify decodability, and tabulate rate curves.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="build, verify and measure one delivery plan")
    sim.add_argument("--K", type=int, required=True, help="number of users (even)")
    sim.add_argument("--lambda", dest="lam", default=None,
                     help="cache fraction M/N as an exact fraction, e.g. 1/2")
    sim.add_argument("--M", type=int, default=None, help="cache size in files")
    sim.add_argument("--N", type=int, default=None,
                     help="number of files (defaults to K with --lambda)")
    sim.add_argument("--scheme", choices=["mn", "lap", "improved", "auto"], default="auto")
    sim.add_argument("--demand", choices=["worst", "random", "file"], default="worst")
    sim.add_argument("--demand-file", default=None, help="JSON map user -> [server, file]")
    sim.add_argument("--seed", type=int, default=None, help="seed for --demand random")
    sim.add_argument("--output", default=None, help="report path ('-' or omit for stdout)")
    sim.add_argument("--format", choices=["json", "csv"], default="json")
    sim.add_argument("--plan-out", default=None, help="also export the plan, one broadcast per line")
    sim.set_defaults(func=cmd_simulate)

    cur = sub.add_parser("curves", help="tabulate unpaired-ratio curves over a grid")
    cur.add_argument("--K", required=True, help="comma-separated user counts, e.g. 14,22,30")
    cur.add_argument("--lambdas", required=True,
                     help="comma-separated cache fractions, e.g. 1/3,1/2,2/3")
    cur.add_argument("--output", default=None, help="CSV path ('-' or omit for stdout)")
    cur.add_argument("--jobs", type=int, default=1, help="parallel workers for the grid")
    cur.set_defaults(func=cmd_curves)

    ver = sub.add_parser("verify", help="re-audit a previously exported plan file")
    ver.add_argument("--plan", required=True, help="plan file from simulate --plan-out")
    ver.set_defaults(func=cmd_verify)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
