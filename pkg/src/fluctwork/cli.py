"""Command-line surface: single computations, figure sweeps, oracle audits.

Input is a single JSON document (see README for the schema).  Exit codes:
0 success, 1 property failure, 2 input error, 3 domain error, 4 I/O error.
All emitted numbers use a fixed 12-significant-digit format so that repeated
runs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .bounded import (
    c_bounded_formation,
    c_bounded_work,
    extraction_partition,
    work_curve,
)
from .core import (
    DiagonalState,
    DomainError,
    HamiltonianSpec,
    ThermalContext,
    deterministic_formation_cost,
    deterministic_work,
    unbounded_work,
)
from .engine import EngineSpec, engine_cycle, efficiency_sweep, max_efficiency
from .oracle import ConvergenceError, oracle_extraction, oracle_formation, random_instance
from .reversibility import TransitionSpec, is_reversible_within, min_reversible_c

EXIT_OK = 0
EXIT_PROPERTY = 1
EXIT_INPUT = 2
EXIT_DOMAIN = 3
EXIT_IO = 4

FIG1_DEFAULTS = {"gap": 0.1, "beta": 1.0, "c": 0.7, "x_min": 0.5, "x_max": 1.0,
                 "points": 501}
FIG2_DEFAULTS = {"probs": (0.7, 0.2, 0.1), "energies": (0.1, 0.2, 0.0),
                 "beta": 1.0, "c_max": 2.0, "points": 501}
FIG3_DEFAULTS = {"gap": 0.1, "t_cold": 1.0, "c_list": (0.01, 0.05, 0.1, 0.5),
                 "t_hot_min": 1.05, "t_hot_max": 1e4, "points": 400}


class InputError(ValueError):
    """Malformed or incomplete input document."""


def fmt(x) -> str:
    """Deterministic 12-significant-digit rendering."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0"
    ax = abs(x)
    if ax >= 1e6 or ax < 1e-4:
        return f"{x:.11e}"
    return f"{x:.12g}"


def _load_document(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError("document must be a JSON object")
    return doc


def _require(doc: dict, field: str):
    if field not in doc:
        raise InputError(f"missing required field {field!r}")
    return doc[field]


def _parse_state(node) -> DiagonalState:
    if not isinstance(node, dict) or "probs" not in node or "energies" not in node:
        raise InputError("state must be an object with 'probs' and 'energies'")
    try:
        return DiagonalState(node["probs"], node["energies"])
    except DomainError as exc:
        raise InputError(f"invalid state: {exc}") from exc


def _parse_problem(doc: dict, args, mode: str):
    if doc.get("mode", mode) != mode:
        raise InputError(f"document mode {doc.get('mode')!r} does not match {mode!r}")
    beta = args.beta if args.beta is not None else _require(doc, "beta")
    try:
        ctx = ThermalContext(float(beta))
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid beta: {exc}") from exc
    rho = _parse_state(_require(doc, "state"))
    final = doc.get("final_energies")
    try:
        h_final = HamiltonianSpec(final) if final is not None \
            else HamiltonianSpec(rho.energies)
    except DomainError as exc:
        raise InputError(f"invalid final_energies: {exc}") from exc
    c = args.c if args.c is not None else doc.get("c")
    if c is None:
        raise InputError("missing required field 'c'")
    return rho, h_final, ctx, float(c)


def _print_distribution(dist) -> None:
    print("level  probability      energy           work             fluctuation")
    for row in dist.entries:
        print(f"{row.index:>5}  {fmt(row.probability):<15}  {fmt(row.energy):<15}  "
              f"{fmt(row.work):<15}  {fmt(row.work - dist.mean)}")


def cmd_work(args) -> int:
    doc = _load_document(args.input)
    rho, h_final, ctx, c = _parse_problem(doc, args, "work")
    w0 = deterministic_work(rho, h_final, ctx)
    w_inf, _ = unbounded_work(rho, h_final, ctx)
    result = c_bounded_work(rho, h_final, ctx, c)
    part = result.partition
    print(f"bound c                  : {fmt(c)}")
    print(f"work, fluctuation-free   : {fmt(w0)}")
    print(f"work, c-bounded          : {fmt(result.value)}")
    print(f"work, unconstrained      : {fmt(w_inf)}")
    print(f"regime                   : {result.regime}")
    print(f"blocks (+c / free / -c)  : {list(part.plus)} {list(part.unbounded)} "
          f"{list(part.minus)}")
    _print_distribution(result.distribution)
    return EXIT_OK


def cmd_form(args) -> int:
    doc = _load_document(args.input)
    rho, h_initial, ctx, c = _parse_problem(doc, args, "form")
    cost0 = deterministic_formation_cost(rho, None, h_initial, ctx)
    result = c_bounded_formation(rho, None, h_initial, ctx, c)
    print(f"bound c                  : {fmt(c)}")
    print(f"cost, fluctuation-free   : {fmt(cost0)}")
    print(f"cost, c-bounded          : {fmt(result.value)}")
    print(f"regime                   : {result.regime}")
    part = result.partition
    print(f"blocks (-c / free / +c)  : {list(part.minus)} {list(part.unbounded)} "
          f"{list(part.plus)}")
    _print_distribution(result.distribution)
    return EXIT_OK


def cmd_partition(args) -> int:
    doc = _load_document(args.input)
    rho, h_final, ctx, c = _parse_problem(doc, args, "work")
    part = extraction_partition(rho, h_final, ctx, c)
    print(f"beta order               : {list(part.beta_permutation)}")
    print(f"clipped +c               : {list(part.plus)} (mass {fmt(part.mass_plus)})")
    print(f"unbounded                : {list(part.unbounded)} "
          f"(mass {fmt(part.mass_unbounded)})")
    print(f"clipped -c               : {list(part.minus)} (mass {fmt(part.mass_minus)})")
    print(f"water level              : {fmt(part.water_level)}")
    print(f"effective Boltzmann sum  : {fmt(part.effective_sum)}")
    return EXIT_OK


def cmd_reversible(args) -> int:
    doc = _load_document(args.input)
    if doc.get("mode", "reversible") != "reversible":
        raise InputError("document mode must be 'reversible'")
    beta = args.beta if args.beta is not None else _require(doc, "beta")
    ctx = ThermalContext(float(beta))
    spec = TransitionSpec(_parse_state(_require(doc, "state")),
                          _parse_state(_require(doc, "final_state")))
    c_min = min_reversible_c(spec, ctx)
    print(f"free-energy change       : {fmt(spec.free_energy_change(ctx))}")
    print(f"minimal reversible bound : {fmt(c_min)}")
    c = args.c if args.c is not None else doc.get("c")
    if c is not None:
        ok = is_reversible_within(spec, ctx, float(c))
        print(f"reversible within c={fmt(float(c))} : {'yes' if ok else 'no'}")
    return EXIT_OK


def cmd_engine(args) -> int:
    doc = _load_document(args.input)
    if doc.get("mode", "engine") != "engine":
        raise InputError("document mode must be 'engine'")
    for field in ("gap", "beta_hot", "beta_cold"):
        _require(doc, field)
    c = args.c if args.c is not None else doc.get("c")
    if c is None:
        raise InputError("missing required field 'c'")
    spec = EngineSpec(gap=float(doc["gap"]), beta_hot=float(doc["beta_hot"]),
                      beta_cold=float(doc["beta_cold"]), c=float(c))
    cycle = engine_cycle(spec)
    print(f"stroke 1 work            : {fmt(cycle.w1)}")
    print(f"stroke 2 work            : {fmt(cycle.w2)}")
    print(f"heat intake              : {fmt(cycle.q_hot)}")
    print(f"efficiency               : {fmt(cycle.efficiency)}")
    print(f"Carnot efficiency        : {fmt(1.0 - spec.beta_hot / spec.beta_cold)}")
    print(f"thresholds A, B          : {fmt(cycle.threshold_a)} {fmt(cycle.threshold_b)}")
    print(f"asymptotic ceiling       : {fmt(max_efficiency(spec.gap, spec.c))}")
    return EXIT_OK


def _write_csv(path: str, header, rows) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise _IOFailure(f"cannot write {path}: {exc}") from exc


class _IOFailure(OSError):
    pass


def _figure1_rows(x_min: float, x_max: float):
    p = FIG1_DEFAULTS
    ctx = ThermalContext(p["beta"])
    h = HamiltonianSpec((p["gap"], 0.0))
    rows = []
    for x in np.linspace(x_min, x_max, p["points"]):
        rho = DiagonalState((x, 1.0 - x), h.energies)
        w_inf, _ = unbounded_work(rho, h, ctx)
        w_c = c_bounded_work(rho, h, ctx, p["c"]).value
        wf_c = c_bounded_formation(rho, None, h, ctx, p["c"]).value
        rows.append((x, w_inf, w_c, wf_c))
    return rows


def _figure2_rows():
    p = FIG2_DEFAULTS
    ctx = ThermalContext(p["beta"])
    rho = DiagonalState(p["probs"], p["energies"])
    h = HamiltonianSpec(p["energies"])
    grid = np.linspace(0.0, p["c_max"], p["points"])
    rows = []
    w_inf, _ = unbounded_work(rho, h, ctx)
    for c, w_c, wf_c in work_curve(rho, h, ctx, grid):
        rows.append((c, w_c, wf_c, w_inf))
    return rows, rho, h, ctx


def cmd_figure(args) -> int:
    if args.number == 1:
        x_min = args.x_min if args.x_min is not None else FIG1_DEFAULTS["x_min"]
        x_max = args.x_max if args.x_max is not None else FIG1_DEFAULTS["x_max"]
        if not (0.5 <= x_min < x_max <= 1.0):
            raise InputError("need 0.5 <= x-min < x-max <= 1")
        _write_csv(args.out, ("x", "W_inf", "W_c", "WF_c"),
                   _figure1_rows(x_min, x_max))
    elif args.number == 2:
        rows, rho, h, ctx = _figure2_rows()
        _write_csv(args.out, ("c", "W_c", "WF_c", "W_inf"), rows)
        gibbs = DiagonalState.gibbs(h, ctx)
        c_extract = min_reversible_c(TransitionSpec(rho, gibbs), ctx)
        c_form = min_reversible_c(TransitionSpec(gibbs, rho), ctx)
        print(f"extraction reversible for c >= {fmt(c_extract)}")
        print(f"formation reversible for c >= {fmt(c_form)}")
    else:
        p = FIG3_DEFAULTS
        grid = np.geomspace(p["t_hot_min"], p["t_hot_max"], p["points"])
        table = efficiency_sweep(p["gap"], p["t_cold"], grid, p["c_list"])
        header = list(table[0].keys())
        _write_csv(args.out, header, [[row[k] for k in header] for row in table])
    return EXIT_OK


def run_oracle_check(seeds: int, d_max: int, tol: float, out=sys.stdout) -> int:
    """Compare the closed forms against the oracle on seeded instances."""
    if seeds < 1:
        raise InputError("seed count must be at least 1")
    if tol <= 0:
        raise InputError("tolerance must be positive")
    worst = 0.0
    failures = []
    for seed in range(seeds):
        rho, h, ctx, c = random_instance(seed, d_max=d_max)
        closed_w = c_bounded_work(rho, h, ctx, c).value
        oracle_w = oracle_extraction(rho, h, ctx, c).mean
        closed_f = c_bounded_formation(rho, None, h, ctx, c).value
        oracle_f = -oracle_formation(rho, None, h, ctx, c).mean
        dev = max(abs(closed_w - oracle_w), abs(closed_f - oracle_f))
        worst = max(worst, dev)
        if dev > tol:
            failures.append({
                "seed": seed,
                "probs": list(rho.probs),
                "energies": list(rho.energies),
                "beta": ctx.beta,
                "c": c,
                "closed_work": closed_w,
                "oracle_work": oracle_w,
                "closed_cost": closed_f,
                "oracle_cost": oracle_f,
            })
    print(f"instances checked        : {seeds}", file=out)
    print(f"max deviation            : {fmt(worst)}", file=out)
    print(f"failures                 : {len(failures)}", file=out)
    for item in failures:
        print(json.dumps(item, sort_keys=True), file=out)
    return EXIT_OK if not failures else EXIT_PROPERTY


def cmd_oracle_check(args) -> int:
    return run_oracle_check(args.seeds, args.d_max, args.tol)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fluctwork",
        description="optimal work extraction and state formation under a "
                    "hard fluctuation bound")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True, help="JSON problem document")
        p.add_argument("--c", type=float, default=None,
                       help="fluctuation bound (overrides document)")
        p.add_argument("--beta", type=float, default=None,
                       help="inverse temperature (overrides document)")

    for name, func in (("work", cmd_work), ("form", cmd_form),
                       ("partition", cmd_partition),
                       ("reversible", cmd_reversible), ("engine", cmd_engine)):
        p = sub.add_parser(name)
        add_io(p)
        p.set_defaults(func=func)

    p = sub.add_parser("figure", help="emit a CSV sweep")
    p.add_argument("number", type=int, choices=(1, 2, 3))
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--x-min", dest="x_min", type=float, default=None)
    p.add_argument("--x-max", dest="x_max", type=float, default=None)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("oracle-check", help="audit closed forms against the oracle")
    p.add_argument("--seeds", type=int, required=True)
    p.add_argument("--d-max", dest="d_max", type=int, default=5)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_PROPERTY
    except _IOFailure as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
