"""Batch command line: solve, couple, noncausal, bound, simulate, verify.

Problem files are a single JSON document:

    {
      "states": ["A", "B"],
      "P": [[0.9, 0.1], [0.2, 0.8]],
      "P_prime": null,          // optional, defaults to P
      "x0": "A",
      "x0_prime": "B",
      "beta": 1.0,              // optional, default 1.0
      "cost": "discrete"        // or an explicit nonnegative matrix
    }

Machine output goes behind --json (one well-formed document per run;
+inf is encoded as the string "inf" so documents stay strict JSON), human
output is fixed-width tables. Exit codes: 0 success, 2 input error,
3 non-convergence, 4 undefined quantity, 5 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .chain import StateSpace, validate_kernel
from .concentration import BoundRequest, mcdiarmid_bound, variance_proxy
from .couplings import (
    CouplingKernel,
    check_sticky,
    classic_coupling,
    independent_coupling,
    validate_coupling,
    wasserstein_coupling,
)
from .dp import (
    ProblemSpec,
    discrete_metric,
    evaluate_policy,
    extract_greedy_coupling,
    value_iterate,
    verify_fixed_point,
    verify_optimal_coupling,
)
from .errors import BicausalError, InfiniteProxy, NoContraction, NotCouplingInstance
from .noncausal import W_FORMULA_CAVEAT, noncausal_cost_series, two_state_closed_forms
from .simulate import SimulationConfig, estimate_coupling_time

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NO_CONVERGENCE = 3
EXIT_UNDEFINED = 4
EXIT_VERIFY_FAILED = 5


class InputError(Exception):
    """Problem-file or argument defect; maps to exit code 2."""


@dataclass(frozen=True)
class Problem:
    space: StateSpace
    spec: ProblemSpec


# --- JSON helpers -----------------------------------------------------------


def _jsonable(obj):
    """Recursively encode for strict JSON; +-inf/nan become strings."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def _number(v, where: str) -> float:
    if isinstance(v, str):
        if v == "inf":
            return math.inf
        if v == "-inf":
            return -math.inf
        if v == "nan":
            return math.nan
        raise InputError(f"{where}: expected a number, got {v!r}")
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    raise InputError(f"{where}: expected a number, got {v!r}")


def _matrix(v, where: str) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise InputError(f"{where}: expected a matrix (list of rows)")
    try:
        return np.array([[_number(x, where) for x in row] for row in v], dtype=float)
    except InputError:
        raise
    except Exception as exc:
        raise InputError(f"{where}: {exc}") from exc


def _emit(doc: dict, path: str | None = None) -> None:
    text = json.dumps(_jsonable(doc), indent=2, allow_nan=False)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# --- problem loading --------------------------------------------------------


def load_problem(path: str) -> Problem:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise InputError(f"{path}: top level must be an object")
    for key in ("states", "P", "x0", "x0_prime"):
        if key not in raw:
            raise InputError(f"{path}: missing required field {key!r}")
    states = raw["states"]
    if not isinstance(states, list) or not all(isinstance(s, str) for s in states):
        raise InputError(f"{path}: field 'states' must be a list of labels")
    try:
        space = StateSpace(tuple(states))
    except ValueError as exc:
        raise InputError(f"{path}: field 'states': {exc}") from exc
    try:
        P = validate_kernel(_matrix(raw["P"], "field 'P'"))
    except BicausalError as exc:
        raise InputError(f"{path}: field 'P': {exc}") from exc
    if raw.get("P_prime") is None:
        P_prime = P
    else:
        try:
            P_prime = validate_kernel(_matrix(raw["P_prime"], "field 'P_prime'"))
        except BicausalError as exc:
            raise InputError(f"{path}: field 'P_prime': {exc}") from exc
    if P.n != space.n or P_prime.n != space.n:
        raise InputError(f"{path}: kernel size does not match the state list")
    try:
        x0 = space.index(raw["x0"])
        x0_prime = space.index(raw["x0_prime"])
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    beta = _number(raw.get("beta", 1.0), "field 'beta'")
    cost_field = raw.get("cost", "discrete")
    if cost_field == "discrete":
        cost = discrete_metric(space.n)
    else:
        cost = _matrix(cost_field, "field 'cost'")
    try:
        spec = ProblemSpec(P, P_prime, x0, x0_prime, cost, beta)
    except (BicausalError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    return Problem(space=space, spec=spec)


# --- output helpers ---------------------------------------------------------


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.6f}"


def _print_table(space: StateSpace, M: np.ndarray, title: str) -> None:
    width = max(12, max(len(s) for s in space.labels) + 2)
    print(title)
    header = " " * width + "".join(f"{s:>{width}}" for s in space.labels)
    print(header)
    for i, label in enumerate(space.labels):
        cells = "".join(f"{_fmt(float(M[i, j])):>{width}}" for j in range(space.n))
        print(f"{label:<{width}}{cells}")


def _coupling_doc(space: StateSpace, Q: CouplingKernel) -> dict:
    return {
        x_label: {
            xp_label: Q.plans[x, xp]
            for xp, xp_label in enumerate(space.labels)
        }
        for x, x_label in enumerate(space.labels)
    }


def _coupling_from_doc(space: StateSpace, doc, where: str) -> CouplingKernel:
    n = space.n
    plans = np.empty((n, n, n, n))
    if not isinstance(doc, dict):
        raise InputError(f"{where}: coupling must be a nested label map")
    try:
        for x, xl in enumerate(space.labels):
            for xp, xpl in enumerate(space.labels):
                plans[x, xp] = _matrix(doc[xl][xpl], f"{where}[{xl}][{xpl}]")
    except KeyError as exc:
        raise InputError(f"{where}: missing coupling entry for label {exc}") from exc
    plans.flags.writeable = False
    return CouplingKernel(plans)


def _write_csv(path: str, space: StateSpace, M: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("," + ",".join(space.labels) + "\n")
        for i, label in enumerate(space.labels):
            row = ",".join(repr(float(v)) for v in M[i])
            fh.write(f"{label},{row}\n")


def _build_coupling(kind: str, problem: Problem, args) -> tuple[CouplingKernel, int]:
    spec = problem.spec
    if kind == "classic":
        if not spec.same_kernel():
            raise InputError("classic coupling needs P = P_prime")
        return classic_coupling(spec.P), EXIT_OK
    if kind == "independent":
        return independent_coupling(spec.P, spec.P_prime), EXIT_OK
    if kind == "wasserstein":
        return wasserstein_coupling(spec.P, spec.P_prime), EXIT_OK
    report = value_iterate(spec, tol=args.tol, max_iter=args.max_iter, threads=args.threads)
    code = EXIT_OK if report.converged else EXIT_NO_CONVERGENCE
    return extract_greedy_coupling(report.value_table, spec), code


# --- subcommands ------------------------------------------------------------


def cmd_solve(args) -> int:
    problem = load_problem(args.problem)
    spec = problem.spec
    report = value_iterate(spec, tol=args.tol, max_iter=args.max_iter, threads=args.threads)
    coupling = extract_greedy_coupling(report.value_table, spec)
    flags = sorted(
        [problem.space.label(x), problem.space.label(xp)] for x, xp in report.infinite_flags
    )
    if args.csv:
        _write_csv(args.csv, problem.space, report.value_table)
    if args.json:
        _emit(
            {
                "states": list(problem.space.labels),
                "w_bc": report.value_table,
                "iterations": report.iterations,
                "residual": report.residual,
                "converged": report.converged,
                "regime": report.regime,
                "coupling": _coupling_doc(problem.space, coupling),
                "flags": flags,
            },
            args.output,
        )
    else:
        _print_table(problem.space, report.value_table, "adapted transport cost")
        print(f"iterations: {report.iterations}")
        print(f"residual: {report.residual:.3e}")
        print(f"converged: {str(report.converged).lower()}  regime: {report.regime}")
        if flags:
            print(f"possibly infinite pairs: {flags}")
        print("optimal coupling extracted; rerun with --json for the full kernel")
    return EXIT_OK if report.converged else EXIT_NO_CONVERGENCE


def cmd_couple(args) -> int:
    problem = load_problem(args.problem)
    spec = problem.spec
    Q, code = _build_coupling(args.kind, problem, args)
    valid = validate_coupling(Q, spec.P, spec.P_prime, tol=1e-9)
    sticky = check_sticky(Q, spec.P, tol=1e-9)
    policy_value = evaluate_policy(Q, spec)
    if args.json:
        _emit(
            {
                "states": list(problem.space.labels),
                "kind": args.kind,
                "coupling": _coupling_doc(problem.space, Q),
                "valid": valid,
                "sticky": sticky,
                "policy_value": policy_value,
            },
            args.output,
        )
    else:
        print(f"coupling kind: {args.kind}")
        print(f"valid member of the coupling polytope: {str(valid).lower()}")
        print(f"sticky on the diagonal: {str(sticky).lower()}")
        _print_table(problem.space, policy_value, "expected cost under this coupling")
    return code


def cmd_noncausal(args) -> int:
    problem = load_problem(args.problem)
    spec = problem.spec
    if not spec.same_kernel():
        raise InputError("the maximal-coupling series needs P = P_prime")
    series = noncausal_cost_series(
        spec.P, spec.x0, spec.x0_prime, beta=spec.beta, tol=args.tol
    )
    doc = {
        "series": {
            "value": series.value,
            "terms_used": series.terms_used,
            "tail_bound": series.tail_bound,
        }
    }
    if spec.n == 2:
        forms = two_state_closed_forms(spec.P)
        doc["two_state_forms"] = {
            "w_formula": forms.w_formula,
            "w_bc_formula": forms.w_bc_formula,
            "w_formula_caveat": forms.w_formula_caveat,
            "caveat": W_FORMULA_CAVEAT,
        }
    if args.json:
        _emit(doc, args.output)
    else:
        print(f"non-causal cost series: {_fmt(series.value)}")
        print(f"terms used: {series.terms_used}   certified tail: {series.tail_bound:.3e}")
        if spec.n == 2:
            forms = two_state_closed_forms(spec.P)
            print(f"two-state closed form (adapted):    {_fmt(forms.w_bc_formula)}")
            print(f"two-state closed form (non-causal): {_fmt(forms.w_formula)}  [caveat]")
            print(f"caveat: {W_FORMULA_CAVEAT}")
    return EXIT_OK


def cmd_bound(args) -> int:
    problem = load_problem(args.problem)
    mode = {"series": "noncausal_series", "dp": "bicausal_dp", "doeblin": "doeblin"}[args.proxy]
    req = BoundRequest(n=args.n, t=args.t, proxy_mode=mode)
    proxy = variance_proxy(problem.spec, mode, tol=args.tol)
    bound = mcdiarmid_bound(req, proxy)
    if args.json:
        _emit(
            {"proxy_mode": mode, "proxy": proxy, "n": args.n, "t": args.t, "bound": bound},
            args.output,
        )
    else:
        print(f"proxy ({mode}): {proxy:.9g}")
        print(f"deviation bound at n={args.n}, t={args.t}: {bound:.6g}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    problem = load_problem(args.problem)
    spec = problem.spec
    Q, code = _build_coupling(args.kind, problem, args)
    cfg = SimulationConfig(samples=args.samples, horizon_cap=args.horizon, master_seed=args.seed)
    stats = estimate_coupling_time(Q, spec.x0, spec.x0_prime, cfg, threads=args.threads)
    if args.json:
        _emit(
            {
                "kind": args.kind,
                "x0": problem.space.label(spec.x0),
                "x0_prime": problem.space.label(spec.x0_prime),
                "samples": stats.samples,
                "horizon": args.horizon,
                "seed": args.seed,
                "mean": stats.mean,
                "std_error": stats.std_error,
                "censored": stats.censored,
            },
            args.output,
        )
    else:
        print(f"coupling time under the {args.kind} coupling, {stats.samples} samples:")
        print(f"mean: {_fmt(stats.mean)}   std error: {stats.std_error:.6g}")
        print(f"censored at horizon {args.horizon}: {stats.censored}")
    return code


def cmd_verify(args) -> int:
    problem = load_problem(args.problem)
    spec = problem.spec
    table_doc = _load_json(args.value_table)
    if isinstance(table_doc, dict):
        table_doc = table_doc.get("w_bc", table_doc.get("value_table"))
    V = _matrix(table_doc, f"{args.value_table}: value table")
    if V.shape != (spec.n, spec.n):
        raise InputError(f"{args.value_table}: value table must be {spec.n}x{spec.n}")
    coupling_doc = _load_json(args.coupling)
    if isinstance(coupling_doc, dict) and "coupling" in coupling_doc:
        coupling_doc = coupling_doc["coupling"]
    Q = _coupling_from_doc(problem.space, coupling_doc, args.coupling)
    fp = verify_fixed_point(V, spec, tol=args.tol)
    coupling_valid = validate_coupling(Q, spec.P, spec.P_prime, tol=1e-9)
    optimal = coupling_valid and verify_optimal_coupling(Q, V, spec, tol=args.tol)
    checks = {
        "fixed_point": fp.is_fixed_point,
        "residual": fp.residual,
        "diagonal_ok": fp.diagonal_ok,
        "finite_ok": fp.finite_ok,
        "coupling_valid": coupling_valid,
        "coupling_optimal": optimal,
    }
    passed = (
        fp.is_fixed_point
        and coupling_valid
        and optimal
        and fp.diagonal_ok is not False
        and fp.finite_ok is not False
    )
    if args.json:
        _emit({"passed": passed, **checks}, args.output)
    else:
        print(f"fixed-point residual: {fp.residual:.3e} -> {'ok' if fp.is_fixed_point else 'FAIL'}")
        if fp.diagonal_ok is not None:
            print(f"zero diagonal: {'ok' if fp.diagonal_ok else 'FAIL'}")
            print(f"finite entries: {'ok' if fp.finite_ok else 'FAIL'}")
        print(f"coupling marginals: {'ok' if coupling_valid else 'FAIL'}")
        print(f"coupling optimality: {'ok' if optimal else 'FAIL'}")
        print("verification " + ("passed" if passed else "FAILED"))
    return EXIT_OK if passed else EXIT_VERIFY_FAILED


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bicausal",
        description="Adapted optimal transport between finite-state Markov chains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, tolerance=True):
        p.add_argument("problem", help="problem JSON file")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.add_argument("--output", default=None, help="write the JSON report to a file")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        if tolerance:
            p.add_argument("--tol", type=float, default=1e-9)

    p = sub.add_parser("solve", help="value-iterate the adapted transport cost")
    common(p)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--csv", default=None, help="also export the value table as CSV")
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("couple", help="construct and evaluate a named coupling")
    common(p)
    p.add_argument(
        "--kind",
        choices=("classic", "independent", "wasserstein", "optimal"),
        default="wasserstein",
    )
    p.add_argument("--max-iter", type=int, default=100_000)
    p.set_defaults(handler=cmd_couple)

    p = sub.add_parser("noncausal", help="maximal-coupling series and closed forms")
    common(p)
    p.set_defaults(handler=cmd_noncausal)

    p = sub.add_parser("bound", help="bounded-differences concentration bound")
    common(p)
    p.add_argument("--n", type=int, required=True, help="number of chain steps")
    p.add_argument("--t", type=float, required=True, help="deviation")
    p.add_argument("--proxy", choices=("series", "dp", "doeblin"), default="doeblin")
    p.set_defaults(handler=cmd_bound)

    p = sub.add_parser("simulate", help="Monte Carlo coupling-time estimate")
    common(p)
    p.add_argument(
        "--kind",
        choices=("classic", "independent", "wasserstein", "optimal"),
        default="wasserstein",
    )
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--horizon", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("verify", help="check a solve report against the problem")
    common(p, tolerance=False)
    p.add_argument("value_table", help="JSON file holding the value table (or a solve report)")
    p.add_argument("coupling", help="JSON file holding the coupling (or a solve report)")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(handler=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NoContraction, NotCouplingInstance, InfiniteProxy) as exc:
        print(f"undefined: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED
    except BicausalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
