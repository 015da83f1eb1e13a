"""Command-line front end: ``privguess <command> [flags]``.

Every command writes a delimited table (CSV by default, JSON with
``--format json``) to ``--out`` or stdout. Exit codes: 0 success,
2 invalid input, 3 a closed form requested outside its certified regime
(only with ``--strict``), 1 a failed internal check.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from privguess import __version__, core, gaussian, io, oracle, scalar, vector
from privguess.errors import CertificateError, PrivGuessError, RegimeError, ValidationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

UNCERTIFIED = "uncertified"

# Keys accepted in a --config file; each mirrors a flag of the same name.
CONFIG_KEYS = {
    "p", "alpha", "beta", "r", "n", "rho", "rho_m", "var_y", "eps", "eps_grid", "resolution",
    "budget", "seed", "out", "format", "joint", "num_points", "strict", "memoryless",
    "restricted", "tol", "ns",
}
_FLOAT_KEYS = {"p", "alpha", "beta", "r", "rho", "rho_m", "var_y", "eps", "tol"}
_INT_KEYS = {"n", "resolution", "budget", "seed", "num_points"}
_BOOL_KEYS = {"strict", "memoryless", "restricted"}
DEFAULTS = {"format": "csv", "seed": 0, "budget": 0, "num_points": 21, "strict": False,
            "memoryless": False, "restricted": False, "tol": 2e-3, "ns": "2,10"}


# -- argument handling ------------------------------------------------------


def parse_grid(text: str) -> tuple[float, float, int]:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ValidationError(f"--eps-grid must look like min:max:count, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValidationError(f"--eps-grid must look like min:max:count, got {text!r}") from None
    if count < 1 or (count > 1 and not hi > lo):
        raise ValidationError(f"--eps-grid needs count >= 1 and max > min, got {text!r}")
    return lo, hi, count


def _eps_values(args, domain: tuple[float, float]) -> np.ndarray:
    if args.eps is not None and args.eps_grid is not None:
        raise ValidationError("give either --eps or --eps-grid, not both")
    if args.eps is not None:
        return np.array([float(args.eps)])
    if args.eps_grid is not None:
        lo, hi, count = parse_grid(args.eps_grid)
        return np.array([lo]) if count == 1 else np.linspace(lo, hi, count)
    lo, hi = domain
    if hi - lo <= 0:
        return np.array([lo])
    return np.linspace(lo, hi, args.num_points)


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise ValidationError(f"missing required parameter(s): {', '.join(missing)}")


def _load_config(path: str) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path!r}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"invalid TOML in {path!r}: {exc}") from None
    data = {k.replace("-", "_"): v for k, v in data.items() if k != "command"}
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ValidationError(f"unknown config key(s): {', '.join(unknown)}")
    for key, value in data.items():
        ok = (isinstance(value, (int, float)) and not isinstance(value, bool) if key in _FLOAT_KEYS
              else isinstance(value, int) and not isinstance(value, bool) if key in _INT_KEYS
              else isinstance(value, bool) if key in _BOOL_KEYS
              else isinstance(value, str))
        if not ok:
            raise ValidationError(f"config key {key!r} has the wrong type: {value!r}")
        if key in _FLOAT_KEYS:
            data[key] = float(value)
    return data


def _resolve(args) -> argparse.Namespace:
    """Merge config values under explicit flags, then fill in defaults."""
    config = _load_config(args.config) if args.config else {}
    for key in CONFIG_KEYS:
        if getattr(args, key, None) is None and key in config:
            setattr(args, key, config[key])
    for key, value in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


def _config_echo(args) -> dict[str, Any]:
    keys = sorted(k for k in CONFIG_KEYS | {"command"} if getattr(args, k, None) is not None)
    return {k: getattr(args, k) for k in keys}


def _emit(args, columns: Sequence[str], rows: list[dict[str, Any]], extra_meta=None) -> str:
    if args.format == "json":
        meta = {"config": _config_echo(args), "version": __version__}
        meta.update(extra_meta or {})
        text = io.rows_to_json(meta, rows)
    else:
        text = io.rows_to_csv(columns, rows)
    if args.out:
        Path(args.out).write_text(text, newline="")
    else:
        sys.stdout.write(text)
    return text


# -- closed-form commands ---------------------------------------------------


def _closed_form_row(args, eps: float, certified_fn: Callable[[float], Any],
                     continuation: Callable[[float], dict[str, Any]]) -> dict[str, Any]:
    """Row for a certified closed-form point, or its continuation when not certified."""
    try:
        result = certified_fn(eps)
    except RegimeError:
        if args.strict:
            raise
        return continuation(eps)
    pt = result.lower if isinstance(result, vector.MarkovBounds) else result
    if pt.achieved is False:
        if args.strict:
            raise RegimeError(f"eps={eps!r} is outside the certified regime (certificate fails)")
        return continuation(eps)
    row = io.point_row(pt, filter=pt.filter)
    if isinstance(result, vector.MarkovBounds):
        row["upper"] = result.upper
    return row


def _nth_root(value: float, n: int) -> float:
    return value ** (1.0 / n) if value >= 0 else float("nan")


def cmd_scalar(args) -> None:
    if args.joint is not None:
        joint = io.load_joint(args.joint)
        domain = (core.pc_marginal(joint.p_x), core.pc_conditional(joint))
        slope, _ = scalar.underline_h_slope(joint)

        def continuation(e):
            return {"epsilon": e, "utility": 1.0 - (domain[1] - e) * slope, "regime": UNCERTIFIED}

        rows = [_closed_form_row(args, float(e), lambda e: scalar.underline_h_linear(joint, e), continuation)
                for e in _eps_values(args, domain)]
    else:
        _require(args, "p", "alpha", "beta")
        model = scalar.BinaryScalarModel(args.p, args.alpha, args.beta)
        rows = [io.point_row(pt, filter=pt.filter)
                for pt in (scalar.h_binary(model, float(e)) for e in _eps_values(args, model.domain))]
    _emit(args, io.SCALAR_COLUMNS, rows)


def cmd_vector_iid(args) -> None:
    _require(args, "n", "p", "alpha")
    model = vector.IidModel(args.n, args.p, args.alpha)
    n = model.n
    if args.memoryless:
        rows = [io.point_row(pt, filter=pt.filter)
                for pt in (vector.h_n_memoryless(model, float(e)) for e in _eps_values(args, model.domain))]
        _emit(args, io.VECTOR_COLUMNS, rows)
        return
    threshold = model.certified_threshold()

    def certified(e):
        pt = vector.underline_h_n_iid(model, e)
        if pt.achieved is None and e < threshold - scalar.DOMAIN_TOL:
            raise RegimeError(f"eps={e!r} is below the certified threshold {threshold!r}")
        return pt

    def continuation(e):
        return {"epsilon": e, "utility": vector.underline_h_n_iid_value(model, e), "regime": UNCERTIFIED, "n": n}

    rows = [_closed_form_row(args, float(e), certified, continuation) for e in _eps_values(args, model.domain)]
    _emit(args, io.VECTOR_COLUMNS, rows, {"certified_threshold": threshold})


def cmd_vector_markov(args) -> None:
    _require(args, "n", "p", "alpha", "r")
    model = vector.MarkovModel(args.n, args.p, args.alpha, args.r)
    pc = vector.pc_markov_cond(model)
    n = model.n
    span = args.p * ((1 - args.alpha) * model.rbar) ** n - (1 - args.p) * (args.alpha * model.rbar) ** n
    py1 = model.prob_y_ones()

    def continuation(e):
        zeta = model.rbar * (pc - e ** n) / span
        return {"epsilon": e, "utility": _nth_root(1 - zeta * py1, n),
                "upper": _nth_root(1 - zeta * args.alpha ** n, n), "regime": UNCERTIFIED, "n": n}

    domain = (model.pc_x() ** (1 / n), pc ** (1 / n))
    rows = [_closed_form_row(args, float(e), lambda e: vector.underline_h_n_markov_bounds(model, e), continuation)
            for e in _eps_values(args, domain)]
    _emit(args, io.MARKOV_COLUMNS, rows)


def cmd_parametric(args) -> None:
    _require(args, "n", "p", "alpha")
    model = vector.ParametricModel(args.n, args.p, args.alpha)
    pc, n, a = model.pc_theta(), model.n, args.alpha

    def continuation(e):
        zeta = (pc - e ** n) / (args.p * (1 - a) ** n - (1 - args.p) * a ** n)
        util = 1 - zeta * (args.p * (1 - a) ** n + (1 - args.p) * a ** n)
        return {"epsilon": e, "utility": _nth_root(util, n), "regime": UNCERTIFIED, "n": n}

    rows = [_closed_form_row(args, float(e), lambda e: vector.parametric_h_n(model, e), continuation)
            for e in _eps_values(args, model.domain())]
    _emit(args, io.VECTOR_COLUMNS, rows)


# -- oracle and verification -------------------------------------------------


def _oracle_joint(args) -> core.JointPmf:
    if args.joint is not None:
        return io.load_joint(args.joint)
    _require(args, "p", "alpha", "beta")
    return scalar.BinaryScalarModel(args.p, args.alpha, args.beta).joint()


def cmd_oracle(args) -> None:
    joint = _oracle_joint(args)
    domain = (core.pc_marginal(joint.p_x), core.pc_conditional(joint))
    eps_values = _eps_values(args, domain)
    rows = []
    if not args.restricted:
        grid = oracle.PosteriorGrid.build(joint, args.resolution or oracle.default_resolution(joint.N))
        for e in eps_values:
            sol = oracle.oracle_h(joint, float(e), grid=grid)
            if sol.status is not oracle.LpStatus.OPTIMAL:
                raise ValidationError(f"eps={float(e)!r} is below P_c(X)={domain[0]!r}: LP infeasible")
            rows.append({"epsilon": float(e), "utility": sol.value, "regime": scalar.Regime.ORACLE,
                         "source": "lp", "filter": oracle.filter_from_solution(joint, sol)})
    if args.budget > 0 or args.restricted:
        budget = args.budget or 2000
        for pt in oracle.search_points(joint, eps_values, budget, args.seed, restricted=args.restricted):
            if not pt.achieved:
                raise CertificateError(f"search returned an infeasible filter at eps={pt.epsilon!r}")
            rows.append(io.point_row(pt, filter=pt.filter))
    _emit(args, io.ORACLE_COLUMNS, rows)


def cmd_verify(args) -> None:
    _require(args, "p", "alpha", "beta")
    model = scalar.BinaryScalarModel(args.p, args.alpha, args.beta)
    joint = model.joint()
    grid = oracle.PosteriorGrid.build(joint, args.resolution or 512)
    rows = []
    for e in _eps_values(args, model.domain):
        closed = scalar.h_binary(model, float(e))
        sol = oracle.oracle_h(joint, float(e), grid=grid)
        rows.append({"epsilon": float(e), "closed_form": closed.utility, "oracle": sol.value,
                     "abs_diff": abs(closed.utility - sol.value), "certified": closed.achieved})
    worst = max(r["abs_diff"] for r in rows)
    _emit(args, ("epsilon", "closed_form", "oracle", "abs_diff", "certified"), rows,
          {"max_abs_diff": worst, "tolerance": args.tol})
    print(f"max |closed form - LP| = {worst:.3e} (tolerance {args.tol:g})", file=sys.stderr)
    if not worst < args.tol:
        raise CertificateError(f"closed form and LP disagree by {worst!r}")


# -- Gaussian -----------------------------------------------------------------


def cmd_gaussian(args) -> None:
    _require(args, "rho")
    model = gaussian.GaussianPairModel(args.var_y if args.var_y is not None else 1.0, args.rho, args.rho_m)
    rows = []
    for e in _eps_values(args, (0.0, model.rho_m ** 2)):
        e = float(e)
        bounds = gaussian.sensr_bounds_gaussian_y(model, e)
        row = {"epsilon": e, "lower": bounds.lower, "upper": bounds.upper}
        if model.jointly_gaussian:
            res = gaussian.sensr_gaussian(model, e)
            row.update(sensr=res.value, gamma_eps=res.gamma_eps, attained=res.attained)
        rows.append(row)
    _emit(args, io.GAUSSIAN_COLUMNS, rows)


# -- memoryless versus restricted comparison ----------------------------------


def cmd_iid_gap(args) -> None:
    if not args.out:
        raise ValidationError("iid-gap writes several files; give a directory with --out")
    p = 0.6 if args.p is None else args.p
    alpha = 0.2 if args.alpha is None else args.alpha
    try:
        ns = [int(v) for v in str(args.ns).split(",")]
    except ValueError:
        raise ValidationError(f"--ns must be a comma-separated list of integers, got {args.ns!r}") from None
    curves = vector.comparison_curves(p, alpha, ns, num_points=args.num_points)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    columns = ("epsilon", "utility", "utility_pow_n", "certified", "n")
    fits = []
    for c in curves:
        power = 1 if c.label == "memoryless" else c.n
        rows = [{"epsilon": e, "utility": u, "utility_pow_n": u ** power, "certified": bool(k), "n": power}
                for e, u, k in zip(c.epsilons, c.utilities, c.certified)]
        text = io.rows_to_csv(columns, rows)
        (outdir / f"{c.label}.csv").write_text(text, newline="")
        fits.append({"curve": c.label, "n": power, "slope": c.coefficients[0],
                     "intercept": c.coefficients[1], "eps_low": c.eps_low})
    summary = io.rows_to_csv(("curve", "n", "slope", "intercept", "eps_low"), fits)
    (outdir / "fit.csv").write_text(summary, newline="")
    sys.stdout.write(summary)


# -- entry point ------------------------------------------------------------


COMMANDS = {
    "scalar": cmd_scalar,
    "vector-iid": cmd_vector_iid,
    "vector-markov": cmd_vector_markov,
    "parametric": cmd_parametric,
    "oracle": cmd_oracle,
    "gaussian": cmd_gaussian,
    "verify": cmd_verify,
    "iid-gap": cmd_iid_gap,
}

HELP = {
    "scalar": "binary closed form, or the restricted linear regime of --joint",
    "vector-iid": "restricted (or --memoryless) tradeoff for i.i.d. bit vectors",
    "vector-markov": "bounds for a binary Markov source",
    "parametric": "restricted tradeoff for a single hidden bit",
    "oracle": "LP ground truth and filter search for small joints",
    "gaussian": "sENSR and its bounds for Gaussian perturbation",
    "verify": "compare the binary closed form against the LP",
    "iid-gap": "memoryless vs restricted curves with fitted lines (writes a directory)",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file; explicit flags take precedence")
    common.add_argument("--out", help="output file (directory for iid-gap); default stdout")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--p", type=float, help="P(X = 1)")
    common.add_argument("--alpha", type=float, help="crossover 0 -> 1")
    common.add_argument("--beta", type=float, help="crossover 1 -> 0")
    common.add_argument("--r", type=float, help="Markov flip probability")
    common.add_argument("--n", type=int, help="vector length")
    common.add_argument("--rho", type=float, help="correlation of X and Y")
    common.add_argument("--rho-m", dest="rho_m", type=float, help="maximal correlation of X and Y")
    common.add_argument("--var-y", dest="var_y", type=float, help="variance of Y")
    common.add_argument("--eps", type=float, help="single (per-symbol) privacy threshold")
    common.add_argument("--eps-grid", dest="eps_grid", help="min:max:count threshold grid")
    common.add_argument("--num-points", dest="num_points", type=int, help="grid size when no grid is given")
    common.add_argument("--resolution", type=int, help="posterior grid resolution for the LP")
    common.add_argument("--budget", type=int, help="random filters per search")
    common.add_argument("--seed", type=int, help="search seed")
    common.add_argument("--joint", help="joint pmf file (.csv with x,y,p or .json)")
    common.add_argument("--strict", action="store_true", default=None,
                        help="fail (exit 3) on points outside the certified regime")
    common.add_argument("--memoryless", action="store_true", default=None,
                        help="vector-iid: per-coordinate filter instead of the restricted optimum")
    common.add_argument("--restricted", action="store_true", default=None,
                        help="oracle: square filters only (search)")
    common.add_argument("--tol", type=float, help="verify: pass threshold on the max difference")
    common.add_argument("--ns", help="iid-gap: comma-separated vector lengths")

    parser = argparse.ArgumentParser(prog="privguess", description="Privacy-constrained guessing tradeoffs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _resolve(args)
        if args.num_points < 1:
            raise ValidationError("--num-points must be at least 1")
        COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"privguess: invalid input: {exc}", file=sys.stderr)
        return 2
    except RegimeError as exc:
        print(f"privguess: outside certified regime: {exc}", file=sys.stderr)
        return 3
    except (CertificateError, AssertionError) as exc:
        print(f"privguess: check failed: {exc}", file=sys.stderr)
        return 1
    except PrivGuessError as exc:
        print(f"privguess: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
