"""Command line interface: ``obe-steady {steady,scan,dark,verify,broadband}``.

Frequencies are in units of gamma.  Angular momenta may be given as
fractions (``3/2``) or decimals (``1.5``).  Ellipticities accept ``pi``
expressions (``pi/8``), comma lists and ``start:stop:count`` grids.

Exit codes: 0 success, 1 failed verification, 2 non-unique steady state
(J -> J-1 without ``--initial``), 64 bad arguments, 65 dark-state
exception or non-converged integration.
"""
from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import math
import operator
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .angular import as_two
from .errors import ConvergenceError, DarkStateError, NoDarkStateError, NonUniqueSteadyStateError
from .polarization import Frame, polarization_from_ellipticity
from .steadystate import (
    FieldParams,
    TransitionClass,
    TransitionSpec,
    broadband_map,
    broadband_steady_state,
    classify,
    dark_subspace,
    ellipticity_scan,
    natural_basis,
    steady_state,
)

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_FAILED = 1
EXIT_NON_UNIQUE = 2
EXIT_USAGE = 64
EXIT_NUMERIC = 65


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- argument parsing -------------------------------------------------------

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


def _eval_number(node):
    if isinstance(node, ast.Expression):
        return _eval_number(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_number(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval_number(node.left), _eval_number(node.right))
    raise ValueError("unsupported expression")


def parse_number(text: str) -> float:
    """A real number, optionally an arithmetic expression in ``pi``."""
    try:
        value = _eval_number(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"cannot parse number {text!r}") from exc
    if not math.isfinite(value):
        raise UsageError(f"number {text!r} is not finite")
    return value


def parse_grid(text: str) -> list[float]:
    """``a``, ``a,b,c`` or ``start:stop:count`` (inclusive, count >= 1)."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid {text!r} must be start:stop:count")
        start, stop = parse_number(parts[0]), parse_number(parts[1])
        try:
            count = int(parts[2])
        except ValueError as exc:
            raise UsageError(f"grid count {parts[2]!r} is not an integer") from exc
        if count < 1:
            raise UsageError("grid count must be positive")
        if count == 1:
            return [start]
        return [start + (stop - start) * k / (count - 1) for k in range(count)]
    return [parse_number(p) for p in text.split(",") if p.strip()]


def parse_momentum(text: str) -> Fraction:
    try:
        value = Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"cannot parse angular momentum {text!r}") from exc
    if value < 0 or (2 * value).denominator != 1:
        raise UsageError(f"angular momentum {text!r} must be a non-negative multiple of 1/2")
    return value


def _spec(args) -> TransitionSpec:
    try:
        return TransitionSpec.of(parse_momentum(args.jg), parse_momentum(args.je))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _single(text: str, name: str) -> float:
    values = parse_grid(text)
    if len(values) != 1:
        raise UsageError(f"--{name} takes a single value here")
    return values[0]


def _polarization(epsilon: float, frame: str):
    try:
        return polarization_from_ellipticity(epsilon, Frame(frame))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _field(args, bandwidth: float = 0.0) -> FieldParams:
    detuning = _single(args.detuning, "detuning")
    if args.rabi is not None:
        if args.saturation is not None:
            raise UsageError("give either --rabi or --saturation, not both")
        amp = _single(args.rabi, "rabi")
        phase = _single(args.phase, "phase")
        return FieldParams(amp * complex(math.cos(phase), math.sin(phase)), detuning, 1.0, bandwidth)
    S = _single(args.saturation if args.saturation is not None else "1", "saturation")
    if S < 0:
        raise UsageError("saturation must be non-negative")
    return FieldParams.from_saturation(S, detuning, 1.0, bandwidth, _single(args.phase, "phase"))


def _threads() -> int:
    env = os.environ.get("OBE_STEADY_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"OBE_STEADY_THREADS={env!r} is not an integer")
    return os.cpu_count() or 1


# -- serialization ----------------------------------------------------------


def _matrix(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"real": m.real.tolist(), "imag": m.imag.tolist()}


def _num(x):
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _label(j) -> str:
    return str(Fraction(j))


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(doc: dict) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, **doc}, indent=2, allow_nan=False) + "\n"


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def _csv(header: Sequence[str], rows, comment: str) -> str:
    buf = io.StringIO()
    buf.write(f"# {comment} schema_version={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _blocks_csv(blocks: dict, scalars: dict, comment: str) -> str:
    rows = []
    for name, value in scalars.items():
        if value is None:
            continue
        rows.append([name, "", "", _num(value), 0.0])
    for name, m in blocks.items():
        m = np.asarray(m, dtype=complex)
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                rows.append([name, str(i), str(j), m[i, j].real, m[i, j].imag])
    return _csv(["quantity", "row", "col", "real", "imag"], rows, comment)


def _header(spec: TransitionSpec, pol, fld: Optional[FieldParams]) -> dict:
    doc = {
        "transition": {
            "jg": _label(spec.jg.value),
            "je": _label(spec.je.value),
            "class": classify(spec).value,
            "zeeman_order": "descending",
        },
        "polarization": {
            "epsilon": pol.epsilon,
            "frame": pol.frame.value,
            "components": _matrix(np.asarray(pol.vector.comps)[None, :]),
            "e_dot_e": pol.scalar_square,
        },
    }
    if fld is not None:
        doc["field"] = {
            "saturation": fld.saturation,
            "detuning": fld.detuning,
            "gamma": fld.gamma,
            "bandwidth": fld.bandwidth,
            "rabi": {"real": fld.rabi.real, "imag": fld.rabi.imag},
        }
    return doc


# -- commands ---------------------------------------------------------------


def _integrate_dark(spec, pol, fld, initial: str, seed: int):
    from .gobe import (
        IntegratorConfig,
        build_liouvillian,
        integrate,
        isotropic_ground_state,
        random_density_matrix,
    )

    if initial == "isotropic":
        rho0 = isotropic_ground_state(spec)
    elif initial == "random":
        rho0 = random_density_matrix(spec, np.random.default_rng(seed))
    else:
        raise UsageError(f"unknown initial state {initial!r}")
    liou = build_liouvillian(spec, pol, fld)
    S = fld.saturation
    t_end = 50.0 / min(1.0, S) if S > 0 else 50.0
    for _ in range(6):
        traj = integrate(liou, rho0, IntegratorConfig(t_end=t_end, records=10))
        if traj.converged:
            return traj
        t_end *= 4
    raise ConvergenceError(f"no steady state after t = {t_end / 4:g}/gamma (residual {traj.residual:.3g})")


def cmd_steady(args) -> int:
    spec = _spec(args)
    pol = _polarization(_single(args.epsilon, "epsilon"), args.frame)
    fld = _field(args)
    cls = classify(spec)
    doc = _header(spec, pol, fld)
    basis = natural_basis(spec, pol)
    doc["lambda_squared"] = basis.lambda_squared.tolist()
    doc["nu_squared"] = None if basis.nu_squared is None else basis.nu_squared.tolist()
    dark_dim = {TransitionClass.A: 2, TransitionClass.B: 1}.get(cls, 0)
    if cls is TransitionClass.A:
        if args.initial is None:
            err = NonUniqueSteadyStateError(f"{spec} has a two-dimensional dark subspace", 4)
            doc.update({"status": "non-unique", "error": str(err), "dark_dimension": dark_dim})
            _emit(_json(doc), args.out)
            return EXIT_NON_UNIQUE
        traj = _integrate_dark(spec, pol, fld, args.initial, args.seed)
        rho = traj.final
        doc.update({"status": "integrated", "initial": args.initial, "residual": traj.residual})
        alpha0 = alpha1 = beta = None
        norm = None
    else:
        res = steady_state(spec, pol, fld)
        rho = res.rho
        alpha0, alpha1, beta, norm = res.alpha0, res.alpha1, res.beta, res.alpha_normalization
        doc["status"] = "analytic"
    doc.update(
        {
            "dark_dimension": dark_dim,
            "alpha0": _num(alpha0),
            "alpha1": _num(alpha1),
            "beta": _num(beta),
            "alpha_normalization": norm,
            "pi_e": float(rho.excited_population),
            "rho_gg": _matrix(rho.gg),
            "rho_ee": _matrix(rho.ee),
            "rho_eg": _matrix(rho.eg),
        }
    )
    if args.format == "csv":
        scalars = {k: doc[k] for k in ("pi_e", "alpha0", "alpha1", "beta")}
        scalars["dark_dimension"] = dark_dim
        blocks = {"rho_gg": rho.gg, "rho_ee": rho.ee, "rho_eg": rho.eg}
        _emit(_blocks_csv(blocks, scalars, f"obe-steady steady {spec}"), args.out)
    else:
        _emit(_json(doc), args.out)
    return EXIT_OK


SCAN_COLUMNS = ("epsilon", "alpha_ratio", "pi_e", "pi_e_normalized", "isat_ratio")


def scan_rows(spec: TransitionSpec, epsilons, saturations, frame: Frame = Frame.NATURAL_PLUS,
              threads: int = 1) -> list[list]:
    """Rows for the ellipticity scan, in the order (saturation, epsilon)."""
    for eps in epsilons:
        if abs(eps) > math.pi / 4 + 1e-15:
            raise UsageError(f"ellipticity {eps!r} outside [-pi/4, pi/4]")
    jobs = [(S, eps) for S in saturations for eps in epsilons]

    def row(job):
        S, eps = job
        r = ellipticity_scan(spec, [eps], S, frame)[0]
        return [S] + [r[c] for c in SCAN_COLUMNS]

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(row, jobs))
    return [row(j) for j in jobs]


def cmd_scan(args) -> int:
    spec = _spec(args)
    if classify(spec).has_dark_state:
        raise UsageError(f"{spec} has dark states; scan needs a J -> J+1 or half-integer J -> J transition")
    epsilons = parse_grid(args.epsilon)
    sats = parse_grid(args.saturation if args.saturation is not None else "1e-3")
    if any(S < 0 for S in sats):
        raise UsageError("saturation must be non-negative")
    rows = scan_rows(spec, epsilons, sats, Frame(args.frame), _threads())
    columns = ["saturation", *SCAN_COLUMNS]
    if len(sats) == 1:
        columns, rows = columns[1:], [r[1:] for r in rows]
    if args.format == "json":
        doc = {
            "transition": {"jg": _label(spec.jg.value), "je": _label(spec.je.value),
                           "class": classify(spec).value},
            "columns": columns,
            "rows": [[_num(v) for v in r] for r in rows],
        }
        _emit(_json(doc), args.out)
    else:
        _emit(_csv(columns, rows, f"obe-steady scan {spec}"), args.out)
    return EXIT_OK


def cmd_dark(args) -> int:
    from .operators import coupling_operator

    spec = _spec(args)
    pol = _polarization(_single(args.epsilon, "epsilon"), args.frame)
    try:
        states = dark_subspace(spec, pol)
    except NoDarkStateError:
        states = []
    V = coupling_operator(spec.jg, spec.je, pol)
    residuals = [float(np.linalg.norm(V @ s)) for s in states]
    doc = _header(spec, pol, None)
    doc.update(
        {
            "dark_dimension": len(states),
            "states": [_matrix(np.asarray(s)[None, :]) for s in states],
            "residuals": residuals,
        }
    )
    if args.format == "csv":
        blocks = {f"state_{k}": np.asarray(s)[:, None] for k, s in enumerate(states)}
        _emit(_blocks_csv(blocks, {"dark_dimension": len(states)}, f"obe-steady dark {spec}"), args.out)
    else:
        _emit(_json(doc), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from . import verification

    max_two = None if args.max_j is None else as_two(parse_momentum(args.max_j))
    results = verification.run_all(quick=args.quick, max_two_j=max_two)
    ok = all(r.passed for r in results)
    for r in results:
        print(r.line(), file=sys.stderr if args.format == "json" else sys.stdout)
    if args.format == "json" or args.out:
        doc = {"passed": ok, "checks": [r.as_dict() for r in results]}
        _emit(_json(doc), args.out if args.out else None)
    return EXIT_OK if ok else EXIT_FAILED


def cmd_broadband(args) -> int:
    spec = _spec(args)
    pol = _polarization(_single(args.epsilon, "epsilon"), args.frame)
    mu = _single(args.bandwidth, "bandwidth")
    if mu < 0:
        raise UsageError("bandwidth must be non-negative")
    fld = _field(args, mu)
    R, L = broadband_map(fld)
    res = broadband_steady_state(spec, pol, fld)
    doc = _header(spec, pol, fld)
    doc.update(
        {
            "R": R,
            "L": L,
            "effective_saturation": res.effective_saturation,
            "pi_e": res.excited_population,
            "rho_gg": _matrix(res.gg),
            "rho_ee": _matrix(res.ee),
            "field_coherence": _matrix(res.current),
        }
    )
    if args.realizations:
        from .gobe import phase_diffusion_ensemble

        if mu <= 0:
            raise UsageError("--realizations needs a positive --bandwidth")
        try:
            mc = phase_diffusion_ensemble(spec, pol, fld, mu, realizations=args.realizations, seed=args.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        doc["monte_carlo"] = {
            "realizations": args.realizations,
            "seed": args.seed,
            "pi_e": mc.excited_population,
            "pi_e_stderr": mc.excited_population_stderr,
            "field_coherence": _matrix(mc.current),
            "field_coherence_stderr": _matrix(mc.current_stderr),
        }
    if args.format == "csv":
        scalars = {"R": R, "L": L, "effective_saturation": res.effective_saturation,
                   "pi_e": res.excited_population}
        blocks = {"rho_gg": res.gg, "rho_ee": res.ee, "field_coherence": res.current}
        _emit(_blocks_csv(blocks, scalars, f"obe-steady broadband {spec}"), args.out)
    else:
        _emit(_json(doc), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="obe-steady", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, epsilon_default="0", fmt_default="json"):
        p.add_argument("--jg", required=True, help="ground angular momentum, e.g. 3/2")
        p.add_argument("--je", required=True, help="excited angular momentum")
        p.add_argument("--epsilon", default=epsilon_default, help="ellipticity (radians; pi allowed)")
        p.add_argument("--frame", default=Frame.NATURAL_PLUS.value, choices=[f.value for f in Frame])
        p.add_argument("--format", default=fmt_default, choices=["json", "csv"])
        p.add_argument("--out", help="write to this file instead of stdout")

    def field_args(p):
        p.add_argument("--saturation", help="saturation parameter S (default 1)")
        p.add_argument("--rabi", help="Rabi frequency magnitude in units of gamma (instead of S)")
        p.add_argument("--phase", default="0", help="Rabi frequency phase")
        p.add_argument("--detuning", default="0", help="detuning in units of gamma")

    p = sub.add_parser("steady", help="steady-state density matrix")
    common(p)
    field_args(p)
    p.add_argument("--initial", choices=["isotropic", "random"],
                   help="initial state for J -> J-1 transitions (integrated numerically)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("scan", help="absorption versus ellipticity")
    common(p, epsilon_default="0:pi/4:33", fmt_default="csv")
    p.add_argument("--saturation", help="saturation parameter(s) (default 1e-3)")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("dark", help="dark ground states")
    common(p)
    p.set_defaults(func=cmd_dark)

    p = sub.add_parser("verify", help="run the verification checks")
    p.add_argument("--quick", action="store_true", help="smaller grids and ensembles")
    p.add_argument("--max-j", help="largest angular momentum in the transition sweeps")
    p.add_argument("--format", default="text", choices=["text", "json"])
    p.add_argument("--out", help="write the JSON report to this file")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("broadband", help="steady state under phase-diffusion broadening")
    common(p)
    field_args(p)
    p.add_argument("--bandwidth", default="0", help="laser bandwidth mu in units of gamma")
    p.add_argument("--realizations", type=int, default=0, help="also run a Monte-Carlo ensemble")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_broadband)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"obe-steady: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DarkStateError as exc:
        print(str(exc), file=sys.stderr)
        print(json.dumps({"schema_version": SCHEMA_VERSION, "status": "dark-exception", "error": str(exc)}))
        return EXIT_NUMERIC
    except ConvergenceError as exc:
        print(f"obe-steady: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
