"""Cross-checks of the analytic results against independent constructions.

Each ``check_*`` function returns a :class:`CheckResult` carrying the worst
deviation found and the tolerance it was held to.  :func:`run_all` runs
the full matrix and is what ``obe-steady verify`` reports.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .angular import clebsch_gordan, wigner6j
from .gobe import (
    build_liouvillian,
    broadband_numeric_steady_state,
    field_correlation,
    numeric_steady_state,
    phase_diffusion_ensemble,
    phase_paths,
)
from .operators import (
    coupling_operator,
    expansion_coefficients_closed_form,
    light_shifts,
    raising_operators,
    tensor_operator,
    v_l_operator,
    x_operator,
)
from .polarization import (
    ComplexVector3,
    couple,
    polarization_from_ellipticity,
    spherical_harmonic,
)
from .steadystate import (
    FieldParams,
    TransitionClass,
    TransitionSpec,
    broadband_steady_state,
    classify,
    dark_state_pair,
    dark_subspace,
    ellipticity_scan,
    natural_basis,
    branching_matrix,
    steady_state,
)

EPSILONS = (0.0, math.pi / 16, math.pi / 8, 3 * math.pi / 16, math.pi / 4 - 1e-3)
SATURATIONS = (0.01, 0.3, 1.0, 10.0, 1e3)
DETUNINGS = (-5.0, 0.0, 0.7, 5.0)


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: worst={self.worst:.3g} tol={self.tolerance:.3g} {self.detail}".rstrip()

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "worst": float(self.worst),
            "tolerance": float(self.tolerance),
            "detail": self.detail,
            "seconds": self.seconds,
        }


def _timed(fn: Callable[..., CheckResult]) -> Callable[..., CheckResult]:
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def transitions(max_two_j: int = 8) -> list[TransitionSpec]:
    """All dipole transitions with 2Jg, 2Je <= max_two_j."""
    out = []
    for tg in range(max_two_j + 1):
        for te in (tg - 2, tg, tg + 2):
            if 0 <= te <= max_two_j and (tg, te) != (0, 0):
                out.append(TransitionSpec.of(Fraction(tg, 2), Fraction(te, 2)))
    return out


def _grid(epsilons=EPSILONS, saturations=SATURATIONS, detunings=DETUNINGS):
    for eps in epsilons:
        pol = polarization_from_ellipticity(eps)
        for S, d in itertools.product(saturations, detunings):
            yield eps, pol, FieldParams.from_saturation(S, d)


def _max_block_diff(a, b) -> float:
    return max(
        float(np.abs(a.gg - b.gg).max()),
        float(np.abs(a.ee - b.ee).max()),
        float(np.abs(a.eg - b.eg).max()),
    )


def _dark_operators(spec, pol) -> list[np.ndarray]:
    n, ng = spec.ng + spec.ne, spec.ng
    vecs = dark_subspace(spec, pol)
    out = []
    for a in vecs:
        for b in vecs:
            rho = np.zeros((n, n), dtype=complex)
            rho[:ng, :ng] = np.outer(a, b.conj())
            out.append(rho)
    return out


@_timed
def check_oracle_equivalence(max_two_j: int = 8, tol: float = 1e-8,
                             epsilons=EPSILONS, saturations=SATURATIONS,
                             detunings=DETUNINGS) -> CheckResult:
    """Analytic steady states against the Liouvillian null space.

    For J -> J-1 transitions, where there is no unique steady state, the
    null space must be four-dimensional and annihilate every operator
    acting inside the dark subspace.
    """
    worst, where, count = 0.0, "", 0
    for spec in transitions(max_two_j):
        cls = classify(spec)
        for eps, pol, fld in _grid(epsilons, saturations, detunings):
            liou = build_liouvillian(spec, pol, fld)
            if cls is TransitionClass.A:
                # A four-dimensional null space containing the four dark
                # operators |psi_i><psi_j| is exactly their span.
                s = np.linalg.svd(liou.matrix, compute_uv=False)
                if s[-4] > 1e-12 * s[0] or s[-5] < 1e-9 * s[0]:
                    err = math.inf
                else:
                    err = max(
                        float(np.abs(liou.apply(o)).max()) for o in _dark_operators(spec, pol)
                    )
            else:
                err = _max_block_diff(steady_state(spec, pol, fld).rho, numeric_steady_state(liou))
            count += 1
            if err > worst:
                worst, where = err, f"{spec} eps={eps:.4g} S={fld.saturation:.3g} delta={fld.detuning:g}"
    return CheckResult("oracle equivalence", worst <= tol, worst, tol, f"{count} cases; worst at {where}")


@_timed
def check_dark_states(max_two_j: int = 16, tol: float = 1e-12, overlap_tol: float = 1e-10,
                      epsilons=EPSILONS + (math.pi / 4,)) -> CheckResult:
    """||V psi|| for every dark state and the overlap law of the J -> J-1 pair."""
    worst_res = worst_ov = 0.0
    for tg in range(1, max_two_j + 1):
        specs = [TransitionSpec.of(Fraction(tg, 2), Fraction(tg - 2, 2))] if tg >= 2 else []
        if tg % 2 == 0:
            specs.append(TransitionSpec.of(tg // 2, tg // 2))
        for spec in specs:
            for eps in epsilons:
                pol = polarization_from_ellipticity(eps)
                V = coupling_operator(spec.jg, spec.je, pol)
                for psi in dark_subspace(spec, pol):
                    worst_res = max(worst_res, float(np.linalg.norm(V @ psi)))
                if classify(spec) is TransitionClass.A:
                    p1, p2 = dark_state_pair(spec, pol)
                    x = abs(pol.scalar_square)
                    expect = ((1 - x) / (1 + x)) ** float(spec.J)
                    worst_ov = max(worst_ov, abs(abs(np.vdot(p1, p2)) - expect))
    ok = worst_res <= tol and worst_ov <= overlap_tol
    return CheckResult(
        "dark-state residuals", ok, worst_res, tol,
        f"J <= {max_two_j / 2:g}; worst overlap deviation {worst_ov:.3g} (tol {overlap_tol:g})",
        extra={"overlap": worst_ov},
    )


@_timed
def check_truncation(J: int = 4, epsilons=EPSILONS + (math.pi / 4,),
                     saturations=SATURATIONS) -> CheckResult:
    """Size of the leading expansion coefficient ratio and the one-term X."""
    C = expansion_coefficients_closed_form(J, J + 1)
    ratio = C[2 * J] / C[2 * J - 2]
    formula = (4 * J + 1) * math.sqrt(2 * J / (4 * J - 3))
    worst = 0.0
    for eps in epsilons:
        pol = polarization_from_ellipticity(eps)
        W, _ = raising_operators(J, J + 1, pol, "tensor")
        a1 = float(np.trace(W @ W.conj().T).real)
        a0 = float(np.sum(np.abs(x_operator(J, pol)) ** 2))
        a0t = float(np.sum(np.abs(x_operator(J, pol, ranks=[2 * J])) ** 2))
        for S in saturations:
            p = S * a1 / a0 / (1 + 2 * S * a1 / a0)
            pt = S * a1 / a0t / (1 + 2 * S * a1 / a0t)
            worst = max(worst, abs(pt - p) / p)
    ok = abs(ratio - 13.3) <= 0.1 and abs(ratio - formula) <= 1e-12 * formula and worst < 0.01
    return CheckResult(
        "leading coefficient and truncation", ok, worst, 0.01,
        f"C_{2 * J}/C_{2 * J - 2} = {ratio:.4f}",
        extra={"ratio": ratio},
    )


@_timed
def check_isotropy(two_js=(1, 3, 5, 7, 9), tol: float = 1e-10) -> CheckResult:
    """Excited-state density matrix of J -> J (half-integer) is a multiple of 1."""
    worst = 0.0
    for tJ in two_js:
        spec = TransitionSpec.of(Fraction(tJ, 2), Fraction(tJ, 2))
        for _, pol, fld in _grid():
            ee = steady_state(spec, pol, fld).rho.ee
            d = np.diag(ee).real
            off = ee - np.diag(np.diag(ee))
            worst = max(worst, float(np.abs(off).max()), float(d.max() - d.min()))
    return CheckResult("excited-state isotropy", worst <= tol, worst, tol)


@_timed
def check_commutation(max_two_j: int = 8, tol: float = 1e-10) -> CheckResult:
    """Steady blocks commute with the light-shift operators."""
    worst, where = 0.0, ""
    for spec in transitions(max_two_j):
        if classify(spec) is TransitionClass.A:
            continue
        for eps, pol, fld in _grid():
            rho = steady_state(spec, pol, fld).rho
            V = coupling_operator(spec.jg, spec.je, pol)
            Eg, Ee = light_shifts(V, fld.detuning, fld.saturation)
            err = max(
                float(np.abs(rho.gg @ Eg - Eg @ rho.gg).max()),
                float(np.abs(rho.ee @ Ee - Ee @ rho.ee).max()),
            )
            if err > worst:
                worst, where = err, f"{spec} eps={eps:.4g}"
    return CheckResult("light-shift commutation", worst <= tol, worst, tol, where)


@_timed
def check_two_level(tol: float = 1e-12) -> CheckResult:
    """0 -> 1 transition reduces to the two-level atom for every polarization."""
    spec = TransitionSpec.of(0, 1)
    worst = 0.0
    for _, pol, fld in _grid(epsilons=EPSILONS + (math.pi / 4,)):
        S = fld.saturation
        pe = steady_state(spec, pol, fld).excited_population
        worst = max(worst, abs(pe - S / (1 + 2 * S)))
    return CheckResult("two-level limit", worst <= tol, worst, tol)


@_timed
def check_absorption_curves(n_points: int = 41, tol: float = 1e-10) -> CheckResult:
    """Low-saturation absorption versus ellipticity: bounds, monotonicity, ordering."""
    eps = np.linspace(0.0, math.pi / 4, n_points)
    slack = 1e-12
    problems = []

    def curve(jg, je):
        rows = ellipticity_scan(TransitionSpec.of(jg, je), eps, 1e-6)
        neg = ellipticity_scan(TransitionSpec.of(jg, je), -eps, 1e-6)
        a = np.array([r["pi_e_normalized"] for r in rows])
        b = np.array([r["pi_e_normalized"] for r in neg])
        if np.abs(a - b).max() > slack:
            problems.append(f"{jg}->{je} not even in epsilon")
        return a

    half = [Fraction(k, 2) for k in (1, 3, 5, 7, 9)]
    c_curves = [curve(J, J) for J in half]
    for J, a in zip(half, c_curves):
        if a.max() > 1 + slack:
            problems.append(f"class c J={J} exceeds 1")
        if np.any(np.diff(a) > slack):
            problems.append(f"class c J={J} not decreasing")
    for lo, hi in zip(c_curves, c_curves[1:]):
        if np.any(hi > lo + slack):
            problems.append("class c not ordered in J")
    circ = max(abs(a[-1]) for a in c_curves)
    if circ > tol:
        problems.append(f"class c at circular {circ:.3g}")

    d_js = [Fraction(k, 2) for k in range(0, 9)]
    d_curves = [curve(J, J + 1) for J in d_js]
    for J, a in zip(d_js, d_curves):
        if a.min() < 1 - slack:
            problems.append(f"class d J={J} below 1")
        if np.any(np.diff(a) < -slack):
            problems.append(f"class d J={J} not increasing")
    for lo, hi in zip(d_curves, d_curves[1:]):
        if np.any(hi < lo - slack):
            problems.append("class d not ordered in J")
    return CheckResult(
        "absorption versus ellipticity", not problems, circ, tol, "; ".join(problems)
    )


@_timed
def check_broadband(realizations: int = 400, seed: int = 0, n_sigma: float = 3.0,
                    tol: float = 1e-10) -> CheckResult:
    """Zero-bandwidth limit, averaged equations and the Monte-Carlo ensemble."""
    problems = []
    worst_det = 0.0
    for spec in (TransitionSpec.of(0, 1), TransitionSpec.of(0.5, 0.5), TransitionSpec.of(1, 2),
                 TransitionSpec.of(1.5, 1.5)):
        for _, pol, fld in _grid(epsilons=EPSILONS[:4], detunings=(0.0, 0.7)):
            mono = steady_state(spec, pol, fld).rho
            bb = broadband_steady_state(spec, pol, fld)
            gg, ee = broadband_numeric_steady_state(spec, pol, fld, 0.0)
            worst_det = max(worst_det, float(np.abs(bb.gg - mono.gg).max()),
                            float(np.abs(bb.ee - mono.ee).max()),
                            float(np.abs(gg - mono.gg).max()), float(np.abs(ee - mono.ee).max()))
            wide = FieldParams(fld.rabi, fld.detuning, fld.gamma, bandwidth=1.0)
            bb = broadband_steady_state(spec, pol, wide)
            gg, ee = broadband_numeric_steady_state(spec, pol, wide)
            worst_det = max(worst_det, float(np.abs(bb.gg - gg).max()), float(np.abs(bb.ee - ee).max()))
    if worst_det > tol:
        problems.append(f"averaged equations differ by {worst_det:.3g}")

    worst_z = 0.0
    pol = polarization_from_ellipticity(0.3)
    for spec in (TransitionSpec.of(0, 1), TransitionSpec.of(0.5, 0.5)):
        fld = FieldParams(0.5, 0.0, 1.0, bandwidth=1.0)
        bb = broadband_steady_state(spec, pol, fld)
        mc = phase_diffusion_ensemble(spec, pol, fld, 1.0, realizations=realizations, seed=seed)
        z = abs(mc.excited_population - bb.excited_population) / mc.excited_population_stderr
        zc = np.abs(mc.current - bb.current) / np.maximum(mc.current_stderr, 1e-12)
        worst_z = max(worst_z, z, float(zc.max()))
    rng = np.random.default_rng(seed)
    dt, mu = 0.01, 1.0
    paths = phase_paths(4000, 300, dt, mu, rng)
    lags = np.array([0.0, 0.5, 1.0, 2.0, 3.0])
    mean, err = field_correlation(paths, dt, lags)
    zf = np.abs(mean.real - np.exp(-mu * lags)) / np.maximum(err, 1e-12)
    worst_z = max(worst_z, float(zf.max()))
    if worst_z > n_sigma:
        problems.append(f"Monte-Carlo deviation {worst_z:.2f} sigma")
    return CheckResult(
        "broadband", not problems, worst_z, n_sigma,
        f"deterministic worst {worst_det:.3g}; " + "; ".join(problems),
        extra={"deterministic": worst_det},
    )


def _random_vector(rng) -> ComplexVector3:
    return ComplexVector3(tuple(rng.normal(size=3) + 1j * rng.normal(size=3)))


def _contract(s, T: np.ndarray) -> np.ndarray:
    # (s . T) = sum_M (-1)**M s_M T_{-M}, both stacked over M descending
    K = s.two_rank // 2
    signs = np.array([(-1) ** (M % 2) for M in range(K, -K - 1, -1)])
    return np.einsum("k,kij->ij", signs * s.comps, T[::-1])


def _product_expansion(Ja, Jb, Jc, L1, L2, a, b) -> np.ndarray:
    out = 0
    phase = (-1) ** int(round(float(Ja) + float(Jc) + L1 + L2))
    for K in range(abs(L1 - L2), L1 + L2 + 1):
        sixj = wigner6j(K, L1, L2, Jb, Jc, Ja)
        if sixj == 0:
            continue
        s = couple(spherical_harmonic(a, L1), spherical_harmonic(b, L2), K)
        out = out + phase * math.sqrt((2 * L1 + 1) * (2 * L2 + 1)) * sixj * _contract(s, tensor_operator(Ja, Jc, K))
    return out


def _momenta(max_two: int = 5):
    return [Fraction(t, 2) for t in range(max_two + 1)]


def _ranks(Ja, Jb, max_rank: int = 3):
    lo = abs(Fraction(Ja) - Fraction(Jb))
    hi = Fraction(Ja) + Fraction(Jb)
    return [L for L in range(0, max_rank + 1) if lo <= L <= hi and (L - lo).denominator == 1]


@_timed
def check_operator_identities(samples: int = 20, seed: int = 7, tol: float = 1e-10,
                              max_two_j: int = 5) -> CheckResult:
    """Product rules of the rank-L coupling operators at random complex vectors."""
    rng = np.random.default_rng(seed)
    J_all = _momenta(max_two_j)
    worst: dict[str, float] = {}

    def record(name, lhs, rhs):
        worst[name] = max(worst.get(name, 0.0), float(np.abs(lhs - rhs).max()))

    triples = [
        (Ja, Jb, Jc)
        for Ja, Jb, Jc in itertools.product(J_all, repeat=3)
        if (Ja - Jb).denominator == 1 and (Jb - Jc).denominator == 1
        and _ranks(Ja, Jb) and _ranks(Jb, Jc)
    ]
    pairs = [(Ja, Jb) for Ja, Jb in itertools.product(J_all, repeat=2)
             if (Ja - Jb).denominator == 1 and len(_ranks(Ja, Jb)) >= 1]
    for _ in range(samples):
        a, b = _random_vector(rng), _random_vector(rng)
        Ja, Jb, Jc = triples[rng.integers(len(triples))]
        L1 = int(rng.choice(_ranks(Ja, Jb)))
        L2 = int(rng.choice(_ranks(Jb, Jc)))
        lhs = v_l_operator(Ja, Jb, L1, a) @ v_l_operator(Jb, Jc, L2, b)
        record("product expansion", lhs, _product_expansion(Ja, Jb, Jc, L1, L2, a, b))

        Ja, Jb, Jc = triples[rng.integers(len(triples))]
        L1 = int(rng.choice(_ranks(Ja, Jb)))
        L2 = int(rng.choice(_ranks(Jb, Jc)))
        lhs = v_l_operator(Ja, Jb, L1, a) @ v_l_operator(Jb, Jc, L2, a)
        rhs = 0
        phase = (-1) ** int(round(float(Ja) + float(Jc) + L1 + L2))
        for K in _ranks(Ja, Jc, L1 + L2):
            coef = phase * math.sqrt((2 * L1 + 1) * (2 * L2 + 1)) * clebsch_gordan(L1, 0, L2, 0, K, 0)
            coef *= wigner6j(K, L1, L2, Jb, Jc, Ja)
            if coef:
                rhs = rhs + coef * v_l_operator(Ja, Jc, K, a)
        record("coincident expansion", lhs, rhs)

        Ja, Jb = pairs[rng.integers(len(pairs))]
        L1, L2 = (int(v) for v in rng.choice(_ranks(Ja, Jb), size=2))
        record(
            "rank symmetry",
            v_l_operator(Ja, Jb, L1, a) @ v_l_operator(Jb, Ja, L2, a),
            v_l_operator(Ja, Jb, L2, a) @ v_l_operator(Jb, Ja, L1, a),
        )

        J = J_all[1:][rng.integers(len(J_all) - 1)]
        record(
            "J -> J identity",
            v_l_operator(J, J, 1, b) @ v_l_operator(J, J, 0, a),
            v_l_operator(J, J, 0, a) @ v_l_operator(J, J, 1, b),
        )
        J = J_all[: max_two_j - 1][rng.integers(max_two_j - 1)]
        Je = J + 1
        L = int(2 * J + 1)
        record(
            "J -> J+1 identity",
            v_l_operator(J, Je, 1, a) @ v_l_operator(Je, J, L, b),
            v_l_operator(J, Je, L, b) @ v_l_operator(Je, J, 1, a),
        )
        J = J_all[2:][rng.integers(len(J_all) - 2)]
        Je = J - 1
        L = int(2 * J - 1)
        record(
            "J -> J-1 identity",
            v_l_operator(Je, J, 1, a) @ v_l_operator(J, Je, L, b),
            v_l_operator(Je, J, L, b) @ v_l_operator(J, Je, 1, a),
        )
    w = max(worst.values())
    failing = [k for k, v in worst.items() if v > tol]
    return CheckResult(
        "operator product identities", not failing, w, tol,
        "; ".join(f"{k} {v:.2g}" for k, v in worst.items()),
        extra=worst,
    )


@_timed
def check_stationarity(max_two_j: int = 8, tol: float = 1e-10) -> CheckResult:
    """Excited natural populations are a fixed point of the branching matrix."""
    worst, where = 0.0, ""
    for spec in transitions(max_two_j):
        if classify(spec) not in (TransitionClass.C, TransitionClass.D):
            continue
        for eps, pol, fld in _grid():
            basis = natural_basis(spec, pol)
            Wb = branching_matrix(spec, pol, basis)
            ee = steady_state(spec, pol, fld).rho.ee
            pe = np.einsum("ij,ik,kj->j", basis.excited.conj(), ee, basis.excited).real
            ng = spec.ng
            err = max(float(np.abs(Wb @ pe - pe[:ng]).max()),
                      float(np.abs(pe[ng:]).max()) if spec.ne > ng else 0.0,
                      float(np.abs(Wb.sum(axis=0) - 1).max()))
            if err > worst:
                worst, where = err, f"{spec} eps={eps:.4g}"
    return CheckResult("branching stationarity", worst <= tol, worst, tol, where)


CHECKS = (
    check_oracle_equivalence,
    check_dark_states,
    check_truncation,
    check_isotropy,
    check_commutation,
    check_two_level,
    check_absorption_curves,
    check_broadband,
    check_operator_identities,
    check_stationarity,
)


def run_all(quick: bool = False, max_two_j: Optional[int] = None) -> list[CheckResult]:
    """Run every check.  ``quick`` trims the grids and ensemble sizes."""
    out = []
    for check in CHECKS:
        kwargs = {}
        if check is check_oracle_equivalence:
            if quick:
                kwargs = dict(max_two_j=4, saturations=(0.3, 10.0), detunings=(0.0, 0.7))
            elif max_two_j is not None:
                kwargs = dict(max_two_j=max_two_j)
        elif check is check_broadband and quick:
            kwargs = dict(realizations=100)
        elif check in (check_commutation, check_stationarity) and max_two_j is not None:
            kwargs = dict(max_two_j=max_two_j)
        out.append(check(**kwargs))
    return out
