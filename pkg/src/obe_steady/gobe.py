"""Numerical oracle: the optical Bloch equations as an explicit Liouvillian.

The density matrix is ordered with ground states first and excited states
second, each block in Zeeman order +J..-J, and vectorized row-major so
that ``vec(A rho B) = kron(A, B.T) vec(rho)``.  In the frame rotating with
the field the generator reads

    d rho/dt = -i[H, rho] + gamma sum_q (A_q rho A_q^+ - {A_q^+ A_q, rho}/2)

with ``H = -delta Pi_e - Omega V - Omega* V^+`` and ``A_q = D_q^+``, which
reproduces the four block equations for rho_eg, rho_ge, rho_ee and rho_gg.

Steady states come from the null space of the Liouvillian.  When the
double precision problem is badly conditioned (slow optical pumping near
circular polarization) the solve is repeated in ball arithmetic with
python-flint.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .angular import clebsch_gordan_exact, projections
from .errors import ConvergenceError, NonUniqueSteadyStateError
from .operators import coupling_operator, dipole_components
from .polarization import ComplexVector3, Polarization
from .steadystate import DensityMatrix, FieldParams, TransitionSpec, broadband_map

__all__ = [
    "Liouvillian",
    "build_liouvillian",
    "gobe_rhs",
    "null_space_dimension",
    "numeric_steady_state",
    "IntegratorConfig",
    "Trajectory",
    "integrate",
    "isotropic_ground_state",
    "random_density_matrix",
    "broadband_generator",
    "broadband_numeric_steady_state",
    "EnsembleResult",
    "phase_diffusion_ensemble",
    "phase_paths",
    "field_correlation",
]

# Reciprocal condition number below which the high-precision path is used.
RCOND_SWITCH = 1e-7


def _vector(pol) -> ComplexVector3:
    if isinstance(pol, Polarization):
        return pol.vector
    if isinstance(pol, ComplexVector3):
        return pol
    return ComplexVector3(pol)


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Superoperator matrix together with the inputs it was built from."""

    spec: TransitionSpec
    vector: ComplexVector3
    field: FieldParams
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.spec.ng + self.spec.ne

    def apply(self, rho: np.ndarray) -> np.ndarray:
        n = self.n
        return (self.matrix @ rho.reshape(n * n)).reshape(n, n)


def _embedded(spec: TransitionSpec, pol):
    ng, ne = spec.ng, spec.ne
    n = ng + ne
    V = np.zeros((n, n), dtype=complex)
    V[ng:, :ng] = coupling_operator(spec.jg, spec.je, pol)
    jumps = []
    for q, d in dipole_components(spec.jg, spec.je).items():
        A = np.zeros((n, n))
        A[:ng, ng:] = d.T
        jumps.append(A)
    Pe = np.diag([0.0] * ng + [1.0] * ne)
    return V, jumps, Pe


def build_liouvillian(spec: TransitionSpec, pol, field: FieldParams) -> Liouvillian:
    """Superoperator of the optical Bloch equations for a monochromatic field."""
    vec = _vector(pol)
    V, jumps, Pe = _embedded(spec, vec)
    n = spec.ng + spec.ne
    eye = np.eye(n)
    g = field.gamma
    H = -field.detuning * Pe - field.rabi * V - np.conj(field.rabi) * V.conj().T
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for A in jumps:
        L += g * np.kron(A, A.conj())
    L -= g / 2 * (np.kron(Pe, eye) + np.kron(eye, Pe))
    return Liouvillian(spec, vec, field, L)


def gobe_rhs(spec: TransitionSpec, pol, field: FieldParams, rho: DensityMatrix) -> DensityMatrix:
    """Time derivatives of the four blocks, written block by block."""
    V = coupling_operator(spec.jg, spec.je, pol)
    Vh = V.conj().T
    D = dipole_components(spec.jg, spec.je)
    g, d, om = field.gamma, field.detuning, field.rabi
    gg, ee, eg, ge = rho.gg, rho.ee, rho.eg, rho.ge
    d_eg = -(g / 2 - 1j * d) * eg + 1j * om * (V @ gg - ee @ V)
    d_ee = -g * ee + 1j * (om * V @ ge - np.conj(om) * eg @ Vh)
    d_gg = g * sum(D[q].T @ ee @ D[q] for q in D) + 1j * (np.conj(om) * Vh @ eg - om * ge @ V)
    return DensityMatrix(d_gg, d_ee, d_eg)


def null_space_dimension(liou: Liouvillian, rtol: float = 1e-9) -> int:
    """Number of singular values below ``rtol`` times the largest one."""
    s = np.linalg.svd(liou.matrix, compute_uv=False)
    return int(np.sum(s < rtol * s[0]))


def _trace_system(matrix: np.ndarray, n: int):
    A = matrix.copy()
    A[0, :] = 0.0
    A[0, [i * n + i for i in range(n)]] = 1.0
    b = np.zeros(n * n, dtype=complex)
    b[0] = 1.0
    return A, b


def _finish(x: np.ndarray, spec: TransitionSpec) -> DensityMatrix:
    n = spec.ng + spec.ne
    rho = x.reshape(n, n)
    rho = (rho + rho.conj().T) / 2
    rho /= np.trace(rho).real
    return DensityMatrix.from_full(rho, spec.ng)


def numeric_steady_state(
    liou: Liouvillian, precision: str = "auto", bits: int = 256
) -> DensityMatrix:
    """Null vector of the Liouvillian, normalized to unit trace.

    ``precision``: ``"double"``, ``"high"`` or ``"auto"`` (high precision
    when the double precision reciprocal condition number of the
    trace-constrained system is below ``RCOND_SWITCH``).

    Raises ``NonUniqueSteadyStateError`` if the null space is degenerate.
    """
    n = liou.n
    A, b = _trace_system(liou.matrix, n)
    if precision != "high":
        with warnings.catch_warnings():
            # singularity is detected through rcond below
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
        anorm = np.abs(A).sum(axis=0).max()
        rcond = scipy.linalg.lapack.zgecon(lu, anorm)[0]
        if precision == "double" or rcond >= RCOND_SWITCH:
            if rcond < 1e-15:
                raise NonUniqueSteadyStateError(
                    "Liouvillian null space is degenerate", null_space_dimension(liou)
                )
            return _finish(scipy.linalg.lu_solve((lu, piv), b), liou.spec)
    return _finish(_high_precision_solve(liou, bits), liou.spec)


def _high_precision_solve(liou: Liouvillian, bits: int) -> np.ndarray:
    import flint

    old = flint.ctx.prec
    try:
        for prec in (bits, 2 * bits):
            flint.ctx.prec = prec
            M, rhs = _flint_system(liou, flint)
            try:
                x = M.solve(rhs, algorithm="lu")
            except ZeroDivisionError:
                continue
            return np.array(
                [complex(float(x[i, 0].real.mid()), float(x[i, 0].imag.mid())) for i in range(x.nrows())]
            )
    finally:
        flint.ctx.prec = old
    raise NonUniqueSteadyStateError("Liouvillian is singular in high precision")


def _flint_system(liou: Liouvillian, flint):
    spec, fld = liou.spec, liou.field
    acb, arb, fmpq = flint.acb, flint.arb, flint.fmpq
    ng, ne = spec.ng, spec.ne
    n = ng + ne
    tg, te = spec.jg.two_j, spec.je.two_j

    def exact_cg(tmg, q, tme):
        sign, sq = clebsch_gordan_exact(tg / 2, tmg / 2, 1, q, te / 2, tme / 2)
        if sign == 0:
            return None
        return sign * arb(fmpq(sq.numerator, sq.denominator)).sqrt()

    # Dipole components on full-space indices: D[q][(e, g)]
    D = {q: {} for q in (-1, 0, 1)}
    for i, tme in enumerate(projections(te)):
        for q in (-1, 0, 1):
            tmg = tme - 2 * q
            if abs(tmg) <= tg:
                c = exact_cg(tmg, q, tme)
                if c is not None:
                    D[q][(ng + i, (tg - tmg) // 2)] = c
    comps = {q: acb(complex(liou.vector.component(q)).real, complex(liou.vector.component(q)).imag)
             for q in (-1, 0, 1)}
    V = {}
    for q in (-1, 0, 1):
        coef = comps[-q] if q == 0 else -comps[-q]
        for key, c in D[q].items():
            V[key] = V.get(key, acb(0)) + coef * c
    om = acb(fld.rabi.real, fld.rabi.imag)
    omc = om.conjugate()
    delta, gamma = arb(fld.detuning), arb(fld.gamma)
    H = {}
    for i in range(ng, n):
        H[(i, i)] = acb(-delta)
    for (i, j), v in V.items():
        H[(i, j)] = H.get((i, j), acb(0)) - om * v
        H[(j, i)] = H.get((j, i), acb(0)) - omc * v.conjugate()
    eye = {(i, i): acb(1) for i in range(n)}
    pe = {(i, i): acb(1) for i in range(ng, n)}
    mi = acb(0, -1)
    terms = [(mi, H, eye), (-mi, eye, H)]
    for q in (-1, 0, 1):
        Aq = {(g, e): c for (e, g), c in D[q].items()}
        Aqh = {(e, g): c for (g, e), c in Aq.items()}
        terms.append((acb(gamma), Aq, Aqh))
    half = acb(-gamma / 2)
    terms += [(half, pe, eye), (half, eye, pe)]
    entries: dict = {}
    for coef, A, B in terms:
        for (i, k), a in A.items():
            ca = coef * a
            for (l, j), bval in B.items():
                key = (i * n + j, k * n + l)
                val = ca * bval
                entries[key] = entries[key] + val if key in entries else val
    N = n * n
    M = flint.acb_mat(N, N)
    for (r, c), v in entries.items():
        if r != 0:
            M[r, c] = v
    for i in range(n):
        M[0, i * n + i] = acb(1)
    rhs = flint.acb_mat(N, 1)
    rhs[0, 0] = acb(1)
    return M, rhs


def isotropic_ground_state(spec: TransitionSpec) -> DensityMatrix:
    ng, ne = spec.ng, spec.ne
    return DensityMatrix(
        np.eye(ng, dtype=complex) / ng,
        np.zeros((ne, ne), dtype=complex),
        np.zeros((ne, ng), dtype=complex),
    )


def random_density_matrix(spec: TransitionSpec, rng: np.random.Generator) -> DensityMatrix:
    """A random full-rank density matrix over both levels."""
    n = spec.ng + spec.ne
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    return DensityMatrix.from_full(rho / np.trace(rho).real, spec.ng)


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step fourth-order Runge-Kutta settings.

    ``dt`` defaults to ``0.002/gamma * min(1, 1/S)``.  ``records`` states
    are stored at equal intervals up to ``t_end``.
    """

    t_end: float
    dt: Optional[float] = None
    records: int = 100
    tolerance: float = 1e-9


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded full density matrices and the final state."""

    times: np.ndarray
    states: np.ndarray
    final: DensityMatrix
    residual: float
    dt: float
    tolerance: float

    @property
    def converged(self) -> bool:
        return self.residual <= self.tolerance


def _rk4_increment(L: np.ndarray, h: float) -> np.ndarray:
    # One RK4 step is rho -> (I + K) rho with K the quartic Taylor remainder.
    hL = h * L
    K = hL.copy()
    term = hL
    for k in (2, 3, 4):
        term = term @ hL / k
        K += term
    return K


def _compose(Ka: np.ndarray, Kb: np.ndarray) -> np.ndarray:
    # (I + Ka)(I + Kb) = I + (Ka + Kb + Ka Kb)
    return Ka + Kb + Ka @ Kb


def _power(K: np.ndarray, m: int) -> np.ndarray:
    result = None
    base = K
    while m:
        if m & 1:
            result = base if result is None else _compose(result, base)
        m >>= 1
        if m:
            base = _compose(base, base)
    return result if result is not None else np.zeros_like(K)


def integrate(liou: Liouvillian, rho0: DensityMatrix, config: IntegratorConfig,
              require_convergence: bool = False) -> Trajectory:
    """Integrate from ``rho0`` with fixed-step RK4.

    The linear RK4 step map is raised to the number of steps per record
    by repeated squaring, kept in the form ``I + K`` so that trace
    conservation is not spoiled by rounding against the identity.  The
    result is the RK4 solution at the record times.
    """
    fld = liou.field
    S = fld.saturation
    dt = config.dt or 0.002 / fld.gamma * min(1.0, 1.0 / S if S > 0 else 1.0)
    per_record = max(1, math.ceil(config.t_end / (config.records * dt)))
    h = config.t_end / (config.records * per_record)
    K = _power(_rk4_increment(liou.matrix, h), per_record)
    n = liou.n
    x = rho0.full().reshape(n * n).astype(complex)
    states = [x.reshape(n, n).copy()]
    for _ in range(config.records):
        x = x + K @ x
        states.append(x.reshape(n, n).copy())
    rho = x.reshape(n, n)
    residual = float(np.abs(liou.matrix @ x).max())
    final = DensityMatrix.from_full(rho, liou.spec.ng)
    traj = Trajectory(
        np.linspace(0.0, config.t_end, config.records + 1), np.array(states), final, residual, h,
        config.tolerance,
    )
    if require_convergence and not traj.converged:
        raise ConvergenceError(
            f"residual |L rho| = {residual:.3g} after t = {config.t_end} exceeds {config.tolerance}"
        )
    return traj


def broadband_generator(spec: TransitionSpec, pol, field: FieldParams,
                        bandwidth: Optional[float] = None) -> np.ndarray:
    """Generator of the averaged population equations under phase diffusion.

    Acts on ``concat(vec(rho_gg), vec(rho_ee))``.
    """
    R, Lsh = broadband_map(field, bandwidth)
    V = coupling_operator(spec.jg, spec.je, _vector(pol))
    Vh = V.conj().T
    D = dipole_components(spec.jg, spec.je)
    ng, ne = spec.ng, spec.ne
    ig, ie = np.eye(ng), np.eye(ne)
    VV, VhV = V @ Vh, Vh @ V
    g = field.gamma
    ee_ee = (
        -g * np.kron(ie, ie)
        - R * (np.kron(VV, ie) + np.kron(ie, VV.T))
        + 1j * Lsh * (np.kron(VV, ie) - np.kron(ie, VV.T))
    )
    ee_gg = 2 * R * np.kron(V, V.conj())
    gg_gg = -R * (np.kron(VhV, ig) + np.kron(ig, VhV.T)) - 1j * Lsh * (
        np.kron(VhV, ig) - np.kron(ig, VhV.T)
    )
    gg_ee = g * sum(np.kron(D[q].T, D[q].T) for q in D) + 2 * R * np.kron(Vh, V.T)
    return np.block([[gg_gg, gg_ee], [ee_gg, ee_ee]])


def broadband_numeric_steady_state(spec: TransitionSpec, pol, field: FieldParams,
                                   bandwidth: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
    """Stationary (rho_gg, rho_ee) of :func:`broadband_generator`."""
    G = broadband_generator(spec, pol, field, bandwidth)
    ng, ne = spec.ng, spec.ne
    A = G.copy()
    A[0, :] = 0.0
    A[0, [i * ng + i for i in range(ng)]] = 1.0
    A[0, [ng * ng + i * ne + i for i in range(ne)]] = 1.0
    b = np.zeros(len(A), dtype=complex)
    b[0] = 1.0
    x = np.linalg.solve(A, b)
    gg = x[: ng * ng].reshape(ng, ng)
    ee = x[ng * ng:].reshape(ne, ne)
    return (gg + gg.conj().T) / 2, (ee + ee.conj().T) / 2


def phase_paths(n_real: int, steps: int, dt: float, bandwidth: float,
                rng: np.random.Generator) -> np.ndarray:
    """Wiener phase paths psi(t) with <d psi**2> = 2 mu dt, shape (steps + 1, n_real)."""
    incr = rng.normal(scale=math.sqrt(2 * bandwidth * dt), size=(steps, n_real))
    return np.vstack([np.zeros((1, n_real)), np.cumsum(incr, axis=0)])


def field_correlation(paths: np.ndarray, dt: float, lags, rabi: complex = 1.0):
    """Estimate <Omega*(t) Omega(t - tau)> from phase paths.

    Returns ``(mean, stderr)`` arrays over ``lags`` (in time units), using
    the last time of each path against the earlier one so that every
    realization contributes one independent sample per lag.
    """
    steps = paths.shape[0] - 1
    mean, err = [], []
    for tau in lags:
        k = int(round(tau / dt))
        if k > steps:
            raise ValueError(f"lag {tau} exceeds the path length")
        z = abs(rabi) ** 2 * np.exp(1j * (paths[-1] - paths[-1 - k]))
        mean.append(z.mean())
        err.append(z.std(ddof=1) / math.sqrt(z.size))
    return np.array(mean), np.array(err)


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Ensemble estimates from phase-diffusion trajectories.

    Each realization is time-averaged over the sampling window; means and
    standard errors are taken across realizations.
    """

    excited_population: float
    excited_population_stderr: float
    current: np.ndarray
    current_stderr: np.ndarray
    samples: np.ndarray


def phase_diffusion_ensemble(
    spec: TransitionSpec,
    pol,
    field: FieldParams,
    bandwidth: float,
    realizations: int = 400,
    t_burn: Optional[float] = None,
    t_sample: float = 200.0,
    dt: float = 0.005,
    seed: int = 0,
) -> EnsembleResult:
    """Monte-Carlo average over realizations of a phase-diffusing field.

    The field is ``Omega exp(-i psi(t))`` with Wiener phase of diffusion
    ``2 mu``.  The phase is held constant over each step and the Bloch
    equations are integrated exactly within a step in the frame that
    follows the phase, where a phase jump only rotates the optical
    coherences.

    ``t_burn`` defaults to 25 relaxation times of the slowest mode of the
    averaged equations (at least 50/gamma), which matters because optical
    pumping between ground sublevels can be much slower than decay.
    """
    if realizations < 100:
        raise ValueError("ensemble too small: at least 100 realizations are needed")
    if bandwidth * dt > 0.1:
        raise ValueError(f"time step too coarse: mu*dt = {bandwidth * dt:.3g} > 0.1")
    g = field.gamma
    mono = FieldParams(field.rabi, field.detuning, g)
    liou = build_liouvillian(spec, pol, mono)
    n, ng = liou.n, spec.ng
    P = scipy.linalg.expm(liou.matrix * dt)
    idx = np.arange(n * n)
    rows, cols = idx // n, idx % n
    eg = (rows >= ng) & (cols < ng)
    ge = (rows < ng) & (cols >= ng)
    diag_e = np.array([i * n + i for i in range(ng, n)])
    eg_blocks = np.array([r * n + c for r in range(ng, n) for c in range(ng)])
    rng = np.random.default_rng(seed)
    if t_burn is None:
        ev = np.linalg.eigvals(broadband_generator(spec, pol, field, bandwidth)).real
        gap = -np.sort(ev)[-2]
        t_burn = max(50.0 / g, 25.0 / gap)
    n_burn = int(round(t_burn / dt))
    n_samp = int(round(t_sample / dt))
    x = np.repeat(isotropic_ground_state(spec).full().reshape(n * n, 1), realizations, axis=1)
    sigma = math.sqrt(2 * bandwidth * dt)
    acc_pe = np.zeros(realizations)
    acc_cur = np.zeros((len(eg_blocks), realizations), dtype=complex)
    for step in range(n_burn + n_samp):
        x = P @ x
        rot = np.exp(1j * rng.normal(scale=sigma, size=realizations))
        x[eg] *= rot
        x[ge] *= rot.conj()
        if step >= n_burn:
            acc_pe += x[diag_e].sum(axis=0).real
            acc_cur += np.conj(field.rabi) * x[eg_blocks]
    pe = acc_pe / n_samp
    cur = acc_cur / n_samp
    k = realizations
    ne = spec.ne
    return EnsembleResult(
        float(pe.mean()),
        float(pe.std(ddof=1) / math.sqrt(k)),
        cur.mean(axis=1).reshape(ne, ng),
        (cur.std(axis=1, ddof=1) / math.sqrt(k)).reshape(ne, ng),
        pe,
    )
