"""Closed-form steady state of the optical Bloch equations.

The four transition classes are

* ``A``: Jg = J -> Je = J - 1, two dark states, steady state not unique;
* ``B``: Jg = J -> Je = J with integer J, one dark state;
* ``C``: Jg = J -> Je = J with half-integer J, no dark state
  (except at circular polarization);
* ``D``: Jg = J -> Je = J + 1, no dark state.

For the bright classes the steady state is built from operators E, G
that commute with V V^+ and V^+ V, so that the density matrix is diagonal
in the natural basis and depends on detuning only through the saturation
parameter S.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .angular import AngularMomentum, MomentumLike, double_factorial, scaled_legendre
from .errors import DarkStateError, NoDarkStateError, NonUniqueSteadyStateError
from .operators import (
    coupling_operator,
    dipole_components,
    expansion_coefficients_closed_form,
    harmonic_scale,
    inverse_coupling,
    light_shifts,
    raising_operators,
    x_operator,
)
from .polarization import (
    Frame,
    Polarization,
    circular_pair,
    polarization_from_ellipticity,
    spinor_power,
    spinor_root,
    tensor_power,
)

__all__ = [
    "TransitionClass",
    "TransitionSpec",
    "FieldParams",
    "DensityMatrix",
    "SteadyStateResult",
    "NaturalBasis",
    "classify",
    "dark_subspace",
    "natural_basis",
    "steady_state",
    "alpha_coefficients",
    "alpha_ratio",
    "excited_population",
    "saturation_intensity_ratio",
    "unpolarized_excited_population",
    "branching_matrix",
    "broadband_map",
    "broadband_steady_state",
    "dark_state_pair",
    "ellipticity_scan",
    "low_saturation_absorption",
]


class TransitionClass(enum.Enum):
    A = "a"
    B = "b"
    C = "c"
    D = "d"

    @property
    def has_dark_state(self) -> bool:
        return self in (TransitionClass.A, TransitionClass.B)


@dataclass(frozen=True)
class TransitionSpec:
    """A closed dipole transition Jg -> Je."""

    jg: AngularMomentum
    je: AngularMomentum

    def __post_init__(self):
        object.__setattr__(self, "jg", AngularMomentum.of(self.jg))
        object.__setattr__(self, "je", AngularMomentum.of(self.je))
        dg, de = self.jg.two_j, self.je.two_j
        if abs(dg - de) > 2 or (dg - de) % 2 or dg + de == 0:
            raise ValueError(f"{self.jg} -> {self.je} is not a dipole-allowed transition")

    @classmethod
    def of(cls, jg: MomentumLike, je: MomentumLike) -> "TransitionSpec":
        return cls(AngularMomentum.of(jg), AngularMomentum.of(je))

    @property
    def transition_class(self) -> TransitionClass:
        return classify(self)

    @property
    def ng(self) -> int:
        return self.jg.dim

    @property
    def ne(self) -> int:
        return self.je.dim

    @property
    def J(self) -> float:
        """Ground-level momentum."""
        return self.jg.two_j / 2

    def __str__(self):
        return f"{self.jg}->{self.je}"


def classify(spec: TransitionSpec) -> TransitionClass:
    dg, de = spec.jg.two_j, spec.je.two_j
    if de == dg - 2:
        return TransitionClass.A
    if de == dg + 2:
        return TransitionClass.D
    return TransitionClass.B if dg % 2 == 0 else TransitionClass.C


@dataclass(frozen=True)
class FieldParams:
    """Driving field: Rabi frequency, detuning, decay rate and laser bandwidth."""

    rabi: complex
    detuning: float = 0.0
    gamma: float = 1.0
    bandwidth: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.bandwidth < 0:
            raise ValueError("bandwidth must be non-negative")
        object.__setattr__(self, "rabi", complex(self.rabi))

    @classmethod
    def from_saturation(
        cls, saturation: float, detuning: float = 0.0, gamma: float = 1.0,
        bandwidth: float = 0.0, phase: float = 0.0,
    ) -> "FieldParams":
        if saturation < 0:
            raise ValueError("saturation must be non-negative")
        amp = math.sqrt(saturation * (gamma**2 / 4 + detuning**2))
        return cls(amp * complex(math.cos(phase), math.sin(phase)), detuning, gamma, bandwidth)

    @property
    def saturation(self) -> float:
        return abs(self.rabi) ** 2 / (self.gamma**2 / 4 + self.detuning**2)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density matrix split into level blocks, Zeeman order +J..-J."""

    gg: np.ndarray
    ee: np.ndarray
    eg: np.ndarray

    @property
    def ge(self) -> np.ndarray:
        return self.eg.conj().T

    @property
    def excited_population(self) -> float:
        return float(np.trace(self.ee).real)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.gg) + np.trace(self.ee))

    def full(self) -> np.ndarray:
        """The whole matrix with ground states first, then excited states."""
        return np.block([[self.gg, self.ge], [self.eg, self.ee]])

    @classmethod
    def from_full(cls, rho: np.ndarray, ng: int) -> "DensityMatrix":
        return cls(rho[:ng, :ng], rho[ng:, ng:], rho[ng:, :ng])


@dataclass(frozen=True, eq=False)
class SteadyStateResult:
    """Analytic steady state with its normalization data.

    ``alpha0``, ``alpha1`` and ``beta`` are reported in harmonic
    normalization unless ``alpha_normalization == "tensor"`` (class D at
    circular polarization, where the harmonic values diverge).
    They are ``None`` for the dark class B.
    """

    spec: TransitionSpec
    rho: DensityMatrix
    saturation: float
    alpha0: Optional[float] = None
    alpha1: Optional[float] = None
    beta: Optional[float] = None
    alpha_normalization: Optional[str] = None

    @property
    def excited_population(self) -> float:
        return self.rho.excited_population


def _pol(pol) -> Polarization:
    return pol if isinstance(pol, Polarization) else Polarization.from_vector(pol)


def _tensor_to_ket(comps: np.ndarray, two_j: int) -> np.ndarray:
    # psi_mu = (-1)**(J - mu) Psi_{J,-mu}
    signs = np.array([(-1) ** k for k in range(two_j + 1)])
    return signs * comps[::-1]


def _dark_state_b(spec: TransitionSpec, pol: Polarization) -> np.ndarray:
    tJ = spec.jg.two_j
    J = tJ // 2
    psi = _tensor_to_ket(tensor_power(pol.vector, J).comps, tJ)
    norm2 = math.factorial(J) / double_factorial(2 * J - 1) * scaled_legendre(J, pol.scalar_square)
    return psi / math.sqrt(norm2)


def dark_subspace(spec: TransitionSpec, pol) -> list[np.ndarray]:
    """Orthonormal kets spanning the dark ground states.

    Class B: the single state built from the tensor power {e}_J.
    Class A: states built from the two isotropic vectors C orthogonal to e,
    combined into an orthonormal pair.  At circular polarization the two
    vectors coincide and the second state is completed from the null
    space of V.
    Class C has one dark state at circular polarization only.  Class D and
    class C otherwise raise ``NoDarkStateError``.
    """
    pol = _pol(pol)
    cls = classify(spec)
    if cls is TransitionClass.B:
        return [_dark_state_b(spec, pol)]
    if cls is TransitionClass.C and pol.is_circular:
        _, _, vh = np.linalg.svd(coupling_operator(spec.jg, spec.je, pol))
        return [vh[-1].conj()]
    if cls is not TransitionClass.A:
        raise NoDarkStateError(f"{spec} has no dark state for this polarization")
    psi1, psi2 = dark_state_pair(spec, pol)
    overlap = np.vdot(psi1, psi2).real
    if abs(overlap) > 1 - 1e-12:
        V = coupling_operator(spec.jg, spec.je, pol)
        _, _, vh = np.linalg.svd(V)
        null = vh[-2:].conj().T
        other = null @ (null.conj().T @ psi1)
        rest = null - np.outer(other / np.vdot(other, other), other.conj() @ null)
        k = np.argmax(np.linalg.norm(rest, axis=0))
        second = rest[:, k] / np.linalg.norm(rest[:, k])
        return [psi1, second]
    plus = (psi1 + psi2) / math.sqrt(2 * (1 + overlap))
    minus = (psi1 - psi2) / math.sqrt(2 * (1 - overlap))
    return [plus, minus]


def dark_state_pair(spec: TransitionSpec, pol) -> tuple[np.ndarray, np.ndarray]:
    """The two unit dark states of a J -> J-1 transition before orthogonalization.

    Each is the stretched power of the spinor root of one isotropic vector
    C orthogonal to e.  The phase of the second is fixed so that the
    overlap <psi1|psi2> is real and non-negative.
    """
    pol = _pol(pol)
    if classify(spec) is not TransitionClass.A:
        raise ValueError(f"{spec} is not a J -> J-1 transition")
    tJ = spec.jg.two_j
    c1, c2 = circular_pair(pol)
    psi1 = _tensor_to_ket(spinor_power(spinor_root(c1), tJ).comps, tJ)
    psi2 = _tensor_to_ket(spinor_power(spinor_root(c2), tJ).comps, tJ)
    psi1 = psi1 / np.linalg.norm(psi1)
    psi2 = psi2 / np.linalg.norm(psi2)
    overlap = np.vdot(psi1, psi2)
    if abs(overlap) > 0:
        psi2 = psi2 * (abs(overlap) / overlap)
    return psi1, psi2


@dataclass(frozen=True, eq=False)
class NaturalBasis:
    """Paired eigenbases of V^+V (ground) and V V^+ (excited).

    Columns ``ground[:, i]`` and ``excited[:, i]`` satisfy
    ``V ground[:, i] = lam[i] excited[:, i]`` for ``i < len(lam)``.
    Excited columns beyond that span the null space of V^+.
    For class D ``nu_squared`` holds the diagonal of W W^+ on the excited
    basis (harmonic normalization, tensor at circular polarization).
    """

    lam: np.ndarray
    ground: np.ndarray
    excited: np.ndarray
    nu_squared: Optional[np.ndarray] = None

    @property
    def lambda_squared(self) -> np.ndarray:
        return self.lam**2


def _clusters(values: np.ndarray, tol: float) -> list[list[int]]:
    groups: list[list[int]] = []
    for i, v in enumerate(values):
        if groups and abs(values[groups[-1][-1]] - v) <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _rotation(vectors: np.ndarray, idx: list[int], op: Optional[np.ndarray]) -> np.ndarray:
    # unitary that diagonalizes op inside a degenerate cluster
    if op is None or len(idx) < 2:
        return np.eye(len(idx))
    sub = vectors[:, idx]
    _, rot = np.linalg.eigh(sub.conj().T @ op @ sub)
    return rot


def natural_basis(spec: TransitionSpec, pol) -> NaturalBasis:
    """Natural bases from the singular value decomposition of V.

    Inside a cluster of degenerate lambda the ground vectors are rotated to
    diagonalize G (and the excited dark vectors to diagonalize E), so that
    the steady state is diagonal on the returned basis.
    """
    pol = _pol(pol)
    V = coupling_operator(spec.jg, spec.je, pol)
    u, s, vh = np.linalg.svd(V)
    ng, ne = spec.ng, spec.ne
    lam = np.zeros(ng)
    lam[: len(s)] = s
    ground = vh.conj().T
    E = G = None
    cls = classify(spec)
    if cls is TransitionClass.D:
        W, Wt = raising_operators(spec.jg, spec.je, pol, "tensor")
        E, G = W @ W.conj().T, Wt @ Wt.conj().T
    tol = 1e-10 * max(1.0, float(s.max()))
    bright = lam > tol
    nb = int(bright.sum())
    excited = np.zeros((ne, ne), dtype=complex)
    cols = []
    for grp in _clusters(lam, tol):
        rot = _rotation(ground, grp, G)
        cols.append(ground[:, grp] @ rot)
        # the left singular vectors pair with the right ones; using them
        # directly keeps the excited basis orthonormal for tiny lambda
        if grp[0] < nb:
            excited[:, grp] = u[:, grp] @ rot
    ground = np.concatenate(cols, axis=1)
    if ne > nb:
        rest = u[:, nb:] if u.shape[1] > nb else np.zeros((ne, 0))
        # remaining excited vectors: complement of the bright ones
        q, _ = np.linalg.qr(np.concatenate([excited[:, :nb], rest], axis=1))
        comp = q[:, nb:ne]
        if E is not None and comp.shape[1] > 1:
            _, rot = np.linalg.eigh(comp.conj().T @ E @ comp)
            comp = comp @ rot
        excited[:, nb:] = comp
    nu2 = None
    if E is not None:
        h = harmonic_scale(spec.jg.two_j + 1, pol.scalar_square) if not pol.is_circular else 1.0
        nu2 = np.einsum("ij,ik,kj->j", excited.conj(), E, excited).real * abs(h) ** 2
    return NaturalBasis(lam[: min(ng, ne)], ground, excited, nu2)


def _bright_pieces(spec: TransitionSpec, pol: Polarization):
    """Tensor-normalized E, G, X and W plus the harmonic rescaling factor.

    Returns ``(E, G, X, W, factor)`` where harmonic quantities are the
    tensor ones times ``factor`` (``None`` at circular polarization for D).
    """
    cls = classify(spec)
    x = pol.scalar_square
    if cls is TransitionClass.C:
        if pol.is_circular:
            raise DarkStateError("circular polarization")
        Vinv = inverse_coupling(spec.jg, pol)
        n = spec.ng
        eye = np.eye(n)
        return eye, eye, Vinv, eye, 1.0
    tJ = spec.jg.two_j
    W, Wt = raising_operators(spec.jg, spec.je, pol, "tensor")
    X = x_operator(spec.jg, pol, "tensor", "pseudoinverse")
    factor = None if pol.is_circular else abs(harmonic_scale(tJ + 1, x)) ** 2
    return W @ W.conj().T, Wt @ Wt.conj().T, X, W, factor


def steady_state(spec: TransitionSpec, pol, field: FieldParams) -> SteadyStateResult:
    """Analytic steady state for a monochromatic field.

    Raises ``NonUniqueSteadyStateError`` for class A and ``DarkStateError``
    for class C at circular polarization.
    """
    pol = _pol(pol)
    if field.bandwidth:
        raise ValueError("use broadband_steady_state for a finite bandwidth")
    cls = classify(spec)
    S = field.saturation
    ng, ne = spec.ng, spec.ne
    if cls is TransitionClass.A:
        raise NonUniqueSteadyStateError(
            f"{spec} has a two-dimensional dark subspace", dimension=4
        )
    if cls is TransitionClass.B:
        psi = _dark_state_b(spec, pol)
        rho = DensityMatrix(
            np.outer(psi, psi.conj()),
            np.zeros((ne, ne), dtype=complex),
            np.zeros((ne, ng), dtype=complex),
        )
        return SteadyStateResult(spec, rho, S)
    E, G, X, W, factor = _bright_pieces(spec, pol)
    alpha1 = float(np.trace(E).real)
    alpha0 = float(np.sum(np.abs(X) ** 2))
    beta = 1.0 / (alpha0 + 2 * S * alpha1)
    # Coherence from the stationary optical Bloch equation for rho_eg.
    coh = 1j * field.rabi / (field.gamma / 2 - 1j * field.detuning) * beta
    rho = DensityMatrix(
        beta * (X @ X.conj().T + S * G),
        beta * S * E,
        coh * (W @ X.conj().T),
    )
    if factor is None:
        norm = "tensor"
    else:
        alpha0, alpha1, beta = alpha0 * factor, alpha1 * factor, beta / factor
        norm = "harmonic"
    return SteadyStateResult(spec, rho, S, alpha0, alpha1, beta, norm)


def _legendre_sum(spec: TransitionSpec, x: float) -> float:
    # sum_L C_L**2 x**(2J-L) Q_L(x)
    cls = classify(spec)
    tJ = spec.jg.two_j
    C = expansion_coefficients_closed_form(spec.jg, spec.je)
    Ls = range(1, tJ + 1, 2) if cls is TransitionClass.C else range(tJ % 2, tJ + 1, 2)
    return float(sum(C[L] ** 2 * x ** (tJ - L) * scaled_legendre(L, x) for L in Ls))


def alpha_ratio(spec: TransitionSpec, pol) -> float:
    """alpha1 / alpha0 from the Legendre sums, finite for all polarizations.

    Zero for the dark classes.
    """
    pol = _pol(pol)
    cls = classify(spec)
    if cls.has_dark_state:
        return 0.0
    tJ = spec.jg.two_j
    x = pol.scalar_square
    denom = 3 * _legendre_sum(spec, x)
    if cls is TransitionClass.C:
        return (tJ + 1) ** 2 * x ** (tJ + 1) / denom
    return (tJ + 3) * float(scaled_legendre(tJ + 1, x)) / denom


def alpha_coefficients(spec: TransitionSpec, pol) -> tuple[float, float, str]:
    """(alpha0, alpha1, normalization) from the Legendre-polynomial sums.

    Harmonic normalization is used when e . e > 0.  At circular
    polarization class D falls back to the tensor normalization, and
    class C has alpha0 = inf.
    """
    pol = _pol(pol)
    cls = classify(spec)
    if cls.has_dark_state:
        raise DarkStateError(f"class {cls.value} transitions have dark states")
    tJ = spec.jg.two_j
    x = pol.scalar_square
    lsum = _legendre_sum(spec, x)
    if cls is TransitionClass.C:
        alpha1 = float(tJ + 1)
        if pol.is_circular:
            return math.inf, alpha1, "harmonic"
        return 3 / (tJ + 1) * lsum / x ** (tJ + 1), alpha1, "harmonic"
    q_top = float(scaled_legendre(tJ + 1, x))
    if pol.is_circular:
        h2 = double_factorial(2 * tJ + 1) / math.factorial(tJ + 1)
        return 3 / (tJ + 3) * lsum / h2, q_top / h2, "tensor"
    scale = x ** (-(tJ + 1))
    return 3 / (tJ + 3) * lsum * scale, q_top * scale, "harmonic"


def excited_population(spec: TransitionSpec, pol, saturation: float) -> float:
    """Total steady-state excited population pi_e = S'/(1 + 2 S'), S' = S alpha1/alpha0."""
    s_eff = saturation * alpha_ratio(spec, pol)
    return s_eff / (1 + 2 * s_eff)


def saturation_intensity_ratio(spec: TransitionSpec, pol) -> float:
    """alpha0 / alpha1, infinite for dark classes and class C at circular polarization."""
    r = alpha_ratio(spec, pol)
    return math.inf if r == 0 else 1.0 / r


def unpolarized_excited_population(spec: TransitionSpec, saturation: float) -> float:
    """Low-saturation excited population for an isotropic ground level."""
    return saturation / 3 * spec.ne / spec.ng


def branching_matrix(spec: TransitionSpec, pol, basis: Optional[NaturalBasis] = None) -> np.ndarray:
    """Decay probabilities from natural excited state j into natural ground state i.

    ``W[i, j] = sum_q |<(e)j| D_q |(g)i>|**2``; each column sums to one.
    """
    basis = natural_basis(spec, pol) if basis is None else basis
    D = dipole_components(spec.jg, spec.je)
    out = np.zeros((spec.ng, spec.ne))
    for q in (-1, 0, 1):
        amp = basis.excited.conj().T @ D[q] @ basis.ground
        out += (np.abs(amp) ** 2).T
    return out


def broadband_map(field: FieldParams, bandwidth: Optional[float] = None) -> tuple[float, float]:
    """(R, L) with R + iL = |Omega|**2 / (mu + gamma/2 - i delta).

    With zero bandwidth ``R = gamma S / 2`` and ``L = delta S``.
    """
    mu = field.bandwidth if bandwidth is None else bandwidth
    if mu < 0:
        raise ValueError("bandwidth must be non-negative")
    z = abs(field.rabi) ** 2 / complex(mu + field.gamma / 2, -field.detuning)
    return z.real, z.imag


@dataclass(frozen=True, eq=False)
class BroadbandState:
    """Ensemble-averaged populations and the averaged product Omega* rho_eg."""

    gg: np.ndarray
    ee: np.ndarray
    current: np.ndarray
    effective_saturation: float

    @property
    def excited_population(self) -> float:
        return float(np.trace(self.ee).real)


def broadband_steady_state(spec: TransitionSpec, pol, field: FieldParams) -> BroadbandState:
    """Steady state under phase-diffusion broadening of bandwidth ``field.bandwidth``.

    The averaged populations equal the monochromatic ones with S replaced
    by 2R/gamma.  The field-coherence product is
    ``<Omega* rho_eg> = (iR - L)(V rho_gg - rho_ee V)``.
    """
    pol = _pol(pol)
    R, L = broadband_map(field)
    s_eff = 2 * R / field.gamma
    mono = FieldParams.from_saturation(s_eff, 0.0, field.gamma)
    res = steady_state(spec, pol, mono)
    V = coupling_operator(spec.jg, spec.je, pol)
    gg, ee = res.rho.gg, res.rho.ee
    current = complex(-L, R) * (V @ gg - ee @ V)
    return BroadbandState(gg, ee, current, s_eff)


def low_saturation_absorption(spec: TransitionSpec, pol) -> float:
    """Low-saturation absorption relative to an isotropic ground level.

    The limit S -> 0 of pi_e / pi_e^unpol, i.e. 3 (2Jg+1)/(2Je+1) alpha1/alpha0.
    """
    return 3 * spec.ng / spec.ne * alpha_ratio(spec, pol)


def ellipticity_scan(spec: TransitionSpec, epsilons, saturation: float,
                     frame: Frame = Frame.NATURAL_PLUS) -> list[dict]:
    """Rows of absorption observables over a list of ellipticities."""
    rows = []
    for eps in epsilons:
        pol = polarization_from_ellipticity(float(eps), frame)
        ratio = alpha_ratio(spec, pol)
        s_eff = saturation * ratio
        rows.append(
            {
                "epsilon": float(eps),
                "alpha_ratio": ratio,
                "pi_e": s_eff / (1 + 2 * s_eff),
                "pi_e_normalized": 3 * spec.ng / spec.ne * ratio,
                "isat_ratio": math.inf if ratio == 0 else 1.0 / ratio,
            }
        )
    return rows
