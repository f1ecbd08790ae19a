"""Complex polarization vectors and their irreducible tensor powers.

Vectors are stored by their spherical components ``a_q = a . e_q`` for
``q = +1, 0, -1`` (in that order), where ``e_0 = e_z`` and
``e_{+-1} = -+(e_x +- i e_y)/sqrt(2)``.  With this choice the scalar
product is ``(a . b) = sum_q (-1)**q a_q b_{-q}`` and tensor products are
formed with ordinary Clebsch-Gordan coupling.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .angular import as_two, clebsch_gordan, double_factorial, projections, register_cache

__all__ = [
    "ComplexVector3",
    "Frame",
    "Polarization",
    "SphericalTensor",
    "polarization_from_ellipticity",
    "natural_frame_angle",
    "couple",
    "tensor_power",
    "spherical_harmonic",
    "spherical_dot",
    "circular_pair",
    "spinor_root",
    "spinor_power",
]

_SQ2 = math.sqrt(2.0)
_Q = (1, 0, -1)


@dataclass(frozen=True, eq=False)
class ComplexVector3:
    """A complex 3-vector held by spherical components (q = +1, 0, -1)."""

    comps: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.comps, dtype=complex).reshape(3).copy()
        c.setflags(write=False)
        object.__setattr__(self, "comps", c)

    @classmethod
    def from_cartesian(cls, xyz: Sequence[complex]) -> "ComplexVector3":
        x, y, z = (complex(v) for v in xyz)
        return cls([-(x + 1j * y) / _SQ2, z, (x - 1j * y) / _SQ2])

    @classmethod
    def basis(cls, q: int) -> "ComplexVector3":
        """The cyclic basis vector e_q as a vector (not its components)."""
        # e_q . e_p = (-1)**q delta_{q,-p}
        c = np.zeros(3, dtype=complex)
        c[_Q.index(-q)] = (-1) ** q
        return cls(c)

    def cartesian(self) -> np.ndarray:
        p, z, m = self.comps
        return np.array([(m - p) / _SQ2, 1j * (p + m) / _SQ2, z])

    def component(self, q: int) -> complex:
        return complex(self.comps[_Q.index(q)])

    def dot(self, other: "ComplexVector3") -> complex:
        a, b = self.comps, other.comps
        return complex(-a[0] * b[2] + a[1] * b[1] - a[2] * b[0])

    def conj(self) -> "ComplexVector3":
        p, z, m = self.comps
        return ComplexVector3([-np.conj(m), np.conj(z), -np.conj(p)])

    def hermitian_norm(self) -> float:
        return float(np.sqrt(self.conj().dot(self).real))

    def cross(self, other: "ComplexVector3") -> "ComplexVector3":
        return ComplexVector3.from_cartesian(np.cross(self.cartesian(), other.cartesian()))

    def __add__(self, other):
        return ComplexVector3(self.comps + other.comps)

    def __sub__(self, other):
        return ComplexVector3(self.comps - other.comps)

    def __mul__(self, scalar):
        return ComplexVector3(self.comps * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return ComplexVector3(self.comps / scalar)

    def __repr__(self):
        return f"ComplexVector3({np.array2string(self.comps, precision=6)})"


class Frame(enum.Enum):
    """Coordinate frame in which an elliptical vector is written."""

    CONVENTIONAL = "conventional"
    NATURAL_PLUS = "natural+"
    NATURAL_MINUS = "natural-"


@dataclass(frozen=True)
class Polarization:
    """A unit polarization vector, with its ellipticity when known.

    The scalar square ``e . e`` must be real; this fixes the global phase
    up to a sign and every formula here relies on it.
    """

    vector: ComplexVector3
    epsilon: Optional[float] = None
    frame: Optional[Frame] = None
    scalar_square: float = field(init=False)

    def __post_init__(self):
        ee = self.vector.dot(self.vector)
        if abs(ee.imag) > 1e-12:
            raise ValueError(
                f"e.e = {ee:.3g} is not real; multiply the vector by a global phase first"
            )
        norm = self.vector.hermitian_norm()
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"polarization vector must be normalized, |e| = {norm!r}")
        object.__setattr__(self, "scalar_square", float(ee.real))

    @classmethod
    def from_vector(cls, vector) -> "Polarization":
        if not isinstance(vector, ComplexVector3):
            vector = ComplexVector3(vector)
        return cls(vector)

    @property
    def is_circular(self) -> bool:
        return abs(self.scalar_square) < 1e-14

    @property
    def is_linear(self) -> bool:
        return abs(abs(self.scalar_square) - 1.0) < 1e-12


def natural_frame_angle(epsilon: float) -> float:
    """Tilt of the natural-frame axis from the conventional z axis.

    The natural z axis is a generator of one of the two circular cylinders
    that contain the polarization ellipse; ``cos(theta) = |tan(epsilon)|``.
    """
    t = abs(math.tan(epsilon))
    if t > 1 + 1e-12:
        raise ValueError("ellipticity must satisfy |epsilon| <= pi/4")
    return math.acos(min(t, 1.0))


def polarization_from_ellipticity(epsilon: float, frame: Frame = Frame.NATURAL_PLUS) -> Polarization:
    """Unit vector of ellipticity ``epsilon`` written in the chosen frame.

    ``CONVENTIONAL``: ``e_x cos(eps) + i e_y sin(eps)``.
    ``NATURAL_PLUS``: components ``(0, sqrt(cos 2eps), -sqrt(2) sin(eps))``,
    a linear part along z plus a circular part rotating with q = -1.
    ``NATURAL_MINUS``: the frame built on the other cylinder, components
    ``(-sqrt(2) sin(eps), sqrt(cos 2eps), 0)``.
    """
    if not -math.pi / 4 - 1e-15 <= epsilon <= math.pi / 4 + 1e-15:
        raise ValueError(f"ellipticity {epsilon!r} outside [-pi/4, pi/4]")
    frame = Frame(frame)
    c, s = math.cos(epsilon), math.sin(epsilon)
    root = math.sqrt(max(math.cos(2 * epsilon), 0.0))
    if abs(abs(epsilon) - math.pi / 4) <= 1e-15:
        # pi/4 is not representable; snap to the exact circular vector
        c, s, root = 1 / _SQ2, math.copysign(1 / _SQ2, epsilon), 0.0
    if frame is Frame.CONVENTIONAL:
        comps = [-(c - s) / _SQ2, 0.0, (c + s) / _SQ2]
    elif frame is Frame.NATURAL_PLUS:
        comps = [0.0, root, -_SQ2 * s]
    else:
        comps = [-_SQ2 * s, root, 0.0]
    return Polarization(ComplexVector3(comps), float(epsilon), frame)


@dataclass(frozen=True, eq=False)
class SphericalTensor:
    """Irreducible tensor of rank ``two_rank / 2`` with components M = L..-L."""

    two_rank: int
    comps: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.comps, dtype=complex)
        if c.shape != (self.two_rank + 1,):
            raise ValueError("component count does not match the rank")
        object.__setattr__(self, "comps", c)

    @property
    def rank(self) -> float:
        return self.two_rank / 2

    @classmethod
    def from_vector(cls, v: ComplexVector3) -> "SphericalTensor":
        return cls(2, v.comps)

    def hermitian_norm(self) -> float:
        return float(np.linalg.norm(self.comps))

    def __mul__(self, scalar):
        return SphericalTensor(self.two_rank, self.comps * scalar)

    __rmul__ = __mul__


@register_cache
@lru_cache(maxsize=None)
def _coupling_array(t1: int, t2: int, tK: int) -> np.ndarray:
    out = np.zeros((tK + 1, t1 + 1, t2 + 1))
    for k, tM in enumerate(projections(tK)):
        for a, tm1 in enumerate(projections(t1)):
            tm2 = tM - tm1
            if abs(tm2) > t2:
                continue
            b = (t2 - tm2) // 2
            out[k, a, b] = clebsch_gordan(t1 / 2, tm1 / 2, t2 / 2, tm2 / 2, tK / 2, tM / 2)
    return out


def _as_tensor(x) -> SphericalTensor:
    if isinstance(x, SphericalTensor):
        return x
    if isinstance(x, ComplexVector3):
        return SphericalTensor.from_vector(x)
    if isinstance(x, Polarization):
        return SphericalTensor.from_vector(x.vector)
    raise TypeError(f"cannot treat {type(x).__name__} as a spherical tensor")


def couple(a, b, rank) -> SphericalTensor:
    """Irreducible product {a x b}_K."""
    A, B = _as_tensor(a), _as_tensor(b)
    tK = as_two(rank)
    cg = _coupling_array(A.two_rank, B.two_rank, tK)
    return SphericalTensor(tK, np.einsum("kab,a,b->k", cg, A.comps, B.comps))


def tensor_power(a, L: int) -> SphericalTensor:
    """Stretched tensor power {a}_L = {a x {a}_(L-1)}_L, with {a}_0 = 1."""
    vec = _as_tensor(a)
    if L < 0:
        raise ValueError("rank must be non-negative")
    out = SphericalTensor(0, [1.0])
    for _ in range(L):
        out = couple(vec, out, out.two_rank / 2 + vec.two_rank / 2)
    return out


def spherical_harmonic(a, L: int) -> SphericalTensor:
    """Harmonic-normalized power n_L(a) = a**-L sqrt((2L-1)!!/L!) {a}_L.

    ``a = sqrt(a . a)`` (principal branch).  Raises for isotropic vectors
    (``a . a = 0``) with ``L > 0``; use :func:`tensor_power` there.
    """
    vec = _as_tensor(a)
    v = ComplexVector3(vec.comps)
    aa = v.dot(v)
    if L > 0 and abs(aa) < 1e-300:
        raise ZeroDivisionError("harmonic normalization diverges for a . a = 0")
    scale = np.sqrt(aa + 0j) ** (-L) * math.sqrt(double_factorial(2 * L - 1) / math.factorial(L))
    return tensor_power(v, L) * scale


def spherical_dot(s: SphericalTensor, t: SphericalTensor) -> complex:
    """Scalar product sum_M (-1)**M s_M t_{-M} of two integer-rank tensors."""
    if s.two_rank != t.two_rank or s.two_rank % 2:
        raise ValueError("scalar product needs equal integer ranks")
    L = s.two_rank // 2
    signs = np.array([(-1) ** (M % 2) for M in range(L, -L - 1, -1)])
    return complex(np.sum(signs * s.comps * t.comps[::-1]))


def circular_pair(pol: Polarization) -> tuple[ComplexVector3, ComplexVector3]:
    """The two isotropic unit vectors C with C . C = 0 and C . e = 0.

    For linear polarization they are the circular vectors about the
    polarization axis.  At circular polarization the two coincide with e.
    """
    e = pol.vector
    ee = pol.scalar_square
    # rotate the phase so that e = c u + i s v with u, v real orthonormal
    xyz = e.cartesian()
    if ee < 0:
        xyz = xyz * 1j
    re, im = xyz.real, xyz.imag
    c = np.linalg.norm(re)
    u = re / c
    im = im - (im @ u) * u
    s = np.linalg.norm(im)
    if s > 1e-150:
        v = im / s
    else:
        v = np.cross(u, np.eye(3)[np.argmin(np.abs(u))])
        v /= np.linalg.norm(v)
    n = np.cross(u, v)
    x = abs(ee)
    # C = (s u + i c v +- sqrt(x) n) / sqrt(1 + x) is smooth in the ellipticity
    base = s * u + 1j * c * v
    w = math.sqrt(x) * n
    k = 1 / math.sqrt(1 + x)
    return (ComplexVector3.from_cartesian((base + w) * k),
            ComplexVector3.from_cartesian((base - w) * k))


def spinor_root(c: ComplexVector3) -> np.ndarray:
    """Spinor chi = (chi_+, chi_-) with {chi x chi}_1 = c for isotropic c.

    Only the larger end component is square-rooted; the other follows from
    c_0 = sqrt(2) chi_+ chi_-, which avoids the square root of a rounding
    residue when one end component vanishes.
    """
    p, z, m = c.comps
    if abs(p) >= abs(m):
        a = np.sqrt(p + 0j)
        return np.array([a, z / (_SQ2 * a)])
    b = np.sqrt(m + 0j)
    return np.array([z / (_SQ2 * b), b])


def spinor_power(chi: np.ndarray, two_J: int) -> SphericalTensor:
    """Stretched power of a spin-1/2 spinor, a tensor of rank two_J/2."""
    out = SphericalTensor(0, [1.0])
    s = SphericalTensor(1, chi)
    for _ in range(two_J):
        out = couple(s, out, (out.two_rank + 1) / 2)
    return out
