"""Angular-momentum algebra on half-integer momenta.

Momenta are handled internally as twice their value (``two_j``) so that
every quantity is an integer.  Clebsch-Gordan and 6j coefficients are
evaluated from the Racah sums with exact rational arithmetic and a single
floating point square root at the end, which keeps full double precision
over the supported range ``two_j <= 40`` where a log-factorial sum would
lose digits to cancellation.

Public functions accept momenta as ``int``, ``float``, ``Fraction``,
strings such as ``"3/2"`` or :class:`AngularMomentum` instances.
"""
from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Union

import numpy as np

__all__ = [
    "AngularMomentum",
    "as_two",
    "projections",
    "clebsch_gordan",
    "clebsch_gordan_exact",
    "wigner6j",
    "wigner6j_exact",
    "scaled_legendre",
    "scaled_legendre_coefficients",
    "legendre",
    "double_factorial",
    "wigner_d_small",
    "injected_cg_sign_error",
]

MAX_TWO_J = 40

MomentumLike = Union["AngularMomentum", int, float, Fraction, str]


@dataclass(frozen=True, order=True)
class AngularMomentum:
    """A non-negative half-integer momentum stored as ``two_j = 2 j``."""

    two_j: int

    def __post_init__(self):
        if not isinstance(self.two_j, (int, np.integer)) or self.two_j < 0:
            raise ValueError(f"two_j must be a non-negative integer, got {self.two_j!r}")
        object.__setattr__(self, "two_j", int(self.two_j))

    @classmethod
    def of(cls, value: MomentumLike) -> "AngularMomentum":
        if isinstance(value, AngularMomentum):
            return value
        return cls(as_two(value))

    @property
    def value(self) -> Fraction:
        return Fraction(self.two_j, 2)

    @property
    def dim(self) -> int:
        return self.two_j + 1

    @property
    def is_integer(self) -> bool:
        return self.two_j % 2 == 0

    def projections(self) -> list[int]:
        """Twice the projections, ordered from +j down to -j."""
        return projections(self.two_j)

    def __float__(self) -> float:
        return self.two_j / 2

    def __str__(self) -> str:
        return str(self.two_j // 2) if self.is_integer else f"{self.two_j}/2"


def as_two(value: MomentumLike) -> int:
    """Return twice ``value`` as an int, rejecting anything not a half-integer."""
    if isinstance(value, AngularMomentum):
        return value.two_j
    if isinstance(value, str):
        value = Fraction(value.strip())
    two = 2 * Fraction(value) if not isinstance(value, float) else 2 * value
    rounded = round(two)
    if abs(two - rounded) > 1e-9:
        raise ValueError(f"{value!r} is not a half-integer")
    return int(rounded)


def projections(two_j: int) -> list[int]:
    """Twice the projections of ``two_j``, in descending order."""
    return list(range(two_j, -two_j - 1, -2))


# Test hook: when set, a sign error is injected into the coupling
# coefficients so that identity checks can be shown to detect it.
_CG_FAULT = False


@contextlib.contextmanager
def injected_cg_sign_error() -> Iterator[None]:
    """Temporarily corrupt the sign convention of :func:`clebsch_gordan`.

    Coefficients with negative total projection are flipped, which breaks
    rotational covariance.  Caches are cleared on entry and exit.
    """
    global _CG_FAULT
    _CG_FAULT = True
    _clear_caches()
    try:
        yield
    finally:
        _CG_FAULT = False
        _clear_caches()


_CACHE_CLEARERS: list = []


def register_cache(fn):
    """Mark an lru-cached function whose values depend on the coefficients."""
    _CACHE_CLEARERS.append(fn.cache_clear)
    return fn


def _clear_caches():
    for clear in _CACHE_CLEARERS:
        clear()


def _triangle(ta: int, tb: int, tc: int) -> bool:
    return (ta + tb + tc) % 2 == 0 and abs(ta - tb) <= tc <= ta + tb


@lru_cache(maxsize=None)
def _cg_exact(tj1: int, tm1: int, tj2: int, tm2: int, tJ: int, tM: int) -> tuple[int, Fraction]:
    # Returns (sign, square) with C = sign * sqrt(square).
    if tm1 + tm2 != tM or not _triangle(tj1, tj2, tJ):
        return 0, Fraction(0)
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tM) > tJ:
        return 0, Fraction(0)
    f = math.factorial
    a = (tj1 + tj2 - tJ) // 2
    b = (tj1 - tm1) // 2
    c = (tj2 + tm2) // 2
    d = (tJ - tj2 + tm1) // 2
    e = (tJ - tj1 - tm2) // 2
    kmin = max(0, -d, -e)
    kmax = min(a, b, c)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        term = Fraction(1, f(k) * f(a - k) * f(b - k) * f(c - k) * f(d + k) * f(e + k))
        total += -term if k % 2 else term
    if total == 0:
        return 0, Fraction(0)
    pref = Fraction(
        (tJ + 1)
        * f((tJ + tj1 - tj2) // 2)
        * f((tJ - tj1 + tj2) // 2)
        * f((tj1 + tj2 - tJ) // 2)
        * f((tJ + tM) // 2)
        * f((tJ - tM) // 2)
        * f((tj1 - tm1) // 2)
        * f((tj1 + tm1) // 2)
        * f((tj2 - tm2) // 2)
        * f((tj2 + tm2) // 2),
        f((tj1 + tj2 + tJ) // 2 + 1),
    )
    sign = 1 if total > 0 else -1
    return sign, pref * total * total


def _check_parity(tj: int, tm: int):
    if (tj - tm) % 2:
        raise ValueError(f"projection {tm}/2 has the wrong parity for momentum {tj}/2")


@register_cache
@lru_cache(maxsize=None)
def _cg_two(tj1: int, tm1: int, tj2: int, tm2: int, tJ: int, tM: int) -> float:
    sign, sq = _cg_exact(tj1, tm1, tj2, tm2, tJ, tM)
    if sign == 0:
        return 0.0
    if _CG_FAULT and tM < 0:
        sign = -sign
    return sign * math.sqrt(sq)


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient <j1 m1 j2 m2 | J M> (Condon-Shortley phase).

    Out-of-range projections and violated triangle rules give 0; a
    projection of the wrong parity raises ``ValueError``.
    """
    t = [as_two(x) for x in (j1, m1, j2, m2, J, M)]
    _check_parity(t[0], t[1])
    _check_parity(t[2], t[3])
    _check_parity(t[4], t[5])
    if max(t[0], t[2], t[4]) > MAX_TWO_J:
        raise ValueError(f"momenta above {MAX_TWO_J}/2 are outside the supported range")
    return _cg_two(*t)


def clebsch_gordan_exact(j1, m1, j2, m2, J, M) -> tuple[int, Fraction]:
    """Exact coefficient as ``(sign, square)`` so that ``C = sign*sqrt(square)``."""
    t = [as_two(x) for x in (j1, m1, j2, m2, J, M)]
    return _cg_exact(*t)


def _delta(ta: int, tb: int, tc: int) -> Fraction:
    f = math.factorial
    return Fraction(
        f((ta + tb - tc) // 2) * f((ta - tb + tc) // 2) * f((-ta + tb + tc) // 2),
        f((ta + tb + tc) // 2 + 1),
    )


@lru_cache(maxsize=None)
def _sixj_exact(ta, tb, tc, td, te, tf) -> tuple[int, Fraction]:
    if not (
        _triangle(ta, tb, tc)
        and _triangle(ta, te, tf)
        and _triangle(td, tb, tf)
        and _triangle(td, te, tc)
    ):
        return 0, Fraction(0)
    f = math.factorial
    s1 = (ta + tb + tc) // 2
    s2 = (ta + te + tf) // 2
    s3 = (td + tb + tf) // 2
    s4 = (td + te + tc) // 2
    u1 = (ta + tb + td + te) // 2
    u2 = (ta + tc + td + tf) // 2
    u3 = (tb + tc + te + tf) // 2
    total = Fraction(0)
    for k in range(max(s1, s2, s3, s4), min(u1, u2, u3) + 1):
        term = Fraction(
            f(k + 1),
            f(k - s1) * f(k - s2) * f(k - s3) * f(k - s4) * f(u1 - k) * f(u2 - k) * f(u3 - k),
        )
        total += -term if k % 2 else term
    if total == 0:
        return 0, Fraction(0)
    pref = _delta(ta, tb, tc) * _delta(ta, te, tf) * _delta(td, tb, tf) * _delta(td, te, tc)
    return (1 if total > 0 else -1), pref * total * total


@register_cache
@lru_cache(maxsize=None)
def _sixj_two(ta, tb, tc, td, te, tf) -> float:
    sign, sq = _sixj_exact(ta, tb, tc, td, te, tf)
    return sign * math.sqrt(sq) if sign else 0.0


def wigner6j(j1, j2, j3, j4, j5, j6) -> float:
    """Wigner 6j symbol {j1 j2 j3; j4 j5 j6}; zero when a triangle fails."""
    t = [as_two(x) for x in (j1, j2, j3, j4, j5, j6)]
    if max(t) > MAX_TWO_J:
        raise ValueError(f"momenta above {MAX_TWO_J}/2 are outside the supported range")
    return _sixj_two(*t)


def wigner6j_exact(j1, j2, j3, j4, j5, j6) -> tuple[int, Fraction]:
    t = [as_two(x) for x in (j1, j2, j3, j4, j5, j6)]
    return _sixj_exact(*t)


def double_factorial(n: int) -> int:
    """n!! with the conventions (-1)!! = 0!! = 1."""
    if n <= 0:
        return 1
    return math.prod(range(n, 0, -2))


# Scaled Legendre polynomials Q_L(x) = x**L P_L(1/x) are polynomials in x**2.
# Coefficients are tabulated exactly up to L = 41, enough for 2J+1 with J <= 20.
MAX_LEGENDRE = 41


@lru_cache(maxsize=None)
def _legendre_coeffs_exact(L: int) -> tuple[Fraction, ...]:
    f = math.factorial
    return tuple(
        Fraction((-1) ** k * f(2 * L - 2 * k), 2**L * f(k) * f(L - k) * f(L - 2 * k))
        for k in range(L // 2 + 1)
    )


def scaled_legendre_coefficients(L: int) -> np.ndarray:
    """Coefficients c_k with Q_L(x) = sum_k c_k x**(2k)."""
    if not 0 <= L <= MAX_LEGENDRE:
        raise ValueError(f"L must lie in [0, {MAX_LEGENDRE}], got {L}")
    return np.array([float(c) for c in _legendre_coeffs_exact(L)])


def scaled_legendre(L: int, x):
    """Q_L(x) = x**L P_L(1/x), finite at x = 0 where it equals (2L-1)!!/L!.

    Accepts real or complex scalars and arrays.
    """
    coeffs = scaled_legendre_coefficients(L)
    x2 = np.asarray(x) ** 2
    out = np.zeros_like(x2, dtype=np.result_type(x2, float))
    for c in coeffs[::-1]:
        out = out * x2 + c
    return out[()] if out.ndim == 0 else out


def legendre(L: int, y):
    """Legendre polynomial P_L(y) by the three-term recurrence."""
    y = np.asarray(y)
    p_prev, p = np.ones_like(y, dtype=np.result_type(y, float)), y.astype(np.result_type(y, float))
    if L == 0:
        return p_prev[()] if p_prev.ndim == 0 else p_prev
    for n in range(1, L):
        p_prev, p = p, ((2 * n + 1) * y * p - n * p_prev) / (n + 1)
    return p[()] if p.ndim == 0 else p


def wigner_d_small(j: MomentumLike, theta: float) -> np.ndarray:
    """Rotation matrix d^j_{m'm}(theta) = <j m'| exp(-i theta J_y) |j m>.

    Rows are m' and columns m, both in descending order.
    """
    tj = as_two(j)
    ms = projections(tj)
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    f = math.factorial
    d = np.zeros((tj + 1, tj + 1))
    for a, tmp in enumerate(ms):
        for b, tm in enumerate(ms):
            jpm, jmm = (tj + tmp) // 2, (tj - tmp) // 2  # j+m', j-m'
            jp, jn = (tj + tm) // 2, (tj - tm) // 2  # j+m, j-m
            diff = (tmp - tm) // 2  # m'-m
            total = 0.0
            for k in range(max(0, -diff), min(jp, jmm) + 1):
                sign = -1.0 if (diff + k) % 2 else 1.0
                total += (
                    sign
                    * c ** (jp + jmm - 2 * k)
                    * s ** (diff + 2 * k)
                    / (f(jp - k) * f(k) * f(diff + k) * f(jmm - k))
                )
            d[a, b] = math.sqrt(f(jpm) * f(jmm) * f(jp) * f(jn)) * total
    return d
