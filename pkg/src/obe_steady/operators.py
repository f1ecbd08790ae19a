"""Level operators for a Jg -> Je dipole transition.

Operators are plain complex ``numpy`` arrays.  Rows index the bra level
(the level the operator maps into) and columns the ket level, each in
Zeeman order ``mu = +J, ..., -J``.  A raising operator such as ``V`` is
therefore ``(2Je+1) x (2Jg+1)``.

Rank-L operators ``V_L^{ab}(a) = sum_M (-1)**M T_LM^{ab} n_{L,-M}(a)`` come in
two normalizations: ``"harmonic"`` uses the harmonic-normalized powers
``n_L``, ``"tensor"`` the bare tensor powers ``{a}_L``.  The two differ by
the scalar ``(a . a)**(-L/2) sqrt((2L-1)!!/L!)``, which diverges for
circular polarization; the tensor form stays finite there.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .angular import as_two, clebsch_gordan, double_factorial, projections, register_cache, wigner6j
from .polarization import ComplexVector3, Polarization, tensor_power

__all__ = [
    "dipole_components",
    "coupling_operator",
    "tensor_operator",
    "harmonic_scale",
    "v_l_operator",
    "tilde_coupling",
    "raising_operators",
    "light_shifts",
    "product_coefficient",
    "expansion_coefficients",
    "expansion_coefficients_closed_form",
    "inverse_coupling",
    "x_operator",
    "natural_frame_coupling",
    "natural_frame_inverse",
    "natural_frame_inverse_vv",
    "natural_frame_raising",
    "natural_frame_pseudoinverse",
    "natural_frame_x",
]


def _vector(e) -> ComplexVector3:
    if isinstance(e, Polarization):
        return e.vector
    if isinstance(e, ComplexVector3):
        return e
    return ComplexVector3(e)


@register_cache
@lru_cache(maxsize=None)
def _dipole(tg: int, te: int) -> dict:
    out = {}
    for q in (-1, 0, 1):
        d = np.zeros((te + 1, tg + 1))
        for i, tme in enumerate(projections(te)):
            tmg = tme - 2 * q
            if abs(tmg) <= tg:
                d[i, (tg - tmg) // 2] = clebsch_gordan(tg / 2, tmg / 2, 1, q, te / 2, tme / 2)
        d.setflags(write=False)
        out[q] = d
    return out


def dipole_components(Jg, Je) -> dict[int, np.ndarray]:
    """Spherical components D_q of the dipole operator, keyed by q = -1, 0, +1.

    ``D_q[mu_e, mu_g] = <Jg mu_g 1 q | Je mu_e>``.  They satisfy
    ``sum_q D_q D_q^dagger = Pi_e``.
    """
    tg, te = as_two(Jg), as_two(Je)
    if abs(tg - te) > 2 or (tg - te) % 2 or tg + te == 0:
        raise ValueError(f"{Jg} -> {Je} is not a dipole-allowed transition")
    return _dipole(tg, te)


def coupling_operator(Jg, Je, e) -> np.ndarray:
    """V = D . e = sum_q (-1)**q e_{-q} D_q."""
    v = _vector(e)
    D = dipole_components(Jg, Je)
    return sum((-1) ** q * v.component(-q) * D[q] for q in (-1, 0, 1))


@register_cache
@lru_cache(maxsize=None)
def _tensor_op(ta: int, tb: int, L: int) -> np.ndarray:
    out = np.zeros((2 * L + 1, ta + 1, tb + 1))
    for k, M in enumerate(range(L, -L - 1, -1)):
        for i, tma in enumerate(projections(ta)):
            tmb = tma - 2 * M
            if abs(tmb) > tb:
                continue
            j = (tb - tmb) // 2
            sign = -1 if ((tb - tmb) // 2) % 2 else 1
            out[k, i, j] = sign * clebsch_gordan(ta / 2, tma / 2, tb / 2, -tmb / 2, L, M)
    out.setflags(write=False)
    return out


def tensor_operator(Ja, Jb, L: int) -> np.ndarray:
    """Wigner tensor operators T_LM^{ab}, stacked over M = L, ..., -L.

    ``T_LM[mu_a, mu_b] = (-1)**(Jb - mu_b) <Ja mu_a Jb -mu_b | L M>``.
    """
    return _tensor_op(as_two(Ja), as_two(Jb), int(L))


def harmonic_scale(L: int, aa: complex) -> complex:
    """Factor turning {a}_L into n_L(a): (a . a)**(-L/2) sqrt((2L-1)!!/L!)."""
    return np.sqrt(complex(aa)) ** (-L) * math.sqrt(double_factorial(2 * L - 1) / math.factorial(L))


def v_l_operator(Ja, Jb, L: int, a, normalization: str = "harmonic") -> np.ndarray:
    """Rank-L operator sum_M (-1)**M T_LM^{ab} n_{L,-M}(a).

    ``normalization="tensor"`` replaces n_L by the bare power {a}_L.
    ``"auto"`` behaves as ``"harmonic"`` unless a . a vanishes.
    """
    v = _vector(a)
    T = tensor_operator(Ja, Jb, L)
    comps = tensor_power(v, L).comps
    signs = np.array([(-1) ** (M % 2) for M in range(L, -L - 1, -1)])
    op = np.einsum("k,kij->ij", signs * comps[::-1], T)
    if normalization == "tensor":
        return op
    aa = v.dot(v)
    if normalization == "auto" and abs(aa) < 1e-14:
        return op
    if normalization not in ("harmonic", "auto"):
        raise ValueError(f"unknown normalization {normalization!r}")
    if L > 0 and abs(aa) < 1e-300:
        raise ZeroDivisionError("harmonic normalization diverges for a . a = 0; use 'auto' or 'tensor'")
    return op * harmonic_scale(L, aa)


def tilde_coupling(Jg, Je, e) -> np.ndarray:
    """Lowering counterpart of V: sqrt(3/(2Je+1)) times V_1^{ge}(e) in tensor form."""
    te = as_two(Je)
    return math.sqrt((te + 1) / 3) * v_l_operator(Jg, Je, 1, e, "tensor")


def raising_operators(Jg, Je, e, normalization: str = "harmonic") -> tuple[np.ndarray, np.ndarray]:
    """Raising operator W and its lowering partner W~ for bright-state classes.

    Jg = Je half-integer: rank-0 operators, proportional to the identity.
    Je = Jg + 1: rank 2Jg+1 operators.
    """
    tg, te = as_two(Jg), as_two(Je)
    if tg == te and tg % 2 == 1:
        L = 0
    elif te == tg + 2:
        L = tg + 1
    else:
        raise ValueError(f"{Jg} -> {Je} has a dark state; no raising operator")
    W = v_l_operator(Je, Jg, L, e, normalization)
    Wt = v_l_operator(Jg, Je, L, e, normalization)
    return W, Wt


def light_shifts(V: np.ndarray, detuning: float, saturation: float) -> tuple[np.ndarray, np.ndarray]:
    """Ground and excited light-shift operators (delta S V^+V, -delta S V V^+)."""
    Vh = V.conj().T
    return detuning * saturation * (Vh @ V), -detuning * saturation * (V @ Vh)


def product_coefficient(kind: str, J, L: int, K: int) -> float:
    """E(L, K) in V_1 V_L = sum_K E(L, K) V_K for the two bright classes.

    ``kind="equal"`` is Jg = Je = J (product V_1^{eg} V_L^{ge}),
    ``kind="raise"`` is Je = J + 1 (product V_1^{eg} V_L^{gg}).
    """
    tJ = as_two(J)
    cg = clebsch_gordan(1, 0, L, 0, K, 0)
    if kind == "equal":
        sign = (-1) ** ((tJ + L + 1) % 2)
        sixj = wigner6j(K, 1, L, tJ / 2, tJ / 2, tJ / 2)
    elif kind == "raise":
        sign = (-1) ** ((tJ + L) % 2)
        sixj = wigner6j(K, 1, L, tJ / 2, tJ / 2, tJ / 2 + 1)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return sign * math.sqrt(3 * (2 * L + 1)) * sixj * cg


def _kind(Jg, Je) -> tuple[str, int]:
    tg, te = as_two(Jg), as_two(Je)
    if tg == te and tg % 2 == 1:
        return "equal", tg
    if te == tg + 2:
        return "raise", tg
    raise ValueError(f"{Jg} -> {Je} has no invertible coupling expansion")


def expansion_coefficients(Jg, Je) -> np.ndarray:
    """Coefficients C_L, L = 0..2J, solving the two-term recurrence.

    The recurrence is solved as an (overdetermined, consistent) linear
    system by least squares.
    """
    kind, tJ = _kind(Jg, Je)
    nL = tJ + 1
    nK = tJ + 2 if kind == "raise" else tJ + 1
    A = np.zeros((nK, nL))
    for K in range(nK):
        for L in (K - 1, K + 1):
            if 0 <= L < nL:
                A[K, L] = product_coefficient(kind, tJ / 2, L, K)
    rhs = np.zeros(nK)
    if kind == "raise":
        rhs[tJ + 1] = 1.0
    else:
        rhs[0] = math.sqrt(tJ + 1)
    # The rank-0 row is void for the raising class (no V_0^{eg} exists).
    C, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    C[np.abs(C) < 1e-14 * np.max(np.abs(C))] = 0.0
    return C


def expansion_coefficients_closed_form(Jg, Je) -> np.ndarray:
    kind, tJ = _kind(Jg, Je)
    f, df = math.factorial, double_factorial
    C = np.zeros(tJ + 1)
    for L in range(tJ + 1):
        if (L - tJ) % 2:
            continue
        if kind == "raise":
            C[L] = math.sqrt(
                (2 * L + 1) * (tJ + 3) / (3 * (tJ + 1)) * f(tJ - L) * f(tJ + L + 1) / f(2 * tJ + 1)
            )
        else:
            sign = -1 if ((L - 1) // 2) % 2 else 1
            C[L] = (
                sign
                * df(L - 1)
                / df(L)
                * math.sqrt(
                    (2 * L + 1) * tJ * (tJ + 1) * (tJ + 2) / 3
                    * df(tJ + L) * df(tJ - L - 1) / (df(tJ - L) * df(tJ + L + 1))
                )
            )
    return C


def inverse_coupling(J, e, coefficients=None) -> np.ndarray:
    """V^{-1} for Jg = Je = J half-integer from the invariant expansion.

    Summing rank-L operators in tensor form with the scalar factors
    folded in keeps full relative accuracy even when V is nearly singular
    (close to circular polarization), where a numerical inverse fails.
    """
    v = _vector(e)
    tJ = as_two(J)
    if tJ % 2 == 0:
        raise ValueError("the coupling operator is singular for integer J")
    x = v.dot(v)
    if abs(x) < 1e-300:
        raise ZeroDivisionError("V is singular for circular polarization")
    C = expansion_coefficients_closed_form(J, J) if coefficients is None else coefficients
    out = np.zeros((tJ + 1, tJ + 1), dtype=complex)
    for L in range(1, tJ + 1, 2):
        h = math.sqrt(double_factorial(2 * L - 1) / math.factorial(L))
        out += C[L] * h * x ** (-(L + 1) // 2) * v_l_operator(J, J, L, v, "tensor")
    return math.sqrt(3 / (tJ + 1)) * out


def x_operator(J, e, normalization: str = "tensor", method: str = "expansion", ranks=None) -> np.ndarray:
    """X with V X = W for Je = Jg + 1 = J + 1.

    ``normalization`` must match that of W.  ``method="expansion"`` sums
    the invariant series, ``"pseudoinverse"`` uses (V^+V)^{-1} V^+ W.
    ``ranks`` keeps only the listed terms of the series (truncation
    studies); the result then no longer satisfies V X = W exactly.
    """
    v = _vector(e)
    tJ = as_two(J)
    Je = tJ / 2 + 1
    x = v.dot(v)
    if method == "pseudoinverse":
        V = coupling_operator(J, Je, v)
        W, _ = raising_operators(J, Je, v, normalization)
        return np.linalg.solve(V.conj().T @ V, V.conj().T @ W)
    if method != "expansion":
        raise ValueError(f"unknown method {method!r}")
    C = expansion_coefficients_closed_form(J, Je)
    h_top = math.sqrt(double_factorial(2 * tJ + 1) / math.factorial(tJ + 1))
    out = np.zeros((tJ + 1, tJ + 1), dtype=complex)
    for L in range(tJ % 2, tJ + 1, 2):
        if ranks is not None and L not in ranks:
            continue
        h = math.sqrt(double_factorial(2 * L - 1) / math.factorial(L))
        out += C[L] * h * x ** ((tJ - L) // 2) * v_l_operator(J, J, L, v, "tensor")
    out *= math.sqrt(3 / (tJ + 3)) / h_top
    if normalization == "tensor":
        return out
    return out * harmonic_scale(tJ + 1, x)


# Closed forms in the natural frame (polarization_from_ellipticity with
# Frame.NATURAL_PLUS).  Index helpers map a projection to its row.


def _row(two_j: int, two_m: int) -> int:
    return (two_j - two_m) // 2


def natural_frame_coupling(Jg, Je, epsilon: float) -> np.ndarray:
    """Two-diagonal V for the bright classes, written out explicitly."""
    kind, tJ = _kind(Jg, Je)
    J = tJ / 2
    c2, s = math.cos(2 * epsilon), math.sin(epsilon)
    if kind == "equal":
        V = np.zeros((tJ + 1, tJ + 1))
        for tm in projections(tJ):
            mu = tm / 2
            V[_row(tJ, tm), _row(tJ, tm)] = mu / math.sqrt(J * (J + 1)) * math.sqrt(c2)
            if tm - 2 >= -tJ:
                V[_row(tJ, tm), _row(tJ, tm - 2)] = -math.sqrt(
                    (J + mu) * (J - mu + 1) / (J * (J + 1))
                ) * s
        return V
    V = np.zeros((tJ + 3, tJ + 1))
    for tm in projections(tJ + 2):
        mu = tm / 2
        if abs(tm) <= tJ:
            V[_row(tJ + 2, tm), _row(tJ, tm)] = math.sqrt(
                (J + 1 - mu) * (J + 1 + mu) / ((J + 1) * (2 * J + 1))
            ) * math.sqrt(c2)
        if abs(tm - 2) <= tJ:
            V[_row(tJ + 2, tm), _row(tJ, tm - 2)] = math.sqrt(
                (J + mu) * (J + 1 + mu) / ((J + 1) * (2 * J + 1))
            ) * s
    return V


def _prod_ratio(J: float, lo2: int, hi2: int) -> float:
    # prod_{alpha = lo+1}^{hi} sqrt((J+alpha)(J-alpha+1))/alpha over twice-values
    out = 1.0
    for t in range(lo2 + 2, hi2 + 1, 2):
        a = t / 2
        out *= math.sqrt((J + a) * (J - a + 1)) / a
    return out


def natural_frame_inverse(J, epsilon: float) -> np.ndarray:
    """Explicit V^{-1} for Jg = Je = J half-integer."""
    tJ = as_two(J)
    j = tJ / 2
    c2 = math.cos(2 * epsilon)
    t = math.sin(epsilon) / math.sqrt(c2)
    out = np.zeros((tJ + 1, tJ + 1))
    for tm in projections(tJ):
        for tmp in projections(tJ):
            if tmp > tm:
                continue
            out[_row(tJ, tm), _row(tJ, tmp)] = (
                math.sqrt(j * (j + 1) / c2) * t ** ((tm - tmp) // 2) / (tmp / 2)
                * _prod_ratio(j, tmp, tm)
            )
    return out


def natural_frame_inverse_vv(J, epsilon: float) -> np.ndarray:
    """Explicit (V^+ V)^{-1} for Jg = Je = J half-integer."""
    tJ = as_two(J)
    j = tJ / 2
    c2 = math.cos(2 * epsilon)
    t = math.sin(epsilon) / math.sqrt(c2)
    out = np.zeros((tJ + 1, tJ + 1))
    for tm in projections(tJ):
        for tmp in projections(tJ):
            total = 0.0
            for tn in projections(tJ):
                if tn > tm or tn > tmp:
                    continue
                total += (
                    t ** ((tm + tmp - 2 * tn) // 2) / (tn / 2) ** 2
                    * _prod_ratio(j, tn, tm) * _prod_ratio(j, tn, tmp)
                )
            out[_row(tJ, tm), _row(tJ, tmp)] = j * (j + 1) / c2 * total
    return out


def natural_frame_raising(J, epsilon: float) -> np.ndarray:
    """Explicit W for Je = J + 1 in the natural frame.

    These elements equal ``sqrt(2(2J+1))`` times the harmonic W of
    :func:`raising_operators`.  The common factor cancels in the density
    matrix, which only depends on W and X through ratios.
    """
    tJ = as_two(J)
    j = tJ / 2
    f = math.factorial
    t = math.sin(epsilon) / math.sqrt(math.cos(2 * epsilon))
    W = np.zeros((tJ + 3, tJ + 1))
    for tmu in projections(tJ + 2):
        for tm in projections(tJ):
            d = (tmu - tm) // 2
            if d < 0:
                continue
            mu, m = tmu / 2, tm / 2
            sign = -1 if ((tJ - tm) // 2) % 2 else 1
            W[_row(tJ + 2, tmu), _row(tJ, tm)] = (
                sign
                * f(tJ + 1 + d) / f(d)
                * math.sqrt(
                    f(tJ + 2) * f(tJ)
                    / (
                        f(2 * tJ + 1)
                        * f(round(j + 1 + mu)) * f(round(j + 1 - mu))
                        * f(round(j + m)) * f(round(j - m))
                    )
                )
                * t**d
            )
    return W


def natural_frame_pseudoinverse(J, epsilon: float) -> np.ndarray:
    """Explicit pseudoinverse U (V U V = V) for Je = J + 1."""
    tJ = as_two(J)
    j = tJ / 2
    c2 = math.cos(2 * epsilon)
    t = math.sin(epsilon) / math.sqrt(c2)
    U = np.zeros((tJ + 1, tJ + 3))
    for tm in projections(tJ):
        for tmu in projections(tJ):
            if tm < tmu:
                continue
            mu = tmu / 2
            prod = 1.0
            for tn in range(tmu + 2, tm + 1, 2):
                nu = tn / 2
                prod *= math.sqrt((j + nu) / (j + 1 - nu))
            U[_row(tJ, tm), _row(tJ + 2, tmu)] = (
                math.sqrt((j + 1) * (2 * j + 1) / ((j + 1 + mu) * (j + 1 - mu) * c2))
                * (-t) ** ((tm - tmu) // 2)
                * prod
            )
    return U


def natural_frame_x(J, epsilon: float) -> np.ndarray:
    """Explicit X for Je = J + 1 in the natural frame.

    Scaled like :func:`natural_frame_raising`, i.e. ``sqrt(2(2J+1))``
    times the harmonic X, so that ``V X = W`` holds between the two.
    """
    tJ = as_two(J)
    j = tJ / 2
    f = math.factorial
    c2 = math.cos(2 * epsilon)
    t = math.sin(epsilon) / math.sqrt(c2)
    X = np.zeros((tJ + 1, tJ + 1))
    for tm in projections(tJ):
        for tmp in projections(tJ):
            if tm < tmp:
                continue
            m, mp = tm / 2, tmp / 2
            total = 0.0
            for tmu in range(tmp, tm + 1, 2):
                mu = tmu / 2
                sign = -1 if round(j - mu) % 2 else 1
                total += sign * f(round(2 * j + 1 + mu - mp)) / (
                    f(round(mu - mp)) * f(round(j + 1 + mu)) * f(round(j + 1 - mu))
                )
            X[_row(tJ, tm), _row(tJ, tmp)] = (
                math.sqrt(
                    (j + 1) * f(tJ + 1) * f(tJ + 2) * f(round(j + m)) * f(round(j - m))
                    / (f(2 * tJ + 1) * f(round(j + mp)) * f(round(j - mp)) * c2)
                )
                * (-t) ** ((tm - tmp) // 2)
                * total
            )
    return X
