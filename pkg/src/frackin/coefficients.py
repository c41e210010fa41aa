"""Model coefficients Q0, Lambda, D, the dual weight chi0 and derived constants.

The tails of every coefficient are exact power laws.  Inside ``|y| <= M0`` the
functions are flat plateaus, joined to the tails by cubic Hermite blends on
``M0 <= |y| <= M0 + w`` so that the result is C^1 everywhere.
"""
from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import InvalidInputError, QuadratureError

__all__ = [
    "CoefficientSet",
    "ScalingContext",
    "ValidationReport",
    "Violation",
    "validate_parameters",
    "eval_Q0",
    "eval_dQ0",
    "Q0_cdf",
    "Q0_mass",
    "chi0_increment",
    "eval_Lambda",
    "eval_dLambda",
    "eval_D",
    "eval_dD",
    "eval_chi0",
    "chi0_infinity",
    "compute_B0",
    "compute_mu",
    "compute_nu",
    "compute_C_minus",
]

# Interior tumbling level.  With 2 the interior's O(eps^(1-mu)) share of the
# pre-limit flux multiplier roughly offsets the tail's deficit already at
# moderate eps; with 1 it overshoots the limit by ~40% at eps = 0.02.
DEFAULT_LAMBDA_PLATEAU = 2.0

# Gauss-Legendre panels used on the blend segments
_GL_ORDER = 40
_GL_PANELS = 8


def _hermite(t, p0, p1, m0, m1, h):
    t2 = t * t
    t3 = t2 * t
    return ((2 * t3 - 3 * t2 + 1) * p0 + (t3 - 2 * t2 + t) * h * m0
            + (-2 * t3 + 3 * t2) * p1 + (t3 - t2) * h * m1)


def _hermite_deriv(t, p0, p1, m0, m1, h):
    t2 = t * t
    return ((6 * t2 - 6 * t) * p0 / h + (3 * t2 - 4 * t + 1) * m0
            + (-6 * t2 + 6 * t) * p1 / h + (3 * t2 - 2 * t) * m1)


@dataclass(frozen=True)
class CoefficientSet:
    """Structural parameters of the coefficient family.

    ``lambda_plateau`` and ``d_plateau`` are the interior values of Lambda
    (on ``y >= -M0``) and of D (on ``|y| <= M0``).  When left as ``None`` they
    default to ``DEFAULT_LAMBDA_PLATEAU`` and ``A1 * M0**(n+1)``.  ``q0_interior_amplitude`` is not
    an input: it is solved so that Q0 integrates to one.
    """

    sigma: float
    beta: float
    gamma: float
    n_exp: float
    s_exp: float
    M0: float
    c_plus: float
    c_minus: float
    A0: float
    A1: float
    V0: float
    interior_blend_width: float = 0.5
    lambda_plateau: float | None = None
    d_plateau: float | None = None
    q0_interior_amplitude: float = field(init=False, default=float("nan"))

    # names accepted in the [coefficients] config section
    INPUT_FIELDS = (
        "sigma", "beta", "gamma", "n_exp", "s_exp", "M0", "c_plus", "c_minus",
        "A0", "A1", "V0", "interior_blend_width", "lambda_plateau", "d_plateau",
    )

    def __post_init__(self):
        bad = []
        for name in self.INPUT_FIELDS:
            val = getattr(self, name)
            if val is None:
                continue
            try:
                val = float(val)
            except (TypeError, ValueError):
                bad.append(f"{name}={val!r} is not a number")
                continue
            if not math.isfinite(val):
                bad.append(f"{name}={val} is not finite")
            object.__setattr__(self, name, val)
        for name in ("c_plus", "c_minus", "A0", "A1", "V0", "interior_blend_width"):
            if getattr(self, name) <= 0:
                bad.append(f"{name} must be > 0")
        if self.M0 <= 1:
            bad.append("M0 must be > 1")
        if self.sigma <= 0 or self.beta <= 0 or self.n_exp <= 0:
            bad.append("sigma, beta, n_exp must be > 0")
        for name in ("lambda_plateau", "d_plateau"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                bad.append(f"{name} must be > 0")
        if bad:
            raise InvalidInputError("; ".join(bad))
        if self.lambda_plateau is None:
            object.__setattr__(self, "lambda_plateau", DEFAULT_LAMBDA_PLATEAU)
        if self.d_plateau is None:
            object.__setattr__(self, "d_plateau", self.A1 * self.M0 ** (self.n_exp + 1))
        object.__setattr__(self, "q0_interior_amplitude", self._solve_amplitude())

    # -- geometry ---------------------------------------------------------
    @property
    def edge(self) -> float:
        """Start of the exact tail branches, ``M0 + blend width``."""
        return self.M0 + self.interior_blend_width

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.INPUT_FIELDS}

    def replace(self, **changes) -> "CoefficientSet":
        kw = self.as_dict()
        kw.update(changes)
        return CoefficientSet(**kw)

    def _solve_amplitude(self) -> float:
        # int Q0 is affine in the plateau amplitude
        m0, w, sig = self.M0, self.interior_blend_width, self.sigma
        R = self.edge
        tails = (self.c_plus + self.c_minus) * R ** (1 - sig) / (sig - 1) if sig > 1 else math.inf
        if not math.isfinite(tails):
            raise InvalidInputError("sigma <= 1: Q0 tails are not integrable")
        # Hermite blend integrals: int_0^1 h00 = 1/2, h10 = 1/12, h01 = 1/2, h11 = -1/12
        def blend_int(p0, p1, m0_, m1_):
            return w * (0.5 * p0 + 0.5 * p1 + w * m0_ / 12 - w * m1_ / 12)

        tp = self.c_plus * R ** -sig
        tm = self.c_minus * R ** -sig
        dtp = -sig * self.c_plus * R ** (-sig - 1)
        # right blend from (a, 0) at M0 to (tp, dtp) at R; left blend mirrored
        const = blend_int(0.0, tp, 0.0, dtp) + blend_int(0.0, tm, 0.0, dtp * self.c_minus / self.c_plus)
        slope = 2 * m0 + 2 * (0.5 * w)
        amp = (1.0 - tails - const) / slope
        if amp <= 0:
            raise InvalidInputError(
                f"tail amplitudes c+={self.c_plus}, c-={self.c_minus} carry mass "
                f"{tails + const:.6g} >= 1; Q0 cannot be normalized"
            )
        return amp


def _as_array(y):
    arr = np.asarray(y, dtype=float)
    return arr, arr.ndim == 0


def _ret(out, scalar):
    return float(out) if scalar else out


# -- Q0 ---------------------------------------------------------------------
def _q0_parts(c: CoefficientSet, y: np.ndarray, deriv: bool):
    a = c.q0_interior_amplitude
    sig, R, w = c.sigma, c.edge, c.interior_blend_width
    ay = np.abs(y)
    out = np.empty_like(y)
    right = y >= R
    left = y <= -R
    inner = ay <= c.M0
    blend_r = (y > c.M0) & ~right
    blend_l = (y < -c.M0) & ~left
    if not deriv:
        out[right] = c.c_plus * ay[right] ** -sig
        out[left] = c.c_minus * ay[left] ** -sig
        out[inner] = a
    else:
        out[right] = -sig * c.c_plus * ay[right] ** (-sig - 1)
        out[left] = sig * c.c_minus * ay[left] ** (-sig - 1)
        out[inner] = 0.0
    f = _hermite_deriv if deriv else _hermite
    # right blend: t from 0 at M0 to 1 at R
    t = (y[blend_r] - c.M0) / w
    out[blend_r] = f(t, a, c.c_plus * R ** -sig, 0.0, -sig * c.c_plus * R ** (-sig - 1), w)
    # left blend: parametrised from -R (t=0) to -M0 (t=1)
    t = (y[blend_l] + R) / w
    out[blend_l] = f(t, c.c_minus * R ** -sig, a, sig * c.c_minus * R ** (-sig - 1), 0.0, w)
    return out


def eval_Q0(coeffs: CoefficientSet, y):
    """Equilibrium law of the internal state."""
    arr, scalar = _as_array(y)
    return _ret(_q0_parts(coeffs, np.atleast_1d(arr), False).reshape(arr.shape), scalar)


def Q0_cdf(coeffs: CoefficientSet, y):
    """``int_{-inf}^y Q0``; closed form except on the blend segments (Gauss-Legendre)."""
    c = coeffs
    arr, scalar = _as_array(y)
    flat = np.atleast_1d(arr).astype(float)
    R, m, sig, a = c.edge, c.M0, c.sigma, c.q0_interior_amplitude
    left_mass = c.c_minus * R ** (1 - sig) / (sig - 1)
    f = lambda z: eval_Q0(c, z)
    at_mM = left_mass + _gl_integrate(f, -R, -m)
    at_M = at_mM + 2 * m * a
    at_R = at_M + _gl_integrate(f, m, R)
    out = np.empty_like(flat)
    lt, rt = flat <= -R, flat >= R
    lb, rb = (flat > -R) & (flat < -m), (flat > m) & (flat < R)
    mid = (flat >= -m) & (flat <= m)
    out[lt] = c.c_minus * np.abs(flat[lt]) ** (1 - sig) / (sig - 1)
    if np.any(lb):
        out[lb] = left_mass + _gl_integrate_many(f, -R, flat[lb])
    out[mid] = at_mM + (flat[mid] + m) * a
    if np.any(rb):
        out[rb] = at_M + _gl_integrate_many(f, m, flat[rb])
    out[rt] = at_R + c.c_plus * (R ** (1 - sig) - flat[rt] ** (1 - sig)) / (sig - 1)
    return _ret(out.reshape(arr.shape), scalar)


def Q0_mass(coeffs: CoefficientSet, a, b) -> np.ndarray:
    """``int_a^b Q0`` elementwise, without cancellation in either tail."""
    c = coeffs
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    R, sig = c.edge, c.sigma
    out = np.empty(np.broadcast(a, b).shape)
    a, b = np.broadcast_to(a, out.shape), np.broadcast_to(b, out.shape)
    lt = b <= -R
    out[lt] = c.c_minus * (np.abs(b[lt]) ** (1 - sig) - np.abs(a[lt]) ** (1 - sig)) / (sig - 1)
    rt = a >= R
    out[rt] = c.c_plus * (a[rt] ** (1 - sig) - b[rt] ** (1 - sig)) / (sig - 1)
    rest = ~lt & ~rt
    if np.any(rest):
        out[rest] = Q0_cdf(c, b[rest]) - Q0_cdf(c, a[rest])
    return out


def chi0_increment(coeffs: CoefficientSet, a, b) -> np.ndarray:
    """``chi0(b) - chi0(a)`` elementwise, exact in the tails (no cancellation near chi0(+inf))."""
    c = coeffs
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    R, e = c.edge, c.sigma - c.n_exp
    tab = _chi_table(c)
    out = np.empty(np.broadcast(a, b).shape)
    a, b = np.broadcast_to(a, out.shape), np.broadcast_to(b, out.shape)
    lt = b <= -R
    out[lt] = tab.C_minus * (np.abs(b[lt]) ** e - np.abs(a[lt]) ** e)
    rt = a >= R
    out[rt] = tab.C_plus * (a[rt] ** e - b[rt] ** e)
    rest = ~lt & ~rt
    if np.any(rest):
        out[rest] = tab(b[rest].copy()) - tab(a[rest].copy())
    return out


def eval_dQ0(coeffs: CoefficientSet, y):
    arr, scalar = _as_array(y)
    return _ret(_q0_parts(coeffs, np.atleast_1d(arr), True).reshape(arr.shape), scalar)


# -- Lambda -----------------------------------------------------------------
def _lambda_parts(c: CoefficientSet, y: np.ndarray, deriv: bool):
    b, R, w, top = c.beta, c.edge, c.interior_blend_width, c.lambda_plateau
    out = np.empty_like(y)
    left = y <= -R
    flat = y >= -c.M0
    blend = ~left & ~flat
    ay = np.abs(y[left])
    out[left] = b * ay ** (-b - 1) if deriv else ay ** -b
    out[flat] = 0.0 if deriv else top
    t = (y[blend] + R) / w
    f = _hermite_deriv if deriv else _hermite
    out[blend] = f(t, R ** -b, top, b * R ** (-b - 1), 0.0, w)
    return out


def eval_Lambda(coeffs: CoefficientSet, y):
    """Tumbling rate: ``|y|^-beta`` deep in the negative tail, a plateau for ``y >= -M0``."""
    arr, scalar = _as_array(y)
    return _ret(_lambda_parts(coeffs, np.atleast_1d(arr), False).reshape(arr.shape), scalar)


def eval_dLambda(coeffs: CoefficientSet, y):
    arr, scalar = _as_array(y)
    return _ret(_lambda_parts(coeffs, np.atleast_1d(arr), True).reshape(arr.shape), scalar)


# -- D ----------------------------------------------------------------------
def _d_parts(c: CoefficientSet, y: np.ndarray, deriv: bool):
    p, R, w, A1, d0 = c.n_exp + 1, c.edge, c.interior_blend_width, c.A1, c.d_plateau
    ay = np.abs(y)
    sgn = np.sign(y)
    out = np.empty_like(y)
    tail = ay >= R
    inner = ay <= c.M0
    blend = ~tail & ~inner
    if deriv:
        out[tail] = sgn[tail] * A1 * p * ay[tail] ** (p - 1)
        out[inner] = 0.0
        t = (ay[blend] - c.M0) / w
        out[blend] = sgn[blend] * _hermite_deriv(t, d0, A1 * R ** p, 0.0, A1 * p * R ** (p - 1), w)
    else:
        out[tail] = A1 * ay[tail] ** p
        out[inner] = d0
        t = (ay[blend] - c.M0) / w
        out[blend] = _hermite(t, d0, A1 * R ** p, 0.0, A1 * p * R ** (p - 1), w)
    return out


def eval_D(coeffs: CoefficientSet, y):
    """Internal-state diffusion coefficient, ``A1 |y|^(n+1)`` in the tails."""
    arr, scalar = _as_array(y)
    return _ret(_d_parts(coeffs, np.atleast_1d(arr), False).reshape(arr.shape), scalar)


def eval_dD(coeffs: CoefficientSet, y):
    arr, scalar = _as_array(y)
    return _ret(_d_parts(coeffs, np.atleast_1d(arr), True).reshape(arr.shape), scalar)


# -- chi0 -------------------------------------------------------------------
def compute_C_minus(coeffs: CoefficientSet) -> float:
    """Amplitude of ``chi0 ~ C^- |y|^(sigma-n)`` as ``y -> -inf``."""
    return 1.0 / (coeffs.c_minus * coeffs.A1 * (coeffs.n_exp - coeffs.sigma))


@functools.lru_cache(maxsize=8)
def _gl_nodes(order: int):
    return leggauss(order)


def _gl_integrate(f, a: float, b: float, order: int = _GL_ORDER, panels: int = _GL_PANELS) -> float:
    return float(_gl_integrate_many(f, a, np.array([b], dtype=float), order, panels)[0])


def _gl_integrate_many(f, a: float, b: np.ndarray, order: int = _GL_ORDER, panels: int = _GL_PANELS) -> np.ndarray:
    """``int_a^b_i f`` for every upper limit at once (one vectorized call of ``f``)."""
    x, wts = _gl_nodes(order)
    b = np.asarray(b, dtype=float)
    frac = np.linspace(0.0, 1.0, panels + 1)
    edges = a + (b - a)[:, None] * frac[None, :]
    mid = 0.5 * (edges[:, 1:] + edges[:, :-1])
    half = 0.5 * (edges[:, 1:] - edges[:, :-1])
    nodes = mid[..., None] + half[..., None] * x
    vals = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
    return np.sum(half * (vals @ wts), axis=1)


class _Chi0Table:
    """Cumulative values of chi0 at the segment breakpoints."""

    def __init__(self, c: CoefficientSet, order: int, panels: int):
        if c.n_exp <= c.sigma:
            raise InvalidInputError("chi0 requires n > sigma (1/(D Q0) not integrable at -inf)")
        self.c = c
        self.order, self.panels = order, panels
        self.C_minus = compute_C_minus(c)
        R, m = c.edge, c.M0
        inv = lambda z: 1.0 / (eval_D(c, z) * eval_Q0(c, z))
        self.inv = inv
        self.at_mR = self.C_minus * R ** (c.sigma - c.n_exp)
        self.at_mM = self.at_mR + _gl_integrate(inv, -R, -m, order, panels)
        self.at_M = self.at_mM + 2 * m / (c.d_plateau * c.q0_interior_amplitude)
        self.at_R = self.at_M + _gl_integrate(inv, m, R, order, panels)
        self.C_plus = 1.0 / (c.c_plus * c.A1 * (c.n_exp - c.sigma))
        self.infinity = self.at_R + self.C_plus * R ** (c.sigma - c.n_exp)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        c, R, m = self.c, self.c.edge, self.c.M0
        out = np.empty_like(y)
        e = c.sigma - c.n_exp
        left = y <= -R
        out[left] = self.C_minus * np.abs(y[left]) ** e
        right = y >= R
        out[right] = self.infinity - self.C_plus * y[right] ** e
        mid = (y >= -m) & (y <= m)
        out[mid] = self.at_mM + (y[mid] + m) / (c.d_plateau * c.q0_interior_amplitude)
        lb = (y > -R) & (y < -m)
        if np.any(lb):
            out[lb] = self.at_mR + _gl_integrate_many(self.inv, -R, y[lb], self.order, self.panels)
        rb = (y > m) & (y < R)
        if np.any(rb):
            out[rb] = self.at_M + _gl_integrate_many(self.inv, m, y[rb], self.order, self.panels)
        return out


_TABLES: dict[tuple, _Chi0Table] = {}


def _chi_table(c: CoefficientSet, order: int = _GL_ORDER, panels: int = _GL_PANELS) -> _Chi0Table:
    key = (tuple(sorted(c.as_dict().items())), order, panels)
    tab = _TABLES.get(key)
    if tab is None:
        tab = _TABLES[key] = _Chi0Table(c, order, panels)
    return tab


def eval_chi0(coeffs: CoefficientSet, y):
    """Dual weight ``chi0(y) = int_{-inf}^y dz / (D Q0)``.

    Tails are closed-form; the two blend segments use composite Gauss-Legendre,
    which is exact to round-off for these smooth integrands.
    """
    arr, scalar = _as_array(y)
    if not np.all(np.isfinite(arr) | np.isinf(arr)):
        raise QuadratureError("chi0 evaluated at NaN")
    tab = _chi_table(coeffs)
    flat = np.atleast_1d(arr).astype(float)
    out = np.where(np.isposinf(flat), tab.infinity, 0.0)
    finite = np.isfinite(flat)
    out[finite] = tab(flat[finite])
    return _ret(out.reshape(arr.shape), scalar)


def chi0_infinity(coeffs: CoefficientSet) -> float:
    """``chi0(+inf) = int_R 1/(D Q0)``; its square root is the deviation-bound constant."""
    return _chi_table(coeffs).infinity


def compute_B0(coeffs: CoefficientSet, order: int = _GL_ORDER, panels: int = _GL_PANELS) -> float:
    """``B0 = int Q0 chi0 dy`` (the velocity measure is normalized)."""
    c = coeffs
    tab = _chi_table(c, order, panels)
    R, m, sig, n = c.edge, c.M0, c.sigma, c.n_exp
    left_tail = c.c_minus * tab.C_minus * R ** (1 - n) / (n - 1)
    right_tail = (c.c_plus * tab.infinity * R ** (1 - sig) / (sig - 1)
                  - c.c_plus * tab.C_plus * R ** (1 - n) / (n - 1))
    a = c.q0_interior_amplitude
    # chi0 is affine on the plateau
    plateau = a * 2 * m * 0.5 * (tab.at_mM + tab.at_M)
    f = lambda z: eval_Q0(c, z) * tab(np.asarray(z, dtype=float))
    blends = _gl_integrate(f, -R, -m, order, panels) + _gl_integrate(f, m, R, order, panels)
    total = left_tail + right_tail + plateau + blends
    if not total > 0:
        raise QuadratureError(f"B0 quadrature produced {total}")
    return total


# -- scalars ----------------------------------------------------------------
def compute_mu(coeffs: CoefficientSet) -> float:
    """Fractional order offset ``mu = (n - 1) / beta``."""
    return (coeffs.n_exp - 1.0) / coeffs.beta


def compute_nu(coeffs: CoefficientSet, dim: int = 1) -> float:
    """Limiting fractional diffusivity.

    ``nu = c^- C^- c1 <|v_1|^(1+mu)> / B0`` where ``c1`` is the first scaling
    constant evaluated at ``alpha = beta - n``, ``beta1 = beta``.  The
    closed-form constant is checked against direct quadrature on every call.
    """
    from .integrals import c1_closed_form, c1_quadrature, sphere_moment

    mu = compute_mu(coeffs)
    alpha, beta1 = coeffs.beta - coeffs.n_exp, coeffs.beta
    if not (0 < alpha + 1 < 2 * beta1):
        raise InvalidInputError(
            f"scaling-integral precondition 0 < alpha+1 < 2 beta1 fails: alpha+1={alpha + 1}, 2 beta1={2 * beta1}"
        )
    c1 = c1_closed_form(alpha, beta1)
    check = c1_quadrature(alpha, beta1)
    if abs(check - c1) > 1e-8 * abs(c1):
        raise QuadratureError(f"c1 closed form {c1!r} disagrees with quadrature {check!r}")
    vel = sphere_moment(dim, coeffs.V0, 1 + mu)
    return coeffs.c_minus * compute_C_minus(coeffs) * c1 * vel / compute_B0(coeffs)


# -- validation -------------------------------------------------------------
@dataclass(frozen=True)
class Violation:
    name: str
    lhs: float
    rhs: float

    def __str__(self):
        return f"{self.name}: {self.lhs:.6g} vs {self.rhs:.6g}"


@dataclass(frozen=True)
class ValidationReport:
    violated: tuple[Violation, ...] = ()
    mu: float = float("nan")

    @property
    def ok(self) -> bool:
        return not self.violated

    @property
    def names(self) -> set[str]:
        return {v.name for v in self.violated}

    def render(self) -> str:
        lines = [f"{'condition':<34}{'lhs':>14}{'rhs':>14}  status"]
        for v in self.violated:
            lines.append(f"{v.name:<34}{v.lhs:>14.6g}{v.rhs:>14.6g}  VIOLATED")
        lines.append(f"{'mu = (n-1)/beta':<34}{self.mu:>14.6g}{'':>14}  {'ok' if self.ok else 'FAIL'}")
        return "\n".join(lines)


def _checks(c) -> Iterable[tuple[str, float, float]]:
    # (name, lhs, rhs) meaning lhs > rhs must hold
    s, b, n, sig, g = c.s_exp, c.beta, c.n_exp, c.sigma, c.gamma
    mu = (n - 1) / b
    return (
        ("n > sigma", n, sig),
        ("sigma > 1", sig, 1.0),
        ("s > 1", s, 1.0),
        ("gamma > (n-sigma)/2 + 1", g, (n - sig) / 2 + 1),
        ("beta > n - 1", b, n - 1),
        ("beta + n - 1 > s*beta", b + n - 1, s * b),
        ("s*beta > beta + sigma - 1", s * b, b + sig - 1),
        ("mu > 0", mu, 0.0),
        ("1 > mu", 1.0, mu),
    )


def validate_parameters(coeffs) -> ValidationReport:
    """Check the admissible parameter range; every failed strict inequality is reported.

    ``coeffs`` may be a :class:`CoefficientSet` or any object/mapping exposing
    ``sigma, beta, gamma, n_exp, s_exp`` (so inadmissible sets that cannot be
    normalized can still be validated).
    """
    if isinstance(coeffs, dict):
        coeffs = _Namespace(coeffs)
    for name in ("sigma", "beta", "gamma", "n_exp", "s_exp"):
        val = getattr(coeffs, name, None)
        if val is None or not math.isfinite(float(val)):
            raise InvalidInputError(f"{name} must be a finite number, got {val!r}")
    if float(coeffs.beta) <= 0:
        raise InvalidInputError("beta must be > 0")
    violated = tuple(Violation(name, lhs, rhs) for name, lhs, rhs in _checks(coeffs) if not lhs > rhs)
    return ValidationReport(violated, (coeffs.n_exp - 1) / coeffs.beta)


class _Namespace:
    def __init__(self, d):
        for k, v in d.items():
            setattr(self, k, float(v))


@dataclass(frozen=True)
class ScalingContext:
    """Micro-to-macro scaling data for one value of eps."""

    eps: float
    mu: float
    nu: float
    B0: float
    C_minus: float
    dim: int = 1

    @classmethod
    def build(cls, coeffs: CoefficientSet, eps: float, dim: int = 1) -> "ScalingContext":
        if not eps > 0:
            raise InvalidInputError(f"eps must be > 0, got {eps}")
        if dim not in (1, 2):
            raise InvalidInputError(f"dim must be 1 or 2, got {dim}")
        return cls(float(eps), compute_mu(coeffs), compute_nu(coeffs, dim),
                   compute_B0(coeffs), compute_C_minus(coeffs), dim)

    def with_eps(self, eps: float) -> "ScalingContext":
        return dataclasses.replace(self, eps=float(eps))

    # operator coefficients in macroscopic time
    def transport_rate(self) -> float:
        return self.eps ** -self.mu

    def ydiff_rate(self, s_exp: float) -> float:
        return self.eps ** (s_exp - 1 - self.mu)

    def relax_rate(self) -> float:
        return self.eps ** (-1 - self.mu)
