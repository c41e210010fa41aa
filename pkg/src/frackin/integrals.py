"""Scaling integrals, velocity-sphere quadrature and fat-tail quadrature."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, special

from .errors import DomainError, InvalidInputError, QuadratureError

__all__ = [
    "QuadResult",
    "SphereQuadrature",
    "build_sphere_quadrature",
    "sphere_moment",
    "c1_closed_form",
    "c1_quadrature",
    "c2_closed_form",
    "c2_quadrature",
    "lemma_integral_pole2",
    "lemma_integral_pole1",
    "lemma_direct_pole2",
    "lemma_direct_pole1",
    "improper_fat_tail_integral",
]

RTOL = 1e-13


class QuadResult(NamedTuple):
    value: float
    abs_err: float


def _quad(f, a, b, **kw) -> QuadResult:
    kw.setdefault("epsabs", 0.0)
    kw.setdefault("epsrel", RTOL)
    kw.setdefault("limit", 400)
    val, err, *info = integrate.quad(f, a, b, full_output=1, **kw)
    if len(info) > 2:  # quad appends a message when something went wrong
        msg = info[1]
        if abs(err) > 1e-8 * max(abs(val), 1e-300):
            raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {msg} (err={err:.3g})")
    return QuadResult(val, err)


# -- scaling constants ------------------------------------------------------
def _pole2_ratio(alpha, beta1):
    if not beta1 > 0:
        raise DomainError(f"beta1 > 0 required, got beta1={beta1}")
    if not 0 < alpha + 1 < 2 * beta1:
        raise DomainError(f"0 < alpha+1 < 2*beta1 required, got alpha+1={alpha + 1}, 2*beta1={2 * beta1}")
    return (alpha + 1) / beta1


def _pole1_ratio(alpha, beta2):
    if not beta2 > 0:
        raise DomainError(f"beta2 > 0 required, got beta2={beta2}")
    if not 0 < alpha + 1 < beta2:
        raise DomainError(f"0 < alpha+1 < beta2 required, got alpha+1={alpha + 1}, beta2={beta2}")
    return (alpha + 1) / beta2


def c1_closed_form(alpha: float, beta1: float) -> float:
    """``(1/beta1) int_0^inf z^(p-1)/(1+z^2) dz`` with ``p = (alpha+1)/beta1`` (a Mellin integral)."""
    p = _pole2_ratio(alpha, beta1)
    return math.pi / (2 * beta1 * math.sin(math.pi * p / 2))


def c1_quadrature(alpha: float, beta1: float) -> float:
    p = _pole2_ratio(alpha, beta1)
    f = lambda z: 1.0 / (1.0 + z * z)
    # split at z=1; the outer half is mapped back with z = 1/u
    lo = _quad(f, 0.0, 1.0, weight="alg", wvar=(p - 1, 0.0)).value
    hi = _quad(f, 0.0, 1.0, weight="alg", wvar=(1 - p, 0.0)).value
    return (lo + hi) / beta1


def c2_closed_form(alpha: float, beta2: float) -> float:
    """``(1/beta2) int_0^inf z^(p-1)/sqrt(1+z^2) dz = B(p/2, (1-p)/2) / (2 beta2)``."""
    p = _pole1_ratio(alpha, beta2)
    return special.beta(p / 2, (1 - p) / 2) / (2 * beta2)


def c2_quadrature(alpha: float, beta2: float) -> float:
    p = _pole1_ratio(alpha, beta2)
    f = lambda z: 1.0 / math.sqrt(1.0 + z * z)
    lo = _quad(f, 0.0, 1.0, weight="alg", wvar=(p - 1, 0.0)).value
    hi = _quad(f, 0.0, 1.0, weight="alg", wvar=(-p, 0.0)).value
    return (lo + hi) / beta2


def lemma_integral_pole2(alpha: float, beta1: float, a: float) -> float:
    """``int_{-inf}^0 |y|^alpha / (1 + (a |y|^beta1)^2) dy = c1 a^(-(alpha+1)/beta1)``."""
    if not a > 0:
        raise DomainError(f"a > 0 required, got {a}")
    return c1_closed_form(alpha, beta1) * a ** (-(alpha + 1) / beta1)


def lemma_integral_pole1(alpha: float, beta2: float, a: float) -> float:
    """``int_{-inf}^0 |y|^alpha / sqrt(1 + (a |y|^beta2)^2) dy = c2 a^(-(alpha+1)/beta2)``."""
    if not a > 0:
        raise DomainError(f"a > 0 required, got {a}")
    return c2_closed_form(alpha, beta2) * a ** (-(alpha + 1) / beta2)


def lemma_direct_pole2(alpha: float, beta1: float, a: float) -> float:
    """Direct quadrature of the y-integral, used as an oracle for :func:`lemma_integral_pole2`."""
    _pole2_ratio(alpha, beta1)
    ys = a ** (-1.0 / beta1)
    inner = _quad(lambda y: 1.0 / (1.0 + (a * y ** beta1) ** 2), 0.0, ys, weight="alg", wvar=(alpha, 0.0)).value
    # y = ys/u on the outer part
    outer = _quad(lambda u: 1.0 / (u ** (2 * beta1) + 1.0), 0.0, 1.0,
                  weight="alg", wvar=(2 * beta1 - alpha - 2, 0.0)).value
    return inner + ys ** (alpha + 1) * outer


def lemma_direct_pole1(alpha: float, beta2: float, a: float) -> float:
    _pole1_ratio(alpha, beta2)
    ys = a ** (-1.0 / beta2)
    inner = _quad(lambda y: 1.0 / math.sqrt(1.0 + (a * y ** beta2) ** 2), 0.0, ys,
                  weight="alg", wvar=(alpha, 0.0)).value
    outer = _quad(lambda u: 1.0 / math.sqrt(u ** (2 * beta2) + 1.0), 0.0, 1.0,
                  weight="alg", wvar=(beta2 - alpha - 2, 0.0)).value
    return inner + ys ** (alpha + 1) * outer


# -- velocity sphere --------------------------------------------------------
@dataclass(frozen=True)
class SphereQuadrature:
    """Nodes on the sphere of radius V0 with weights of the normalized surface measure."""

    dim: int
    V0: float
    nodes: np.ndarray  # (m, dim)
    weights: np.ndarray  # (m,)

    @property
    def size(self) -> int:
        return len(self.weights)

    def moment(self, p: float, direction=None) -> float:
        """Quadrature value of ``int |v . e|^p dv`` for a unit vector ``e`` (default first axis)."""
        e = np.zeros(self.dim)
        e[0] = 1.0
        if direction is not None:
            e = np.asarray(direction, dtype=float)
            e = e / np.linalg.norm(e)
        return float(np.dot(self.weights, np.abs(self.nodes @ e) ** p))


def build_sphere_quadrature(dim: int, V0: float = 1.0, order: int = 2) -> SphereQuadrature:
    """Antipodally symmetric quadrature of the normalized measure on ``|v| = V0``.

    ``dim=1`` is the two-point set ``{-V0, +V0}``; ``dim=2`` uses ``order``
    equally spaced angles, offset by half a step.
    """
    if dim not in (1, 2):
        raise InvalidInputError(f"dim must be 1 or 2, got {dim}")
    if order < 2 or order % 2:
        raise InvalidInputError(f"order must be even and >= 2 (antipodal symmetry), got {order}")
    if not V0 > 0:
        raise InvalidInputError(f"V0 must be > 0, got {V0}")
    if dim == 1:
        nodes = np.array([[-V0], [V0]])
        weights = np.array([0.5, 0.5])
    else:
        half = order // 2
        theta = 2 * np.pi * (np.arange(half) + 0.5) / order
        first = V0 * np.column_stack([np.cos(theta), np.sin(theta)])
        # exact negation keeps sum(w v) == 0 in floating point
        nodes = np.concatenate([first, -first])
        weights = np.full(order, 1.0 / order)
    return SphereQuadrature(dim, float(V0), nodes, weights)


def sphere_moment(dim: int, V0: float, p: float) -> float:
    """Exact ``int_{|v|=V0} |v_1|^p dv`` for the normalized surface measure."""
    if dim == 1:
        return V0 ** p
    g = special.gammaln
    log_val = g(dim / 2) + g((p + 1) / 2) - 0.5 * math.log(math.pi) - g((p + dim) / 2)
    return V0 ** p * math.exp(log_val)


# -- generic fat-tail quadrature -------------------------------------------
def improper_fat_tail_integral(
    f: Callable[[float], float],
    tail_exponent: float | tuple[float, float],
    lower: float = -math.inf,
    upper: float = math.inf,
    y_cut: float = 1e3,
    points=None,
) -> QuadResult:
    """Integrate ``f`` whose modulus decays like ``|y|^-p`` at infinite endpoints.

    Beyond ``|y| = y_cut`` the substitution ``u = 1/|y|`` turns the tail into
    ``int_0^{1/y_cut} f(1/u) u^(-2) du``, handled by an algebraic-weight rule.
    ``tail_exponent`` may be a pair ``(p_left, p_right)``.  Non-integrable
    tails (``p <= 1``) raise :class:`DomainError`.
    """
    p_left, p_right = (tail_exponent, tail_exponent) if np.isscalar(tail_exponent) else tail_exponent
    total, err = 0.0, 0.0
    a = lower if math.isfinite(lower) else -y_cut
    b = upper if math.isfinite(upper) else y_cut
    if a > b:
        raise InvalidInputError(f"empty interval [{lower}, {upper}] after truncation at y_cut={y_cut}")
    core = _quad(f, a, b, points=points) if points is not None else _quad(f, a, b)
    total += core.value
    err += core.abs_err
    for side, p, infinite in ((-1, p_left, lower == -math.inf), (1, p_right, upper == math.inf)):
        if not infinite:
            continue
        if p <= 1:
            raise DomainError(f"tail ~|y|^-{p} is not integrable (exponent must exceed 1)")
        floor = 1e-9 / y_cut  # QAWS samples the endpoint u = 0

        def g(u, s=side, p=p):
            u = max(u, floor)
            return f(s / u) * u ** -p

        r = _quad(g, 0.0, 1.0 / y_cut, weight="alg", wvar=(p - 2, 0.0))
        total += r.value
        err += r.abs_err
    return QuadResult(total, err)
