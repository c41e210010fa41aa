"""Reference solver for ``d_t rho + nu (-Laplacian)^(order/2) rho = 0`` on the periodic box."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InvalidInputError, QuadratureError
from .fields import MacroField


@dataclass(frozen=True)
class FractionalProblem:
    nu: float
    order: float  # 1 + mu
    rho0: MacroField

    def __post_init__(self):
        if not self.nu > 0:
            raise InvalidInputError(f"nu must be > 0, got {self.nu}")
        if not 0 < self.order <= 2:
            raise InvalidInputError(f"order must lie in (0, 2], got {self.order}")

    @property
    def L(self) -> float:
        return self.rho0.L

    @property
    def Nx(self) -> int:
        return self.rho0.Nx


def wavenumbers(Nx: int, L: float) -> np.ndarray:
    """``xi_k = 2 pi k / L`` in FFT order; the Nyquist mode gets ``|xi| = pi Nx / L``."""
    return 2 * np.pi * np.fft.fftfreq(Nx, d=L / Nx)


def symbol(problem: FractionalProblem) -> np.ndarray:
    """``|xi|^order`` on the (rfft) mode grid of the problem."""
    N, L, dim = problem.Nx, problem.L, problem.rho0.dim
    if dim == 1:
        xi = np.abs(2 * np.pi * np.fft.rfftfreq(N, d=L / N))
        return xi ** problem.order
    k1 = 2 * np.pi * np.fft.fftfreq(N, d=L / N)
    k2 = 2 * np.pi * np.fft.rfftfreq(N, d=L / N)
    mod = np.sqrt(k1[:, None] ** 2 + k2[None, :] ** 2)
    return mod ** problem.order


def solve(problem: FractionalProblem, t: float) -> MacroField:
    """Exact Fourier-multiplier evolution ``rho_k(t) = rho_k(0) exp(-nu |xi_k|^order t)``."""
    if t < 0:
        raise InvalidInputError(f"t must be >= 0, got {t}")
    rho0 = problem.rho0
    mult = np.exp(-problem.nu * symbol(problem) * t)
    if rho0.dim == 1:
        out = np.fft.irfft(np.fft.rfft(rho0.values) * mult, n=rho0.Nx)
    else:
        out = np.fft.irfftn(np.fft.rfftn(rho0.values) * mult, s=rho0.values.shape, axes=(0, 1))
    return MacroField(out, rho0.L, f"fractional t={t:g}")


def self_similar_profile(order: float, nu: float, t: float, x) -> np.ndarray:
    """Whole-line fundamental solution ``(1/pi) int_0^inf cos(k x) exp(-nu t k^order) dk``.

    The oscillatory integral uses QAWF (Fourier-weighted) quadrature; ``x = 0``
    is evaluated in closed form.
    """
    if not t > 0:
        raise InvalidInputError("t must be > 0")
    if not 0 < order <= 2:
        raise InvalidInputError(f"order must lie in (0, 2], got {order}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = nu * t
    f = lambda k: math.exp(-s * k ** order)
    out = np.empty_like(x)
    zero = math.gamma(1 + 1 / order) / (math.pi * s ** (1 / order))
    for i, xi in enumerate(np.abs(x)):
        if xi == 0:
            out[i] = zero
            continue
        # beyond `upper` the integrand is below e^-50 of its peak
        upper = (50.0 / s) ** (1 / order)
        if xi * upper < 20 * math.pi:
            # slowly oscillating: plain adaptive quadrature
            val, err = integrate.quad(lambda k: f(k) * math.cos(k * xi), 0, upper, limit=400,
                                      epsabs=1e-14, epsrel=1e-12)
        else:
            # many periods: QAWO with a cosine weight on the finite range
            with warnings.catch_warnings():  # err is checked below
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, err = integrate.quad(f, 0, upper, weight="cos", wvar=xi, limit=400,
                                          epsabs=1e-14, epsrel=1e-12)
        if not math.isfinite(val) or err > 1e-8 + 1e-6 * abs(val):
            raise QuadratureError(f"profile quadrature at x={xi} did not converge (err={err:.2e})")
        out[i] = val / math.pi
    return out
