"""Deterministic solver for the scaled kinetic equation in macroscopic time.

    d_t q + eps^-mu v.grad_x q - eps^(s-1-mu) d_y(D Q0 d_y(q/Q0)) = eps^(-1-mu) Lambda (<q> - q)

Strang splitting: exact relaxation (half step), implicit finite-volume
y-diffusion (half step), upwind transport (full step), then the mirror image.

Split upwind transport is not asymptotic-preserving: every step it adds
numerical diffusion of order ``eps^-mu V0 dx / 2``, which swamps the true
O(1) dynamics as eps -> 0.  The ``"exact"`` scheme instead advances
transport and relaxation together, exactly, for each x-Fourier mode and y
cell (a small linear ODE system), and splits only the y operator:
y (half), transport+relaxation (full), y (half).

The y face coefficients are ``h = 1/(chi0(y_{j+1}) - chi0(y_j))``, the exact
harmonic mean of ``D Q0`` between the two nodes.  With it Q0 is an exact
discrete equilibrium and chi0 an exact discrete dual solution.
"""
from __future__ import annotations

import dataclasses
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cholesky_banded, cho_solve_banded

from . import coefficients as cf
from .coefficients import CoefficientSet, ScalingContext
from .errors import InvalidInputError, SolverAbort, StabilityError
from .fields import MacroField
from .integrals import SphereQuadrature, build_sphere_quadrature

CFL_MAX = 0.9
NEG_TOL = 1e-13
TRANSPORT_SCHEMES = ("upwind", "muscl", "exact")


def default_Y_max(coeffs: CoefficientSet, tail_mass: float = 1e-4) -> float:
    """Smallest symmetric truncation leaving less than ``tail_mass`` of Q0 outside."""
    sig = coeffs.sigma
    Y = ((coeffs.c_plus + coeffs.c_minus) / ((sig - 1) * tail_mass)) ** (1 / (sig - 1))
    return float(max(Y, 4 * coeffs.edge))


def graded_y_faces(Y_max: float, Ny: int, core: float = 1.0) -> np.ndarray:
    """Faces ``y = core*sinh(u/b)``, ``u`` uniform on [-1, 1], clustered algebraically toward 0.

    Far from the origin the spacing is geometric, so every dyadic band of
    ``|y|`` receives ``b*ln2*Ny/2`` cells.
    """
    if Ny < 8:
        raise InvalidInputError(f"Ny must be >= 8, got {Ny}")
    b = 1.0 / math.asinh(Y_max / core)
    u = np.linspace(-1.0, 1.0, Ny + 1)
    faces = core * np.sinh(u / b)
    faces[0], faces[-1] = -Y_max, Y_max
    faces[Ny // 2] = 0.0 if Ny % 2 == 0 else faces[Ny // 2]
    return faces


@dataclass
class PhaseGrid:
    """Discretized (x, v, y) phase space plus coefficient tables on it."""

    coeffs: CoefficientSet
    L: float
    Nx: int
    v_quad: SphereQuadrature
    y_faces: np.ndarray
    dt: float
    dim: int = 1
    transport: str = "upwind"
    # derived tables
    y: np.ndarray = field(init=False)
    dy: np.ndarray = field(init=False)
    Q: np.ndarray = field(init=False)
    chi: np.ndarray = field(init=False)
    lam: np.ndarray = field(init=False)
    h: np.ndarray = field(init=False)
    B0_h: float = field(init=False)
    _cache: dict = field(init=False, default_factory=dict, repr=False)

    def __post_init__(self):
        f = np.asarray(self.y_faces, dtype=float)
        if self.Nx < 8 or len(f) - 1 < 8:
            raise InvalidInputError("Nx and Ny must both be >= 8")
        if not np.all(np.diff(f) > 0):
            raise InvalidInputError("y faces must be strictly increasing")
        if self.transport not in TRANSPORT_SCHEMES:
            raise InvalidInputError(f"unknown transport scheme {self.transport!r}")
        if self.v_quad.dim != self.dim:
            raise InvalidInputError("velocity quadrature dimension differs from grid dimension")
        c = self.coeffs
        self.y_faces = f
        self.dy = np.diff(f)
        self.y = 0.5 * (f[:-1] + f[1:])
        self.Q = cf.Q0_mass(c, f[:-1], f[1:]) / self.dy
        self.chi = cf.eval_chi0(c, self.y)
        self.lam = cf.eval_Lambda(c, self.y)
        self.h = 1.0 / cf.chi0_increment(c, self.y[:-1], self.y[1:])
        self.B0_h = float(np.sum(self.chi * self.Q * self.dy))

    @classmethod
    def build(cls, coeffs: CoefficientSet, L: float = 2 * math.pi, Nx: int = 128, Ny: int = 160,
              Y_max: float | None = None, dt: float | None = None, dim: int = 1, v_order: int = 2,
              ctx: ScalingContext | None = None, cfl: float = CFL_MAX, transport: str = "upwind",
              y_core: float = 1.0) -> "PhaseGrid":
        """Grid with default truncation and, if ``dt`` is None, the largest CFL-stable step."""
        if Y_max is None:
            Y_max = default_Y_max(coeffs)
        vq = build_sphere_quadrature(dim, coeffs.V0, 2 if dim == 1 else v_order)
        if dt is None:
            if ctx is None:
                raise InvalidInputError("either dt or ctx is required")
            dt = cfl * (L / Nx) / (ctx.transport_rate() * coeffs.V0)
        return cls(coeffs, float(L), int(Nx), vq, graded_y_faces(Y_max, Ny, y_core), float(dt), dim, transport)

    @property
    def Ny(self) -> int:
        return len(self.y)

    @property
    def Y_max(self) -> float:
        return float(self.y_faces[-1])

    @property
    def dx(self) -> float:
        return self.L / self.Nx

    @property
    def x_shape(self) -> tuple[int, ...]:
        return (self.Nx,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    def tail_mass_outside(self) -> float:
        return float(1.0 - np.sum(self.Q * self.dy))

    def cfl(self, ctx: ScalingContext) -> float:
        return ctx.transport_rate() * self.coeffs.V0 * self.dt / self.dx

    def with_dt(self, dt: float) -> "PhaseGrid":
        return dataclasses.replace(self, dt=float(dt))


@dataclass
class KineticState:
    """Phase density ``q[x..., v, y]`` (cell averages) at one time."""

    q: np.ndarray
    time: float
    ctx: ScalingContext
    grid: PhaseGrid
    B: float = math.nan

    def copy(self) -> "KineticState":
        return dataclasses.replace(self, q=self.q.copy())


# -- quadratures -----------------------------------------------------------
def _v_avg(grid: PhaseGrid, q: np.ndarray) -> np.ndarray:
    return np.tensordot(q, grid.v_quad.weights, axes=([-2], [0]))


def plain_density(state: KineticState) -> MacroField:
    """``rho_eps = int <q> dy``."""
    g = state.grid
    return MacroField(_v_avg(g, state.q) @ g.dy, g.L, "plain")


def weighted_density(state: KineticState) -> MacroField:
    """``(1/B0) int int chi0 q dy dv`` with the discrete normalization ``B0_h``."""
    g = state.grid
    return MacroField(_v_avg(g, state.q) @ (g.chi * g.dy) / g.B0_h, g.L, "weighted")


def total_mass(state: KineticState) -> float:
    return plain_density(state).integral()


def weighted_mass(state: KineticState) -> float:
    """Spatial integral of the un-normalized weighted density ``int chi0 q``."""
    return weighted_density(state).integral() * state.grid.B0_h


def relative_entropy(state: KineticState) -> float:
    """``int int int q^2 / Q0``."""
    g = state.grid
    dens = _v_avg(g, state.q ** 2) @ (g.dy / g.Q)
    return float(dens.sum() * g.cell_volume)


def y_dissipation_density(state: KineticState) -> np.ndarray:
    """``H(x, v) = int D Q0 (d_y(q/Q0))^2 dy`` on the discrete grid."""
    g = state.grid
    du = np.diff(state.q / g.Q, axis=-1)
    return (du ** 2) @ g.h


def relax_dissipation(state: KineticState) -> float:
    """``int int int Lambda (q - <q>)^2 / Q0``."""
    g = state.grid
    dev = state.q - _v_avg(g, state.q)[..., None, :]
    return float((_v_avg(g, dev ** 2) @ (g.lam * g.dy / g.Q)).sum() * g.cell_volume)


def y_dissipation(state: KineticState) -> float:
    """``int int int D Q0 (d_y(q/Q0))^2``."""
    g = state.grid
    return float((y_dissipation_density(state) @ g.v_quad.weights).sum() * g.cell_volume)


def initial_bound(state: KineticState) -> float:
    """The constant B of the initial-data assumption: the largest of the three bounds."""
    g = state.grid
    sup = float(np.max(state.q / g.Q))
    return max(sup, relative_entropy(state), total_mass(state))


# -- initial data ----------------------------------------------------------
def init_state(grid: PhaseGrid, ctx: ScalingContext, rho0: MacroField) -> KineticState:
    """Separable datum ``q = rho0(x) Q0(y)``, independent of v."""
    vals = np.asarray(rho0.values, dtype=float)
    if vals.shape != grid.x_shape:
        raise InvalidInputError(f"rho0 has shape {vals.shape}, grid expects {grid.x_shape}")
    if np.any(vals < 0):
        raise InvalidInputError("rho0 must be nonnegative")
    if not np.isclose(rho0.L, grid.L):
        raise InvalidInputError(f"rho0 box length {rho0.L} differs from grid L={grid.L}")
    m = grid.v_quad.size
    q = vals[..., None, None] * np.ones(m)[:, None] * grid.Q
    st = KineticState(q, 0.0, ctx, grid)
    st.B = initial_bound(st)
    return st


# -- substeps ----------------------------------------------------------------
def relax(state_q: np.ndarray, grid: PhaseGrid, ctx: ScalingContext, tau: float) -> np.ndarray:
    """Exact solution of ``d_t q = eps^(-1-mu) Lambda (<q> - q)`` over time ``tau``."""
    avg = _v_avg(grid, state_q)[..., None, :]
    decay = np.exp(-grid.lam * tau * ctx.relax_rate())
    return avg + decay * (state_q - avg)


def _y_factor(grid: PhaseGrid, ctx: ScalingContext, tau: float):
    key = ("y", ctx.eps, tau)
    fac = grid._cache.get(key)
    if fac is None:
        kappa = ctx.ydiff_rate(grid.coeffs.s_exp) * tau
        # symmetric system in u = q/Q0:  (M + kappa K) u_new = M u_old
        M = grid.dy * grid.Q
        diag = M.copy()
        diag[:-1] += kappa * grid.h
        diag[1:] += kappa * grid.h
        off = -kappa * grid.h
        ab = np.zeros((2, grid.Ny))
        ab[0, 1:] = off
        ab[1] = diag
        fac = grid._cache[key] = (cholesky_banded(ab, lower=False), kappa)
    return fac


def diffuse_y(q: np.ndarray, grid: PhaseGrid, ctx: ScalingContext, tau: float) -> np.ndarray:
    """Backward-Euler conservative finite-volume step for the y Fokker-Planck operator.

    The linear solve is for the increment of ``u = q/Q0``, and the update is
    applied in flux form, so mass is conserved and ``c Q0`` stays fixed
    regardless of roundoff in the solve.
    """
    if tau == 0:
        return q
    chol, kappa = _y_factor(grid, ctx, tau)
    shape = q.shape
    u = (q / grid.Q).reshape(-1, grid.Ny)
    flux_old = kappa * grid.h * np.diff(u, axis=1)  # kappa h (u_{j+1} - u_j) at inner faces
    rhs = np.zeros_like(u)
    rhs[:, :-1] += flux_old
    rhs[:, 1:] -= flux_old
    du = cho_solve_banded((chol, False), rhs.T, check_finite=False).T
    flux = flux_old + kappa * grid.h * np.diff(du, axis=1)
    div = np.zeros_like(u)
    div[:, :-1] += flux
    div[:, 1:] -= flux
    return (q.reshape(-1, grid.Ny) + div / grid.dy).reshape(shape)


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def transport(q: np.ndarray, grid: PhaseGrid, ctx: ScalingContext, tau: float) -> np.ndarray:
    """Periodic upwind (or minmod-MUSCL) advection at speed ``eps^-mu v``, axis by axis.

    The ``"exact"`` scheme shifts each Fourier mode by its exact phase instead.
    """
    if grid.transport == "exact":
        axes = tuple(range(grid.dim))
        omega = ctx.transport_rate() * (_mode_vectors(grid) @ grid.v_quad.nodes.T)
        qh = np.fft.rfftn(q, axes=axes) * np.exp(-1j * tau * omega)[..., None]
        return np.fft.irfftn(qh, s=grid.x_shape, axes=axes)
    out = q.copy()
    speed = ctx.transport_rate()
    nodes = grid.v_quad.nodes
    for axis in range(grid.dim):
        for k in range(grid.v_quad.size):
            a = speed * nodes[k, axis]
            if a == 0:
                continue
            c = abs(a) * tau / grid.dx
            if c > 1 + 1e-12:
                raise StabilityError(f"CFL {c:.3g} > 1", suggested=CFL_MAX * grid.dx / abs(speed * grid.coeffs.V0))
            sl = (slice(None),) * grid.dim + (k, slice(None))
            f = out[sl]
            shift = 1 if a > 0 else -1
            up = np.roll(f, shift, axis=axis)
            if grid.transport == "upwind":
                out[sl] = f - c * (f - up)
            else:
                # flux-limited second order: F_{i+1/2} = f_i + (1-c)/2 * slope_i (for a > 0)
                down = np.roll(f, -shift, axis=axis)
                slope = _minmod(f - up, down - f)
                face = f + 0.5 * (1 - c) * slope
                out[sl] = f - c * (face - np.roll(face, shift, axis=axis))
    return out


def _mode_vectors(grid: PhaseGrid) -> np.ndarray:
    """Wave vectors of the real-FFT mode grid, shape ``(*modes, dim)``."""
    N, L = grid.Nx, grid.L
    kr = 2 * np.pi * np.fft.rfftfreq(N, d=L / N)
    if grid.dim == 1:
        return kr[:, None]
    kf = 2 * np.pi * np.fft.fftfreq(N, d=L / N)
    K1, K2 = np.meshgrid(kf, kr, indexing="ij")
    return np.stack([K1, K2], axis=-1)


def _tr_propagator(grid: PhaseGrid, ctx: ScalingContext, tau: float) -> np.ndarray:
    """``exp(tau M)`` for ``M = -i eps^-mu (xi.v) - eps^(-1-mu) Lambda (I - 1 w^T)``.

    Shape ``(*modes, Ny, m, m)``.  In one dimension the 2x2 exponential is
    written out with overflow-free exponentials; in two dimensions it is
    evaluated by scaling and squaring.  The zero mode is the exact relaxation.
    """
    key = ("tr", ctx.eps, tau)
    P = grid._cache.get(key)
    if P is not None:
        return P
    lam = grid.lam * ctx.relax_rate()  # (Ny,)
    omega = ctx.transport_rate() * (_mode_vectors(grid) @ grid.v_quad.nodes.T)  # (*modes, m)
    w = grid.v_quad.weights
    m = len(w)
    if grid.dim == 1:
        om = omega[:, 1][:, None]  # +V0 node; the -V0 node sees -om
        lm = lam[None, :]
        kap = np.sqrt((0.25 * lm ** 2 - om ** 2).astype(complex))
        lo = -(om ** 2) / (kap + 0.5 * lm)  # kap - lam/2 without cancellation
        e_plus = np.exp(tau * lo)
        e_minus = np.exp(-tau * (kap + 0.5 * lm))
        z = 2 * kap * tau
        small = np.abs(z) < 1e-3
        kap_safe = np.where(small, 1.0, kap)
        C = 0.5 * (e_plus + e_minus)
        # e^{-lam t/2} sinh(kap t)/kap, with its Taylor form near kap = 0
        S = np.where(small, e_minus * tau * (1 + z / 2 + z ** 2 / 6 + z ** 3 / 24),
                     (e_plus - e_minus) / (2 * kap_safe))
        P = np.empty(om.shape[:1] + (grid.Ny, 2, 2), dtype=complex)
        # node order is (-V0, +V0): the first node moves with -om
        P[..., 0, 0] = C + S * 1j * om
        P[..., 1, 1] = C - S * 1j * om
        P[..., 0, 1] = P[..., 1, 0] = S * 0.5 * lm
    else:
        from scipy.linalg import expm

        M = np.zeros(omega.shape[:-1] + (grid.Ny, m, m), dtype=complex)
        M += lam[:, None, None] * w[None, None, :]
        idx = np.arange(m)
        M[..., idx, idx] += -1j * omega[..., None, :] - lam[:, None]
        P = expm(tau * M)
    # exact relaxation for the zero mode
    dec = np.exp(-lam * tau)
    zero = (1 - dec)[:, None, None] * w[None, None, :] + dec[:, None, None] * np.eye(m)
    P[(0,) * grid.dim] = zero
    grid._cache[key] = P
    return P


def transport_relax(q: np.ndarray, grid: PhaseGrid, ctx: ScalingContext, tau: float) -> np.ndarray:
    """Exact evolution under transport and relaxation together (``"exact"`` scheme)."""
    P = _tr_propagator(grid, ctx, tau)
    axes = tuple(range(grid.dim))
    qh = np.fft.rfftn(q, axes=axes)  # (*modes, m, Ny)
    qh = np.einsum("...yab,...by->...ay", P, qh)
    return np.fft.irfftn(qh, s=grid.x_shape, axes=axes)


def step(state: KineticState, *, relaxation=True, ydiff=True, advection=True) -> KineticState:
    """One Strang step of length ``grid.dt``; individual operators can be switched off."""
    g, ctx = state.grid, state.ctx
    dt = g.dt
    if advection and g.transport != "exact":
        c = g.cfl(ctx)
        if c > CFL_MAX * (1 + 1e-12):
            raise StabilityError(
                f"CFL number {c:.4g} exceeds {CFL_MAX}; use dt <= {CFL_MAX * g.dx / (ctx.transport_rate() * g.coeffs.V0):.6g}",
                suggested=CFL_MAX * g.dx / (ctx.transport_rate() * g.coeffs.V0),
            )
    q = state.q
    if g.transport == "exact" and advection and relaxation:
        if ydiff:
            q = diffuse_y(q, g, ctx, 0.5 * dt)
        q = transport_relax(q, g, ctx, dt)
        if ydiff:
            q = diffuse_y(q, g, ctx, 0.5 * dt)
    else:
        if relaxation:
            q = relax(q, g, ctx, 0.5 * dt)
        if ydiff:
            q = diffuse_y(q, g, ctx, 0.5 * dt)
        if advection:
            q = transport(q, g, ctx, dt)
        if ydiff:
            q = diffuse_y(q, g, ctx, 0.5 * dt)
        if relaxation:
            q = relax(q, g, ctx, 0.5 * dt)
    qmin = float(q.min())
    if qmin < -NEG_TOL * max(float(np.abs(q).max()), 1e-300):
        raise SolverAbort(f"negative density {qmin:.3e} at t={state.time + dt:.6g}")
    return dataclasses.replace(state, q=q, time=state.time + dt)


def run(state: KineticState, T: float, snapshot_every: int = 0, callback=None, **switches):
    """Advance to time ``T`` (rounded to whole steps).  Returns ``(final, snapshots)``."""
    nsteps = int(round((T - state.time) / state.grid.dt))
    snaps = [state] if snapshot_every else []
    for k in range(1, nsteps + 1):
        state = step(state, **switches)
        if callback is not None:
            callback(state)
        if snapshot_every and k % snapshot_every == 0:
            snaps.append(state)
    if snapshot_every and (not snaps or snaps[-1] is not state):
        snaps.append(state)
    return state, snaps


def grid_for_run(coeffs: CoefficientSet, ctx: ScalingContext, T: float, **kw) -> PhaseGrid:
    """Grid whose dt is CFL-limited and divides ``T`` exactly."""
    g = PhaseGrid.build(coeffs, ctx=ctx, **kw)
    nsteps = max(1, math.ceil(T / g.dt - 1e-9))
    return g.with_dt(T / nsteps)


# -- entropy bookkeeping ---------------------------------------------------
def entropy_budget(before: KineticState, after: KineticState) -> tuple[float, float, float]:
    """Energy decrement and time-averaged dissipation rates between two states.

    Returns ``(dE, diss_y, diss_lambda)`` with ``E = int q^2/Q0`` and rates
    normalised so that ``dE + dt * (diss_y + diss_lambda) ~ 0``:
    ``diss_y = 2 eps^(s-1-mu) int D Q0 (d_y(q/Q0))^2`` (trapezoid in time) and
    ``diss_lambda`` the exact time average of ``2 eps^(-1-mu) int Lambda (q-<q>)^2/Q0``
    under exponential relaxation from ``before``.
    """
    g, ctx = before.grid, before.ctx
    dt = after.time - before.time
    dE = relative_entropy(after) - relative_entropy(before)
    if dt <= 0:
        return dE, 0.0, 0.0
    ky = 2 * ctx.ydiff_rate(g.coeffs.s_exp)
    diss_y = 0.5 * ky * (y_dissipation(before) + y_dissipation(after))
    rate = 2 * ctx.relax_rate() * g.lam
    dev = before.q - _v_avg(g, before.q)[..., None, :]
    per_y = _v_avg(g, dev ** 2).reshape(-1, g.Ny).sum(axis=0) * g.cell_volume
    # int_0^dt rate e^{-rate t} dt / dt
    avg = np.where(rate * dt > 1e-12, -np.expm1(-rate * dt) / dt, rate)
    diss_l = float(np.sum(per_y * avg * g.dy / g.Q))
    return dE, diss_y, diss_l


# -- snapshot I/O ------------------------------------------------------------
_MAGIC = b"FRKQ0001"


def save_snapshot(state: KineticState, path) -> Path:
    """Binary layout: magic, 4 little-endian int64 dims (dim, Nx, m, Ny), time, then
    float64 x-centres, v-nodes, y-faces and the row-major payload; sidecar ``.json``."""
    path = Path(path)
    g = state.grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<4q", g.dim, g.Nx, g.v_quad.size, g.Ny))
        fh.write(struct.pack("<d", state.time))
        fh.write(((np.arange(g.Nx) + 0.5) * g.dx).astype("<f8").tobytes())
        fh.write(g.v_quad.nodes.astype("<f8").tobytes())
        fh.write(g.y_faces.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(state.q).astype("<f8").tobytes())
    meta = {
        "time": state.time, "eps": state.ctx.eps, "L": g.L, "dt": g.dt, "B": state.B,
        "transport": g.transport, "coefficients": g.coeffs.as_dict(), "layout": "x,v,y row-major",
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    return path


def load_snapshot(path) -> dict:
    """Raw arrays of a snapshot (no grid reconstruction)."""
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise InvalidInputError(f"{path}: not a kinetic snapshot")
    dim, nx, m, ny = struct.unpack_from("<4q", raw, 8)
    (time,) = struct.unpack_from("<d", raw, 40)
    off = 48
    arr = np.frombuffer(raw, dtype="<f8", offset=off)
    x = arr[:nx]
    arr = arr[nx:]
    nodes = arr[: m * dim].reshape(m, dim)
    arr = arr[m * dim:]
    faces = arr[: ny + 1]
    q = arr[ny + 1:].reshape((nx,) * dim + (m, ny))
    return {"dim": dim, "time": time, "x": x, "v": nodes, "y_faces": faces, "q": q.copy()}
