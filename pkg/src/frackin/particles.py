"""Monte Carlo run-and-tumble particles with a diffusing internal state.

Each particle moves at ``eps^-mu v``, draws a fresh velocity at rate
``eps^(-1-mu) Lambda(y)`` (Poisson thinning against ``Lambda_max``), and its
internal state follows the diffusion whose forward operator is
``eps^(s-1-mu) d_y(D Q0 d_y(./Q0))``.

In the raw coordinate the Ito drift ``D' + D (ln Q0)'`` grows like ``|y|^(n+1/2)``
and Euler-Maruyama needs absurdly small steps near ``Y_max``.  The default
mode therefore integrates the scale coordinate ``S = chi0(y)``, in which the
same process is driftless: ``dS = sqrt(2 eps^(s-1-mu) / (D Q0^2)) dW``.  Each
Euler step in S is Metropolis-adjusted so that Q0 stays exactly invariant
(plain Euler with vanishing noise at the ends biases the marginal).  The
raw mode is kept for the drift/diffusion consistency checks and refuses
unstable steps.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import coefficients as cf
from .coefficients import CoefficientSet, ScalingContext
from .errors import InvalidInputError, StabilityError
from .fields import MacroField

CDF_KNOTS = 10_000


class Particle(NamedTuple):
    x: np.ndarray
    v: np.ndarray
    y: float
    run_start_time: float


# -- coordinate maps ----------------------------------------------------------
class _StateMaps:
    """Vectorized ``chi0`` / inverse and ``Q0`` CDF / inverse.

    Both maps are closed-form beyond the blend edge ``R`` and on the plateau;
    only the two blend segments are tabulated (monotone PCHIP).
    """

    def __init__(self, c: CoefficientSet, knots: int = CDF_KNOTS):
        self.c = c
        R, m = c.edge, c.M0
        self.R, self.m = R, m
        self.e = c.sigma - c.n_exp
        tab = cf._chi_table(c)
        self.tab = tab
        self.plateau_slope = 1.0 / (c.d_plateau * c.q0_interior_amplitude)
        nb = max(knots // 2, 64)
        self.yl = np.linspace(-R, -m, nb)
        self.yr = np.linspace(m, R, nb)
        cl, cr = cf.eval_chi0(c, self.yl), cf.eval_chi0(c, self.yr)
        self._chi_l = PchipInterpolator(self.yl, cl)
        self._chi_r = PchipInterpolator(self.yr, cr)
        self._ichi_l = PchipInterpolator(cl, self.yl)
        self._ichi_r = PchipInterpolator(cr, self.yr)
        # Q0 cumulative mass
        sig = c.sigma
        self.F_mR = c.c_minus * R ** (1 - sig) / (sig - 1)
        Fl = self.F_mR + np.concatenate([[0.0], np.cumsum(cf.Q0_mass(c, self.yl[:-1], self.yl[1:]))])
        self.F_mM = Fl[-1]
        self.F_M = self.F_mM + 2 * m * c.q0_interior_amplitude
        Fr = self.F_M + np.concatenate([[0.0], np.cumsum(cf.Q0_mass(c, self.yr[:-1], self.yr[1:]))])
        self.F_R = Fr[-1]
        self._F_l = PchipInterpolator(self.yl, Fl)
        self._F_r = PchipInterpolator(self.yr, Fr)
        self._iF_l = PchipInterpolator(Fl, self.yl)
        self._iF_r = PchipInterpolator(Fr, self.yr)

    def chi(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.empty_like(y)
        R, m, tab = self.R, self.m, self.tab
        a = y <= -R
        out[a] = tab.C_minus * np.abs(y[a]) ** self.e
        b = (y > -R) & (y < -m)
        out[b] = self._chi_l(y[b])
        p = (y >= -m) & (y <= m)
        out[p] = tab.at_mM + (y[p] + m) * self.plateau_slope
        r = (y > m) & (y < R)
        out[r] = self._chi_r(y[r])
        t = y >= R
        out[t] = tab.infinity - tab.C_plus * y[t] ** self.e
        return out

    def inv_chi(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        tab, m = self.tab, self.m
        a = s <= tab.at_mR
        out[a] = -((s[a] / tab.C_minus) ** (1 / self.e))
        b = (s > tab.at_mR) & (s < tab.at_mM)
        out[b] = self._ichi_l(s[b])
        p = (s >= tab.at_mM) & (s <= tab.at_M)
        out[p] = -m + (s[p] - tab.at_mM) / self.plateau_slope
        r = (s > tab.at_M) & (s < tab.at_R)
        out[r] = self._ichi_r(s[r])
        t = s >= tab.at_R
        gap = np.maximum(tab.infinity - s[t], 1e-300)
        out[t] = (gap / tab.C_plus) ** (1 / self.e)
        return out

    def cdf(self, y: np.ndarray) -> np.ndarray:
        c, R, m = self.c, self.R, self.m
        y = np.asarray(y, dtype=float)
        sig = c.sigma
        out = np.empty_like(y)
        a = y <= -R
        out[a] = c.c_minus * np.abs(y[a]) ** (1 - sig) / (sig - 1)
        b = (y > -R) & (y < -m)
        out[b] = self._F_l(y[b])
        p = (y >= -m) & (y <= m)
        out[p] = self.F_mM + (y[p] + m) * c.q0_interior_amplitude
        r = (y > m) & (y < R)
        out[r] = self._F_r(y[r])
        t = y >= R
        out[t] = 1.0 - c.c_plus * y[t] ** (1 - sig) / (sig - 1)
        return out

    def inv_cdf(self, u: np.ndarray) -> np.ndarray:
        c, m = self.c, self.m
        u = np.asarray(u, dtype=float)
        sig = c.sigma
        out = np.empty_like(u)
        a = u <= self.F_mR
        out[a] = -((u[a] * (sig - 1) / c.c_minus) ** (1 / (1 - sig)))
        b = (u > self.F_mR) & (u < self.F_mM)
        out[b] = self._iF_l(u[b])
        p = (u >= self.F_mM) & (u <= self.F_M)
        out[p] = -m + (u[p] - self.F_mM) / c.q0_interior_amplitude
        r = (u > self.F_M) & (u < self.F_R)
        out[r] = self._iF_r(u[r])
        t = u >= self.F_R
        tail = np.maximum(1.0 - u[t], 1e-300)
        out[t] = (tail * (sig - 1) / c.c_plus) ** (1 / (1 - sig))
        return out


_MAPS: dict[tuple, _StateMaps] = {}


def state_maps(coeffs: CoefficientSet) -> _StateMaps:
    key = tuple(sorted(coeffs.as_dict().items()))
    mp = _MAPS.get(key)
    if mp is None:
        mp = _MAPS[key] = _StateMaps(coeffs)
    return mp


def truncated_q0_cdf(coeffs: CoefficientSet, Y_max: float) -> Callable[[np.ndarray], np.ndarray]:
    """CDF of Q0 conditioned on ``[-Y_max, Y_max]`` (vectorized)."""
    mp = state_maps(coeffs)
    lo, hi = mp.cdf(np.array([-Y_max, Y_max]))
    return lambda y: np.clip((mp.cdf(np.clip(y, -Y_max, Y_max)) - lo) / (hi - lo), 0.0, 1.0)


# -- SDE coefficients ---------------------------------------------------------
def sde_drift(coeffs: CoefficientSet, y) -> np.ndarray:
    """Ito drift ``D' + D (ln Q0)'`` per unit of ``eps^(s-1-mu)``."""
    y = np.asarray(y, dtype=float)
    return cf.eval_dD(coeffs, y) + cf.eval_D(coeffs, y) * cf.eval_dQ0(coeffs, y) / cf.eval_Q0(coeffs, y)


def scale_diffusivity(coeffs: CoefficientSet, y) -> np.ndarray:
    """``1 / (D Q0^2)``: squared noise amplitude of ``S = chi0(Y)`` per unit of ``2 eps^(s-1-mu)``."""
    y = np.asarray(y, dtype=float)
    return 1.0 / (cf.eval_D(coeffs, y) * cf.eval_Q0(coeffs, y) ** 2)


def raw_dt_bound(coeffs: CoefficientSet, ctx: ScalingContext, Y_max: float) -> float:
    """Largest raw-coordinate step whose drift move at ``Y_max`` stays below half a
    dyadic band (``Y_max/4``)."""
    kappa = ctx.ydiff_rate(coeffs.s_exp)
    b = max(abs(float(sde_drift(coeffs, Y_max))), abs(float(sde_drift(coeffs, -Y_max))))
    return (Y_max / 4) / (kappa * b)


def lambda_sup(coeffs: CoefficientSet) -> float:
    """Upper bound of Lambda on the real line (max over a dense sample of the
    non-tail part, plus a 1e-6 margin; the tail branch is decreasing in |y|)."""
    y = np.linspace(-coeffs.edge, coeffs.edge, 20001)
    return float(np.max(cf.eval_Lambda(coeffs, y))) * (1 + 1e-6)


# -- ensemble -------------------------------------------------------------------
@dataclass
class ParticleEnsemble:
    x: np.ndarray  # (N, dim)
    v: np.ndarray  # (N, dim)
    y: np.ndarray  # (N,)
    run_start: np.ndarray  # (N,)
    time: float
    seed: int
    ctx: ScalingContext
    coeffs: CoefficientSet
    L: float
    Y_max: float
    steps_taken: int = 0
    run_log: list | None = None
    tumbled: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.tumbled is None:
            self.tumbled = np.zeros(len(self.y), dtype=bool)

    @property
    def N(self) -> int:
        return len(self.y)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def particle(self, i: int) -> Particle:
        return Particle(self.x[i].copy(), self.v[i].copy(), float(self.y[i]), float(self.run_start[i]))

    def copy(self) -> "ParticleEnsemble":
        return dataclasses.replace(
            self, x=self.x.copy(), v=self.v.copy(), y=self.y.copy(), run_start=self.run_start.copy(),
            tumbled=self.tumbled.copy(), run_log=None if self.run_log is None else list(self.run_log),
        )

    def durations(self) -> np.ndarray:
        if not self.run_log:
            return np.empty(0)
        return np.concatenate(self.run_log)


def _sample_velocity(rng: np.random.Generator, n: int, dim: int, V0: float) -> np.ndarray:
    if dim == 1:
        return np.where(rng.random(n) < 0.5, -V0, V0)[:, None]
    theta = rng.uniform(0.0, 2 * np.pi, n)
    return V0 * np.column_stack([np.cos(theta), np.sin(theta)])


def init_ensemble(coeffs: CoefficientSet, ctx: ScalingContext, rho0: MacroField, N: int, seed: int,
                  Y_max: float | None = None, log_runs: bool = False) -> ParticleEnsemble:
    """``N`` particles with ``x ~ rho0`` (cellwise uniform), ``v`` uniform, ``y ~ Q0`` on ``[-Y_max, Y_max]``."""
    from .kinetic import default_Y_max

    if N < 1:
        raise InvalidInputError(f"N must be >= 1, got {N}")
    vals = np.asarray(rho0.values, dtype=float)
    if np.any(vals < 0) or not vals.sum() > 0:
        raise InvalidInputError("rho0 must be nonnegative with positive mass")
    if rho0.dim != ctx.dim:
        raise InvalidInputError(f"rho0 is {rho0.dim}-D but the context has dim={ctx.dim}")
    if Y_max is None:
        Y_max = default_Y_max(coeffs)
    rng = np.random.default_rng([seed, 0, 0])
    p = vals.ravel() / vals.sum()
    cells = rng.choice(p.size, size=N, p=p)
    idx = np.array(np.unravel_index(cells, vals.shape)).T
    x = (idx + rng.random((N, rho0.dim))) * rho0.dx
    v = _sample_velocity(rng, N, rho0.dim, coeffs.V0)
    mp = state_maps(coeffs)
    lo, hi = mp.cdf(np.array([-Y_max, Y_max]))
    y = np.clip(mp.inv_cdf(lo + (hi - lo) * rng.random(N)), -Y_max, Y_max)
    return ParticleEnsemble(x, v, y, np.zeros(N), 0.0, int(seed), ctx, coeffs, rho0.L, float(Y_max),
                            run_log=[] if log_runs else None)


def _reflect(z: np.ndarray, lo: float, hi: float) -> np.ndarray:
    z = np.where(z < lo, 2 * lo - z, z)
    z = np.where(z > hi, 2 * hi - z, z)
    return np.clip(z, lo, hi)


def simulate(ens: ParticleEnsemble, T: float, dt_sde: float, *, mode: str = "scale",
             lambda_fn: Callable | None = None, lambda_max: float | None = None,
             freeze_y: bool = False, threads: int | None = None) -> ParticleEnsemble:
    """Advance the ensemble to time ``T`` (whole steps of ``dt_sde``).

    Random numbers for step ``k`` come from a stream keyed by ``(seed, k)`` and
    are drawn for the whole ensemble at once, so results do not depend on how
    the work is partitioned; ``threads`` is accepted for interface symmetry.
    ``lambda_fn``/``lambda_max`` replace the tumbling rate (control
    experiments); ``freeze_y`` switches the internal-state noise off.
    """
    if mode not in ("scale", "raw"):
        raise InvalidInputError(f"mode must be 'scale' or 'raw', got {mode!r}")
    if not dt_sde > 0:
        raise InvalidInputError("dt_sde must be > 0")
    c, ctx = ens.coeffs, ens.ctx
    kappa = ctx.ydiff_rate(c.s_exp)
    if mode == "raw" and not freeze_y:
        bound = raw_dt_bound(c, ctx, ens.Y_max)
        if dt_sde > bound:
            raise StabilityError(
                f"dt_sde={dt_sde:.3g} moves the drift more than half a band at Y_max; need dt_sde <= {bound:.3g}",
                suggested=bound,
            )
    lam = (lambda y: cf.eval_Lambda(c, y)) if lambda_fn is None else lambda_fn
    lam_max = lambda_sup(c) if lambda_max is None else float(lambda_max)
    cand_rate = lam_max * ctx.relax_rate()
    speed = ctx.transport_rate()
    nsteps = int(round((T - ens.time) / dt_sde))
    if nsteps < 0:
        raise InvalidInputError(f"target time {T} is before the ensemble time {ens.time}")
    ens = ens.copy()
    mp = state_maps(c)
    N, dim = ens.N, ens.dim
    s_lo, s_hi = mp.chi(np.array([-ens.Y_max, ens.Y_max]))
    s = mp.chi(ens.y) if mode == "scale" else None
    g_now = scale_diffusivity(c, ens.y)
    # candidate clocks restart from a keyed stream, so a run can be continued
    rng0 = np.random.default_rng([ens.seed, ens.steps_taken, 1])
    next_cand = ens.time + rng0.exponential(1.0 / cand_rate, N)
    for _ in range(nsteps):
        k = ens.steps_taken
        rng = np.random.default_rng([ens.seed, k, 2])
        t0 = ens.time
        t1 = t0 + dt_sde
        lam_now = lam(ens.y)
        tpos = np.full(N, t0)
        while True:
            idx = np.flatnonzero(next_cand < t1)
            if idx.size == 0:
                break
            tc = next_cand[idx]
            ens.x[idx] += speed * ens.v[idx] * (tc - tpos[idx])[:, None]
            tpos[idx] = tc
            ratio = lam_now[idx] / lam_max
            if np.any(ratio > 1 + 1e-12):
                raise StabilityError(f"thinning bound lambda_max={lam_max} exceeded", suggested=float(ratio.max() * lam_max))
            acc = idx[rng.random(idx.size) < ratio]
            if acc.size:
                if ens.run_log is not None:
                    done = acc[ens.tumbled[acc]]
                    if done.size:
                        ens.run_log.append(next_cand[done] - ens.run_start[done])
                ens.run_start[acc] = next_cand[acc]
                ens.tumbled[acc] = True
                ens.v[acc] = _sample_velocity(rng, acc.size, dim, c.V0)
            next_cand[idx] += rng.exponential(1.0 / cand_rate, idx.size)
        ens.x += speed * ens.v * (t1 - tpos)[:, None]
        ens.x %= ens.L
        if not freeze_y:
            xi = rng.standard_normal(N)
            if mode == "scale":
                # Metropolis-adjusted Euler step: the chain keeps the exact
                # stationary law (density proportional to D Q0^2 in S)
                a0 = 2 * kappa * dt_sde * g_now
                prop = s + np.sqrt(a0) * xi
                inside = (prop > s_lo) & (prop < s_hi)
                prop = np.where(inside, prop, s)
                y_p = np.clip(mp.inv_chi(prop), -ens.Y_max, ens.Y_max)
                g_p = scale_diffusivity(c, y_p)
                a1 = 2 * kappa * dt_sde * g_p
                d2 = (prop - s) ** 2
                log_r = -1.5 * np.log(a1 / a0) - d2 / (2 * a1) + d2 / (2 * a0)
                ok = inside & (np.log(rng.random(N)) < log_r)
                s = np.where(ok, prop, s)
                ens.y = np.where(ok, y_p, ens.y)
                g_now = np.where(ok, g_p, g_now)
            else:
                y = ens.y + kappa * sde_drift(c, ens.y) * dt_sde + np.sqrt(2 * kappa * cf.eval_D(c, ens.y) * dt_sde) * xi
                ens.y = _reflect(y, -ens.Y_max, ens.Y_max)
        ens.time = t1
        ens.steps_taken += 1
    return ens


def empirical_density(ens: ParticleEnsemble, Nx: int, mass: float = 1.0, weights=None) -> MacroField:
    """Periodic histogram of positions, normalized to integrate to ``mass``.

    ``weights`` (e.g. ``chi0(y)/B0``) turns it into a weighted density.
    """
    L, dim = ens.L, ens.dim
    w = np.ones(ens.N) if weights is None else np.asarray(weights, dtype=float)
    cells = np.floor(ens.x / (L / Nx)).astype(int) % Nx
    if dim == 1:
        counts = np.bincount(cells[:, 0], weights=w, minlength=Nx)
    else:
        counts = np.bincount(cells[:, 0] * Nx + cells[:, 1], weights=w, minlength=Nx * Nx).reshape(Nx, Nx)
    dens = counts / (w.sum() * (L / Nx) ** dim) * mass
    return MacroField(dens, L, "particles")


def mc_error_bar(density: MacroField, N: int) -> float:
    """Expected L1 histogram noise ``mass sqrt(2/pi) sum_i sqrt(p_i (1-p_i) / N)``."""
    mass = density.integral()
    p = np.clip(density.values.ravel() * density.cell_volume / mass, 0.0, 1.0)
    return float(mass * math.sqrt(2 / math.pi) * np.sum(np.sqrt(p * (1 - p) / N)))


# -- tail estimation ----------------------------------------------------------
class TailEstimate(NamedTuple):
    exponent: float
    ci: tuple[float, float]
    k: int
    heavy_tail: bool
    ladder: tuple  # (k, estimate) pairs for k, k/2, k/4, k/8


def hill_estimate(samples: np.ndarray, k: int) -> float:
    """Hill estimator of the survival exponent from the ``k`` largest samples."""
    x = np.sort(np.asarray(samples, dtype=float))[::-1]
    if not 1 <= k < len(x):
        raise InvalidInputError(f"k must lie in [1, {len(x) - 1}], got {k}")
    if x[k] <= 0:
        raise InvalidInputError("Hill estimator needs positive order statistics")
    return 1.0 / float(np.mean(np.log(x[:k] / x[k])))


def run_tail_estimate(run_log, k_fraction: float = 0.05, n_boot: int = 200, seed: int = 0,
                      min_samples: int = 1000, level: float = 0.95) -> TailEstimate:
    """Hill estimate with a bootstrap percentile interval.

    The estimate is repeated at ``k/2, k/4, k/8``; if it keeps rising as k
    shrinks (by more than 25 % overall) the sample is flagged as not heavy
    tailed, which is how the estimator behaves on exponential-type laws.
    """
    x = np.asarray(run_log, dtype=float).ravel()
    if x.size < min_samples:
        raise InvalidInputError(f"need at least {min_samples} run durations, got {x.size}")
    if not 0 < k_fraction < 1:
        raise InvalidInputError("k_fraction must lie in (0, 1)")
    k = max(int(k_fraction * x.size), 10)
    est = hill_estimate(x, k)
    rng = np.random.default_rng(seed)
    boot = np.array([hill_estimate(rng.choice(x, x.size), k) for _ in range(n_boot)])
    a = (1 - level) / 2
    ci = (float(np.quantile(boot, a)), float(np.quantile(boot, 1 - a)))
    ladder = []
    for j in range(4):
        kj = max(k >> j, 10)
        ladder.append((kj, hill_estimate(x, kj)))
    vals = [e for _, e in ladder]
    rising = all(b > a_ for a_, b in zip(vals, vals[1:])) and vals[-1] > 1.25 * vals[0]
    return TailEstimate(est, ci, k, not rising, tuple(ladder))


# -- persistence ----------------------------------------------------------------
_MAGIC = b"FRKP0001"


def save_ensemble(ens: ParticleEnsemble, path) -> Path:
    """Header: magic, int64 (N, dim), float64 time; then one record per particle:
    ``x[dim], v[dim], y, run_start`` as little-endian float64.  Sidecar ``.json``."""
    path = Path(path)
    rec = np.column_stack([ens.x, ens.v, ens.y, ens.run_start]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<2q", ens.N, ens.dim))
        fh.write(struct.pack("<d", ens.time))
        fh.write(np.ascontiguousarray(rec).tobytes())
    meta = {"time": ens.time, "seed": ens.seed, "steps_taken": ens.steps_taken, "eps": ens.ctx.eps,
            "L": ens.L, "Y_max": ens.Y_max, "coefficients": ens.coeffs.as_dict(),
            "layout": "per particle: x[dim], v[dim], y, run_start"}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    return path


def load_ensemble(path) -> dict:
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise InvalidInputError(f"{path}: not a particle snapshot")
    N, dim = struct.unpack_from("<2q", raw, 8)
    (time,) = struct.unpack_from("<d", raw, 24)
    rec = np.frombuffer(raw, dtype="<f8", offset=32).reshape(N, 2 * dim + 2)
    return {"time": time, "x": rec[:, :dim].copy(), "v": rec[:, dim:2 * dim].copy(),
            "y": rec[:, 2 * dim].copy(), "run_start": rec[:, 2 * dim + 1].copy()}


def write_run_log(durations, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["duration"])
        for d in np.asarray(durations, dtype=float).ravel():
            w.writerow([repr(float(d))])
    return path


def read_run_log(path) -> np.ndarray:
    rows = Path(path).read_text().splitlines()[1:]
    return np.array([float(r) for r in rows])


# -- control experiments --------------------------------------------------------
class RateCheck(NamedTuple):
    level: float
    expected: float
    measured: float

    @property
    def rel_error(self) -> float:
        return abs(self.measured / self.expected - 1.0)


def thinning_rate_control(coeffs: CoefficientSet, ctx: ScalingContext, levels=(1.0, 3.0), N: int = 10_000,
                          T: float | None = None, seed: int = 0, dt: float | None = None) -> list[RateCheck]:
    """Jump rate per level of a two-level step ``Lambda`` (``levels[0]`` for y < 0,
    ``levels[1]`` for y >= 0) with y frozen, against ``level * eps^(-1-mu)``.

    Each level gets its own ensemble so the count of accepted candidates
    (completed runs plus first tumbles) is attributable to it; the candidate
    clock runs at the larger level, so the lower one exercises rejection.
    """
    lo, hi = float(levels[0]), float(levels[1])
    if not 0 < lo <= hi:
        raise InvalidInputError("levels must satisfy 0 < low <= high")
    rate_lo = lo * ctx.relax_rate()
    if T is None:
        T = 10.0 / rate_lo  # ~10 events per particle at the low level
    if dt is None:
        dt = T / 100
    step_fn = lambda y: np.where(y < 0, lo, hi)
    rho0 = MacroField(np.ones((8,) * ctx.dim), 2 * np.pi, "uniform")
    out = []
    for j, (lev, ysign) in enumerate(((lo, -1.0), (hi, 1.0))):
        ens = init_ensemble(coeffs, ctx, rho0, N, seed + j, log_runs=True)
        ens.y[:] = ysign
        fin = simulate(ens, T, dt, lambda_fn=step_fn, lambda_max=hi, freeze_y=True)
        jumps = fin.durations().size + int(fin.tumbled.sum())
        out.append(RateCheck(lev, lev * ctx.relax_rate(), jumps / (N * T)))
    return out
