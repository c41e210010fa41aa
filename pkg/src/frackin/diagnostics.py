"""Numerical probes of the a priori bounds, the deviation bound and the flux decomposition."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import kinetic as K
from .errors import InvalidInputError

DEFAULT_SLACK = 1.2
SUP_SLACK = 1 + 1e-8  # the discrete maximum principle is exact up to round-off
NYQUIST_FLAG = 1e-3


@dataclass
class BoundReport:
    """``passed`` is ``measured <= budget * slack``."""

    name: str
    measured: float
    budget: float
    slack: float = DEFAULT_SLACK
    details: str = ""
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.measured <= self.budget * self.slack)

    def row(self) -> list:
        return [self.name, repr(self.measured), repr(self.budget), repr(self.slack),
                "pass" if self.passed else "FAIL", self.details]


REPORT_HEADER = ["name", "measured", "budget", "slack", "verdict", "details"]


def _time_integral(times, values) -> float:
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(t) < 2:
        return 0.0
    return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(t)))


def check_apriori(states: Sequence[K.KineticState], slack: float = DEFAULT_SLACK) -> list[BoundReport]:
    """The five bounds of the relative-entropy estimates over one run.

    ``B`` is the initial-data bound stored on the first state.  Dissipations
    are the raw integrals ``int int D Q0 (d_y(q/Q0))^2 dt`` and
    ``int int Lambda (q-<q>)^2/Q0 dt`` (macroscopic time, trapezoid rule over
    the given states), compared with ``B eps^(1+mu-s)`` and ``B eps^(1+mu)``.
    """
    if not states:
        raise InvalidInputError("check_apriori needs at least one state")
    first = states[0]
    g, ctx = first.grid, first.ctx
    B = first.B if math.isfinite(first.B) else K.initial_bound(first)
    eps, mu, s = ctx.eps, ctx.mu, g.coeffs.s_exp
    sup = max(float(np.max(st.q / g.Q)) for st in states) / B
    neg = min(float(np.min(st.q)) for st in states)
    ent = max(K.relative_entropy(st) for st in states)
    mass = max(K.total_mass(st) for st in states)
    times = [st.time for st in states]
    dy = _time_integral(times, [K.y_dissipation(st) for st in states])
    dl = _time_integral(times, [K.relax_dissipation(st) for st in states])
    return [
        BoundReport("sup_bound", sup, 1.0, SUP_SLACK, f"max q/(B Q0) over run; min q = {neg:.3e}; B = {B:.6g}"),
        BoundReport("entropy", ent, B, slack, "max_t int q^2/Q0"),
        BoundReport("mass", mass, B, slack, "max_t int q"),
        BoundReport("dissipation_y", dy, B * eps ** (1 + mu - s), slack,
                    f"int_0^T int D Q0 (d_y(q/Q0))^2 dt vs B eps^(1+mu-s), T={times[-1]:.4g}"),
        BoundReport("dissipation_lambda", dl, B * eps ** (1 + mu), slack,
                    f"int_0^T int Lambda (q-<q>)^2/Q0 dt vs B eps^(1+mu), T={times[-1]:.4g}"),
    ]


class DeviationProbe(NamedTuple):
    lhs_max: float
    ratio_max: float
    violations: int
    C_discrete: float
    C_continuous: float


def deviation_bound_probe(state: K.KineticState, slack: float = 1.1) -> DeviationProbe:
    """``|q/Q0 - R| <= C H^(1/2)`` on every grid point.

    ``R(x, v)`` is the Q0-average of ``q/Q0`` in y (the y-mass of q divided by
    the discrete mass of Q0), ``H = sum h (Delta u)^2`` and the discrete
    constant is ``C_h = (sum 1/h)^(1/2)``; the inequality then holds exactly
    by Cauchy-Schwarz, and ``C_h`` tends to ``chi0(+inf)^(1/2)``.
    """
    from .coefficients import chi0_infinity

    g = state.grid
    u = state.q / g.Q
    mass_Q = float(np.sum(g.Q * g.dy))
    R = (state.q @ g.dy) / mass_Q
    lhs = np.abs(u - R[..., None])
    H = K.y_dissipation_density(state)
    C_h = math.sqrt(float(np.sum(1.0 / g.h)))
    rhs = C_h * np.sqrt(H)[..., None]
    floor = 1e-13 * max(float(np.max(np.abs(u))), 1e-300)
    viol = int(np.count_nonzero(lhs > slack * rhs + floor))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > floor, np.inf, 0.0))
    return DeviationProbe(float(lhs.max()), float(ratio.max()), viol, C_h, math.sqrt(chi0_infinity(g.coeffs)))


# -- flux decomposition --------------------------------------------------------
@dataclass
class FluxRow:
    mode: int
    xi: float
    div_J: complex
    J1_main: complex
    RJ1: complex
    J2: complex
    J2_chi: complex
    J2_lambda: complex
    dtJ3: complex
    J3: complex
    multiplier: float  # J1_main / (rho_hat |xi|^(1+mu) B0)
    rho_hat: complex

    @property
    def closure(self) -> float:
        """``|div J - (J1_main + RJ1 + J2 + d_t J3)|``; zero up to the d_t finite difference."""
        return abs(self.div_J - (self.J1_main + self.RJ1 + self.J2 + self.dtJ3))

    def magnitudes(self) -> dict:
        return {"J1_main": abs(self.J1_main), "RJ1": abs(self.RJ1), "J2": abs(self.J2), "J3": abs(self.dtJ3)}


class FluxProbe(NamedTuple):
    rows: list
    nyquist_fraction: float
    under_resolved: bool
    time: float
    eps: float


def _mode_slice(state: K.KineticState, k: int) -> np.ndarray:
    """Fourier coefficient (physical amplitude) of mode ``k`` along the first axis: shape (m, Ny)."""
    g = state.grid
    axes = tuple(range(g.dim))
    qh = np.fft.rfftn(state.q, axes=axes) / g.Nx ** g.dim
    if g.dim == 1:
        return qh[k]
    return qh[k, 0]


def _nyquist_fraction(state: K.KineticState) -> float:
    g = state.grid
    rho = K.plain_density(state).values
    power = np.abs(np.fft.rfftn(rho)) ** 2
    if g.dim == 1:
        ny = power[-1] if g.Nx % 2 == 0 else 0.0
        total = power[1:].sum()
    else:
        ny = power[g.Nx // 2, :].sum() + power[:, -1].sum()
        total = power.sum() - power[0, 0]
    return float(ny / total) if total > 0 else 0.0


def flux_decomposition_probe(state: K.KineticState, modes: Sequence[int], prev: K.KineticState | None = None,
                             nxt: K.KineticState | None = None) -> FluxProbe:
    """Split ``(div J)^(xi) = eps^-mu int int (i xi.v) chi0 q^`` into the main part of
    the first term, its remainder, the y-operator term and the time-derivative term.

    All terms are discrete identities on the grid: the velocity sum is over
    the antipodal quadrature (so imaginary parts of the first term cancel),
    the y-operator term uses the solver's face fluxes and is also summed by
    parts into its ``d_y chi0`` and ``d_y Lambda`` pieces.  ``d_t J3`` is a
    centered difference between ``prev`` and ``nxt`` (one-sided if only one
    is given, zero if neither).
    """
    g, ctx = state.grid, state.ctx
    eps, mu = ctx.eps, ctx.mu
    w = g.v_quad.weights
    nodes = g.v_quad.nodes
    lam, chi, Q, dy = g.lam, g.chi, g.Q, g.dy
    kappa_s = eps ** g.coeffs.s_exp
    rows = []
    for k in modes:
        if not 0 <= k <= g.Nx // 2:
            raise InvalidInputError(f"mode {k} outside [0, {g.Nx // 2}]")
        xi = 2 * math.pi * k / g.L
        xv = xi * nodes[:, 0]  # xi . v for xi along the first axis
        den = 1j * eps * xv[:, None] + lam[None, :]  # (m, Ny)

        def flux_terms(st):
            qh = _mode_slice(st, k)
            avg = w @ qh  # <q^>(y)
            rho_hat = complex(avg @ dy)
            div_J = eps ** -mu * np.sum(w[:, None] * (1j * xv[:, None]) * chi * qh * dy)
            j3 = -eps * np.sum(w[:, None] * (1j * xv[:, None]) * chi * qh / den * dy)
            return qh, avg, rho_hat, div_J, j3

        qh, avg, rho_hat, div_J, j3 = flux_terms(state)
        # first term, main part and remainder (real coefficient after the v-symmetry)
        coef = eps ** -mu * w[:, None] * eps * xv[:, None] ** 2 * chi * lam / ((eps * xv[:, None]) ** 2 + lam ** 2)
        coef_y = coef.sum(axis=0) * dy
        main = rho_hat * complex(coef_y @ Q)
        rem = complex(coef_y @ (avg - rho_hat * Q))
        # y-operator term: sum_j W_j (F_{j+1/2} - F_{j-1/2}) with W = (i xi v) chi / den
        u = qh / Q
        F = g.h * np.diff(u, axis=-1)  # inner faces (zero flux at the ends)
        W_g = (1j * xv[:, None]) / den  # the chi-free factor
        pref = kappa_s * eps ** -mu
        # by parts: -sum_faces F (W_{j+1} - W_j), W = chi g, split by the product rule
        dchi = np.diff(chi)
        dg = np.diff(W_g, axis=-1)
        gbar = 0.5 * (W_g[:, 1:] + W_g[:, :-1])
        cbar = 0.5 * (chi[1:] + chi[:-1])
        j2_chi = -pref * np.sum(w[:, None] * F * gbar * dchi)
        j2_lam = -pref * np.sum(w[:, None] * F * cbar * dg)
        div_F = np.zeros_like(qh)
        div_F[:, :-1] += F
        div_F[:, 1:] -= F
        j2 = pref * np.sum(w[:, None] * W_g * chi * div_F)
        # time derivative of J3
        if prev is not None and nxt is not None:
            dtj3 = (flux_terms(nxt)[4] - flux_terms(prev)[4]) / (nxt.time - prev.time)
        elif nxt is not None:
            dtj3 = (flux_terms(nxt)[4] - j3) / (nxt.time - state.time)
        elif prev is not None:
            dtj3 = (j3 - flux_terms(prev)[4]) / (state.time - prev.time)
        else:
            dtj3 = 0j
        if k == 0 or abs(rho_hat) == 0:
            mult = 0.0
        else:
            mult = float((main / (rho_hat * abs(xi) ** (1 + mu) * g.B0_h)).real)
        rows.append(FluxRow(k, xi, complex(div_J), complex(main), rem, complex(j2), complex(j2_chi),
                            complex(j2_lam), complex(dtj3), complex(j3), mult, rho_hat))
    frac = _nyquist_fraction(state)
    return FluxProbe(rows, frac, frac > NYQUIST_FLAG, state.time, eps)


def prelimit_multiplier(grid: K.PhaseGrid, eps: float, mu: float, xi: float) -> float:
    """``(1/eps^mu) sum eps (xi v)^2 chi0 Lambda Q0 / ((eps xi v)^2 + Lambda^2) / (B0 |xi|^(1+mu))``
    on the solver grid; what the main-part multiplier of the flux probe equals."""
    w, nodes = grid.v_quad.weights, grid.v_quad.nodes
    xv = xi * nodes[:, 0]
    lam = grid.lam
    val = eps ** -mu * np.sum(w[:, None] * eps * xv[:, None] ** 2 * grid.chi * lam * grid.Q * grid.dy
                              / ((eps * xv[:, None]) ** 2 + lam ** 2))
    return float(val / (abs(xi) ** (1 + mu) * grid.B0_h))


# -- convergence table ---------------------------------------------------------
@dataclass
class ConvergenceTable:
    eps: list
    errors: list
    slope: float
    verdict: str  # "monotone decreasing" | "not monotone" | "insufficient" | "degenerate"

    @property
    def monotone(self) -> bool:
        return self.verdict == "monotone decreasing"

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["eps", "error"])
        for e, v in zip(self.eps, self.errors):
            wr.writerow([repr(float(e)), repr(float(v))])
        wr.writerow(["slope", repr(float(self.slope))])
        wr.writerow(["verdict", self.verdict])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def convergence_table(eps_values, errors) -> ConvergenceTable:
    """Sort by decreasing eps, fit ``log err = p log eps + c`` and judge monotone decrease."""
    e = np.asarray(eps_values, dtype=float)
    r = np.asarray(errors, dtype=float)
    if e.shape != r.shape:
        raise InvalidInputError("eps and error lists differ in length")
    order = np.argsort(-e)
    e, r = e[order], r[order]
    if len(e) < 3:
        slope = math.nan
        if len(e) >= 2 and np.all(r > 0):
            slope = float(np.polyfit(np.log(e), np.log(r), 1)[0])
        return ConvergenceTable(e.tolist(), r.tolist(), slope, "insufficient")
    if np.any(r <= 0):
        return ConvergenceTable(e.tolist(), r.tolist(), math.nan, "degenerate")
    slope = float(np.polyfit(np.log(e), np.log(r), 1)[0])
    verdict = "monotone decreasing" if np.all(np.diff(r) < 0) else "not monotone"
    return ConvergenceTable(e.tolist(), r.tolist(), slope, verdict)


# -- serialization -------------------------------------------------------------
def reports_to_csv(reports: Sequence[BoundReport], path=None) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(REPORT_HEADER)
    for rep in reports:
        wr.writerow(rep.row())
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def reports_from_csv(path) -> list[BoundReport]:
    rows = list(csv.reader(Path(path).read_text().splitlines()))
    out = []
    for r in rows[1:]:
        out.append(BoundReport(r[0], float(r[1]), float(r[2]), float(r[3]), r[5]))
    return out


def summary_text(reports: Sequence[BoundReport]) -> str:
    """Fixed-column summary used by the CLI ``report`` command."""
    lines = [f"{'check':<22}{'measured':>14}{'budget':>14}{'slack':>8}  verdict"]
    for rep in reports:
        lines.append(f"{rep.name:<22}{rep.measured:>14.6g}{rep.budget:>14.6g}{rep.slack:>8.3g}  "
                     f"{'pass' if rep.passed else 'FAIL'}")
    n_fail = sum(not r.passed for r in reports)
    lines.append(f"{len(reports) - n_fail}/{len(reports)} checks pass")
    return "\n".join(lines)


def flux_rows_to_csv(probes: Sequence[FluxProbe], path=None) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["eps", "time", "mode", "xi", "abs_div_J", "abs_J1_main", "abs_RJ1", "abs_J2", "abs_J3",
                 "multiplier", "closure", "nyquist_fraction"])
    for pr in probes:
        for row in pr.rows:
            m = row.magnitudes()
            wr.writerow([repr(pr.eps), repr(pr.time), row.mode, repr(row.xi), repr(abs(row.div_J)),
                         repr(m["J1_main"]), repr(m["RJ1"]), repr(m["J2"]), repr(m["J3"]),
                         repr(row.multiplier), repr(row.closure), repr(pr.nyquist_fraction)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
