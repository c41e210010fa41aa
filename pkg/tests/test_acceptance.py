"""Acceptance criteria 1-9 at their stated tolerances.

Each test records a PASS/FAIL line in ``conftest.ACCEPTANCE``; the lines are
printed in the terminal summary.  Criteria that fail for understood reasons
are marked ``xfail(strict=True)`` and still report FAIL.
"""
import math
import time

import numpy as np
import pytest
from scipy import integrate

import conftest
from frackin import coefficients as cf
from frackin import experiments as X
from frackin import integrals as I
from frackin.config import reference_config
from frackin.fields import MacroField
from frackin.fractional import FractionalProblem, self_similar_profile, solve

pytestmark = pytest.mark.slow


def record(n: int, ok: bool, detail: str) -> None:
    """Merge one check into criterion ``n``: the criterion passes only if every check does."""
    prev_ok, prev_detail = True, ""
    if n in conftest.ACCEPTANCE:
        verdict, prev_detail = conftest.ACCEPTANCE[n]
        prev_ok = verdict == "PASS"
    both = prev_ok and ok
    text = f"{prev_detail}; {detail}" if prev_detail else detail
    conftest.ACCEPTANCE[n] = ("PASS" if both else "FAIL", text)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


# -- runs shared by several criteria -------------------------------------------
@pytest.fixture(scope="session")
def runs_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="session")
def e1_run(runs_dir):
    t0 = time.perf_counter()
    res = X.run_experiment(reference_config(["experiment.id=E1"]), runs_dir / "e1")
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def e2_run(runs_dir):
    t0 = time.perf_counter()
    res = X.run_experiment(reference_config(["experiment.id=E2", "scaling.eps=0.05"]), runs_dir / "e2")
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def e3_run(runs_dir):
    # Nx = 64: the 3x Monte Carlo bar grows like sqrt(Nx), so the coarser histogram is the stricter test
    cfg = reference_config(["experiment.id=E3", "scaling.eps=0.05", "run.N=100000", "grid.Nx=64"])
    t0 = time.perf_counter()
    res = X.run_experiment(cfg, runs_dir / "e3")
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def e4_run(runs_dir):
    cfg = reference_config(["experiment.id=E4", "scaling.eps=0.2, 0.1, 0.05, 0.02", "experiment.modes=1, 2"])
    t0 = time.perf_counter()
    res = X.run_experiment(cfg, runs_dir / "e4")
    return res, time.perf_counter() - t0


# -- 1 -----------------------------------------------------------------------------
TRUTH_TABLE = [
    (dict(sigma=1.5, n_exp=2.5, beta=2.0, gamma=2.0, s_exp=1.3), True),
    (dict(sigma=1.5, n_exp=2.5, beta=2.0, gamma=2.0, s_exp=1.2), False),
    (dict(sigma=1.0, n_exp=2.5, beta=2.0, gamma=2.0, s_exp=1.3), False),
    (dict(sigma=1.5, n_exp=2.9, beta=2.0, gamma=2.0, s_exp=1.3), True),
]


def test_criterion_1_parameter_gate():
    got = [cf.validate_parameters(p).ok for p, _ in TRUTH_TABLE]
    want = [ok for _, ok in TRUTH_TABLE]
    ok = got == want
    record(1, ok, f"validator {got} vs expected {want}")
    assert ok


# -- 2 -----------------------------------------------------------------------------
def test_criterion_2_lemma_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2026)
    worst = 0.0
    for _ in range(20):
        beta = rng.uniform(0.5, 3.0)
        a = 10 ** rng.uniform(-2, 2)
        # keep (alpha+1)/beta at least 0.05 away from both ends of its admissible range
        a1 = beta * rng.uniform(0.1, 1.9) - 1
        a2 = beta * rng.uniform(0.05, 0.95) - 1
        for closed, direct, alpha in ((I.lemma_integral_pole2, I.lemma_direct_pole2, a1),
                                      (I.lemma_integral_pole1, I.lemma_direct_pole1, a2)):
            cv, dv = closed(alpha, beta, a), direct(alpha, beta, a)
            worst = max(worst, abs(cv / dv - 1))
    toy = I.lemma_integral_pole2(0.0, 1.0, 2.0)
    toy_direct = integrate.quad(lambda y: 1 / (1 + 4 * y * y), 0, np.inf, epsabs=0, epsrel=1e-13)[0]
    secs = time.perf_counter() - t0
    ok = worst <= 1e-9 and abs(toy - math.pi / 4) <= 1e-12 and abs(toy_direct - math.pi / 4) <= 1e-12 and secs < 5
    record(2, ok, f"max rel diff {worst:.2e} over 40 cases; toy {toy:.15f} vs pi/4; {secs:.2f} s")
    assert ok


# -- 3 -----------------------------------------------------------------------------
def _prelimit_multiplier(c, eps, xi=1.0):
    """``(1/eps^mu) int eps xi^2 chi0 Lambda Q0 / ((eps xi)^2 + Lambda^2) dy / (B0 |xi|^(1+mu))``.

    Plain adaptive quadrature with its own changes of variable: ``y = -e^t``
    across the transition scale ``|y| ~ (eps xi)^-1/2`` and ``y = Y/u^2`` for
    both power tails.
    """
    B0, mu = cf.compute_B0(c), cf.compute_mu(c)

    def f(y):
        lam = float(cf.eval_Lambda(c, y))
        return eps * xi ** 2 * float(cf.eval_chi0(c, y)) * lam * float(cf.eval_Q0(c, y)) / ((eps * xi) ** 2 + lam ** 2)

    q = lambda g, a, b: integrate.quad(g, a, b, epsabs=0, epsrel=1e-11, limit=500)[0]
    R = c.edge
    Y = 1e3 * (eps * xi) ** -0.5
    tot = q(lambda t: f(-math.exp(t)) * math.exp(t), math.log(R), math.log(Y))
    tot += q(lambda u: f(-Y / u ** 2) * 2 * Y / u ** 3, 0, 1)
    for a, b in ((-R, -c.M0), (-c.M0, c.M0), (c.M0, R)):
        tot += q(f, a, b)
    tot += q(lambda u: f(R / u ** 2) * 2 * R / u ** 3, 0, 1)
    return tot / (eps ** mu * B0 * xi ** (1 + mu))


def test_criterion_3_chi0_B0_nu_pipeline(ref_coeffs):
    t0 = time.perf_counter()
    c = ref_coeffs
    C = 1 / (c.c_minus * c.A1 * (c.n_exp - c.sigma))
    y = -1e3 * c.M0
    # chi0(y) = int_{-inf}^y dz / (D Q0), by quadrature with z = y/u^2
    g = lambda u: 2 * abs(y) / u ** 3 / float(cf.eval_D(c, y / u ** 2) * cf.eval_Q0(c, y / u ** 2))
    chi_quad = integrate.quad(g, 0, 1, epsabs=0, epsrel=1e-12)[0]
    target = C * abs(y) ** (c.sigma - c.n_exp)
    tail_rel = max(abs(chi_quad / target - 1), abs(cf.eval_chi0(c, y) / target - 1))
    assert cf.compute_C_minus(c) == pytest.approx(C, rel=1e-14)
    mu, nu = cf.compute_mu(c), cf.compute_nu(c)
    m1, m2 = _prelimit_multiplier(c, 1e-3), _prelimit_multiplier(c, 1e-4)
    # m(eps) = nu + a eps^(1-mu) + ...: one Richardson step removes the leading correction
    r = (1e-4 / 1e-3) ** (1 - mu)
    extrap = (m2 - r * m1) / (1 - r)
    secs = time.perf_counter() - t0
    ok = tail_rel <= 1e-6 and abs(extrap / nu - 1) <= 0.01 and secs < 30
    record(3, ok, f"chi0 tail rel err {tail_rel:.1e}; m(1e-3)={m1:.5f} m(1e-4)={m2:.5f} -> {extrap:.6f} "
                  f"vs nu={nu:.6f} ({extrap / nu - 1:+.1e}); {secs:.1f} s")
    assert ok


# -- 4 -----------------------------------------------------------------------------
def test_criterion_4_kinetic_invariants(e2_run):
    res, secs = e2_run
    reps = {r.name: r for r in res.data["reports"]}
    needed = ["stationarity", "mass_drift_per_step", "entropy_monotone", "sup_bound",
              "weighted_mass_drift", "deviation_bound"]
    ok = all(reps[n].passed for n in needed) and secs < 300
    record(4, ok, ", ".join(f"{n}={reps[n].measured:.2e}" for n in needed) + f"; eps=0.05, {secs:.0f} s")
    assert ok, "\n".join(res.summary)


# -- 5 -----------------------------------------------------------------------------
@pytest.mark.xfail(strict=True, reason="L1 error grows as eps decreases at T=0.5 on the reference sweep")
def test_criterion_5_e1_limit(e1_run):
    res, secs = e1_run
    tab = res.data["table"]
    ok = tab.monotone and secs < 1800
    errs = ", ".join(f"{e:g}:{v:.3g}" for e, v in zip(tab.eps, tab.errors))
    record(5, ok, f"L1 {errs} -> {tab.verdict}; {secs:.0f} s")
    assert ok


# -- 6 -----------------------------------------------------------------------------
def _periodic_heat(rho0: MacroField, nu: float, t: float, images: int = 6) -> np.ndarray:
    """Periodized Gaussian kernel convolved with rho0 (trapezoid rule, spectrally accurate)."""
    x, L = rho0.centers(), rho0.L
    var = 2 * nu * t
    d = x[:, None] - x[None, :]
    kern = sum(np.exp(-(d + j * L) ** 2 / (2 * var)) for j in range(-images, images + 1))
    return kern @ rho0.values * rho0.dx / math.sqrt(2 * math.pi * var)


def test_criterion_6_fractional_solver():
    L = 2 * math.pi
    rho0 = MacroField.from_function(lambda x: np.exp(np.cos(x)) + 0.3 * np.sin(3 * x), L, 64)
    p = FractionalProblem(0.373, 1.75, rho0)
    semi = np.abs(solve(FractionalProblem(0.373, 1.75, solve(p, 0.2)), 0.3).values - solve(p, 0.5).values).max()
    heat = np.abs(solve(FractionalProblem(0.4, 2.0, rho0), 0.5).values - _periodic_heat(rho0, 0.4, 0.5)).max()
    single = MacroField.from_function(lambda x: np.cos(3 * x), L, 32)
    got = solve(FractionalProblem(0.5, 1.75, single), 0.7).values
    decay = np.abs(got - math.exp(-0.5 * 3 ** 1.75 * 0.7) * single.values).max()
    xs = np.linspace(0, 8, 17)
    s = 0.6 * 0.5
    cauchy = np.abs(self_similar_profile(1.0, 0.6, 0.5, xs) - s / (math.pi * (s * s + xs * xs))).max()
    ok = semi <= 1e-12 and heat <= 1e-10 and decay <= 1e-12 and cauchy <= 1e-6
    record(6, ok, f"semigroup {semi:.1e}, heat {heat:.1e}, mode decay {decay:.1e}, Cauchy {cauchy:.1e}")
    assert ok


# -- 7 -----------------------------------------------------------------------------
def test_criterion_7_particles(e3_run):
    res, secs = e3_run
    checks = {n: (v, r, ok) for n, v, r, ok in res.data["checks"]}
    ok = all(c[2] for c in checks.values()) and secs < 1200
    l1, bar3, _ = checks["l1_vs_fractional"]
    detail = (f"KS {checks['ks_y_marginal'][0]:.4f}, thinning "
              + "/".join(f"{abs(checks[k][0] / checks[k][1] - 1):.2%}" for k in checks if k.startswith("thinning"))
              + f", Hill {checks['pareto_hill'][0]:.3f}, L1 {l1:.3f} < 3 bar {bar3:.3f}; {secs:.0f} s")
    record(7, ok, detail)
    assert ok, "\n".join(res.summary)


# -- 8 -----------------------------------------------------------------------------
@pytest.mark.xfail(strict=True, reason="|RJ1| and |J2| are not monotone in eps at the reference modes")
def test_criterion_8_flux_monotone(e4_run):
    res, _ = e4_run
    verdicts = res.data["verdicts"]
    bad = [f"{n} mode {k}" for n, k, _, ok, _ in verdicts if not ok]
    ok = not bad
    record(8, ok, "monotone: " + ("all" if ok else "not for " + ", ".join(bad)))
    assert ok


def test_criterion_8_nu_recovery(e4_run):
    res, secs = e4_run
    rows = res.data["nu_rows"]
    ok = all(abs(rel) <= 0.10 for *_, rel in rows)
    record(8, ok, "nu at eps=0.02: " + ", ".join(f"mode {m} {rel:+.1%}" for m, _, rel in rows) + f"; {secs:.0f} s")
    assert ok


# -- 9 -----------------------------------------------------------------------------
def test_criterion_9_reproducibility(e1_run, e2_run, e4_run, runs_dir):
    # a small particle run and a fractional run join the three kinetic runs
    small_e3 = reference_config(["experiment.id=E3", "scaling.eps=0.2", "run.N=10000", "grid.Nx=16", "run.T=0.05"])
    X.run_experiment(small_e3, runs_dir / "e3_small")
    X.run_experiment(reference_config(), runs_dir / "frac", "fractional")
    problems = []
    names = ["e1", "e2", "e4", "e3_small", "frac"]
    for name in names:
        same, diff = X.verify_manifest(runs_dir / name / "manifest.txt", runs_dir / f"{name}_rebuilt")
        problems += [f"{name}: {d}" for d in diff]
    ok = not problems
    record(9, ok, f"{len(names)} runs rebuilt from manifests; " + ("all hashes match" if ok else problems[0]))
    assert ok
