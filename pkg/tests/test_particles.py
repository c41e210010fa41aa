import math

import numpy as np
import pytest
from scipy import stats

from frackin import coefficients as cf
from frackin import particles as P
from frackin.coefficients import ScalingContext
from frackin.errors import InvalidInputError, StabilityError
from frackin.experiments import pareto_control
from frackin.fields import MacroField
from frackin.kinetic import default_Y_max

L = 2 * math.pi


@pytest.fixture(scope="module")
def ctx():
    from conftest import REFERENCE

    return ScalingContext.build(cf.CoefficientSet(**REFERENCE), 0.05)


def _rho(Nx=32):
    return MacroField.from_function(lambda x: 1 + 0.5 * np.cos(x), L, Nx)


def test_maps_round_trip(ref_coeffs, rng):
    mp = P.state_maps(ref_coeffs)
    u = rng.random(2000)
    np.testing.assert_allclose(mp.cdf(mp.inv_cdf(u)), u, atol=1e-10)
    y = np.concatenate([rng.uniform(-3, 3, 500), -10 ** rng.uniform(0.5, 6, 200), 10 ** rng.uniform(0.5, 6, 200)])
    np.testing.assert_allclose(mp.inv_chi(mp.chi(y)), y, rtol=1e-7, atol=1e-7)
    # tabulated maps agree with the direct quadrature
    np.testing.assert_allclose(mp.chi(y), cf.eval_chi0(ref_coeffs, y), rtol=1e-9)
    np.testing.assert_allclose(mp.cdf(y), cf.Q0_cdf(ref_coeffs, y), atol=1e-10)


def test_chi0_is_the_scale_function(ref_coeffs):
    # generator of the y diffusion: b chi0' + D chi0'' = 0 (chi0 is harmonic)
    c = ref_coeffs
    for y in (-40.0, -2.3, -1.0, 0.5, 2.1, 2.4, 25.0):
        h = 1e-5 * max(1.0, abs(y))
        d1 = 1.0 / (cf.eval_D(c, y) * cf.eval_Q0(c, y))
        d2 = (1 / (cf.eval_D(c, y + h) * cf.eval_Q0(c, y + h)) - 1 / (cf.eval_D(c, y - h) * cf.eval_Q0(c, y - h))) / (2 * h)
        gen = P.sde_drift(c, y) * d1 + cf.eval_D(c, y) * d2
        assert abs(gen) <= 1e-5 * abs(P.sde_drift(c, y) * d1)


def test_drift_matches_fokker_planck_form(ref_coeffs):
    # forward operator d_y(D Q0 d_y(p/Q0)) = d_y(D p' - D p Q0'/Q0): Ito drift D' + D Q0'/Q0
    c = ref_coeffs
    for y in (-30.0, -1.5, 0.2, 2.2, 50.0):
        h = 1e-6 * max(1.0, abs(y))
        dD = (cf.eval_D(c, y + h) - cf.eval_D(c, y - h)) / (2 * h)
        dlogQ = (math.log(cf.eval_Q0(c, y + h)) - math.log(cf.eval_Q0(c, y - h))) / (2 * h)
        assert P.sde_drift(c, y) == pytest.approx(dD + cf.eval_D(c, y) * dlogQ, rel=1e-5)


def test_y_marginal_stays_q0(ref_coeffs, ctx):
    ens = P.init_ensemble(ref_coeffs, ctx, _rho(), 20_000, seed=3)
    fin = P.simulate(ens, 0.05, 2.5e-4)
    cdf = P.truncated_q0_cdf(ref_coeffs, ens.Y_max)
    assert stats.kstest(fin.y, cdf).statistic < 0.02
    assert np.abs(fin.y).max() <= ens.Y_max
    assert not np.array_equal(fin.y, ens.y)


def test_thinning_reproduces_rates(ref_coeffs, ctx):
    for chk in P.thinning_rate_control(ref_coeffs, ctx, N=10_000, seed=1):
        assert chk.rel_error <= 0.02


def test_seed_determinism(ref_coeffs, ctx):
    run = lambda seed: P.simulate(P.init_ensemble(ref_coeffs, ctx, _rho(), 2000, seed), 0.01, 2.5e-4)
    a, b, d = run(5), run(5), run(6)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)
    assert not np.array_equal(a.x, d.x)
    # thread count does not enter the random streams
    c_ = P.simulate(P.init_ensemble(ref_coeffs, ctx, _rho(), 2000, 5), 0.01, 2.5e-4, threads=4)
    np.testing.assert_array_equal(a.x, c_.x)


def test_free_flight_speed(ref_coeffs, ctx):
    ens = P.init_ensemble(ref_coeffs, ctx, _rho(), 500, seed=2)
    none = lambda y: np.zeros_like(y)
    T = 0.01
    fin = P.simulate(ens, T, 1e-3, lambda_fn=none, lambda_max=1e-12, freeze_y=True)
    expected = (ens.x + ctx.transport_rate() * ens.v * T) % L
    np.testing.assert_allclose(fin.x, expected, atol=1e-10)
    assert not fin.tumbled.any()


def test_raw_mode_refuses_unstable_step(ref_coeffs, ctx):
    ens = P.init_ensemble(ref_coeffs, ctx, _rho(), 100, seed=0)
    bound = P.raw_dt_bound(ref_coeffs, ctx, ens.Y_max)
    with pytest.raises(StabilityError) as info:
        P.simulate(ens, 1.0, 10 * bound, mode="raw")
    assert info.value.suggested == pytest.approx(bound)


def test_raw_and_scale_modes_agree_on_small_box(ref_coeffs):
    # on a modest truncation both integrators keep Q0 invariant
    ctx = ScalingContext.build(ref_coeffs, 1.0)
    Y = 10.0
    ens = P.init_ensemble(ref_coeffs, ctx, _rho(), 20_000, seed=4, Y_max=Y)
    dt = P.raw_dt_bound(ref_coeffs, ctx, Y) / 20
    n = int(0.05 / dt)
    raw = P.simulate(ens, n * dt, dt, mode="raw")
    scale = P.simulate(ens, n * dt, dt)
    cdf = P.truncated_q0_cdf(ref_coeffs, Y)
    assert stats.kstest(scale.y, cdf).statistic < 0.02
    assert stats.kstest(raw.y, cdf).statistic < 0.03
    assert np.mean(raw.y != ens.y) > 0.9


def test_pareto_control():
    est = pareto_control(1.75, 100_000, 0, 0.05)
    assert abs(est.exponent - 1.75) <= 0.05
    assert est.ci[0] < est.exponent < est.ci[1] and est.ci[1] - est.ci[0] < 0.2
    assert est.heavy_tail


def test_exponential_is_flagged_not_heavy():
    rng = np.random.default_rng(11)
    est = P.run_tail_estimate(rng.exponential(1.0, 100_000), 0.05)
    assert not est.heavy_tail


def test_hill_checks():
    with pytest.raises(InvalidInputError):
        P.hill_estimate(np.ones(10), 10)
    with pytest.raises(InvalidInputError):
        P.run_tail_estimate(np.ones(10))


def test_mc_error_bar_matches_sampling_noise():
    rng = np.random.default_rng(5)
    Nx, N = 32, 5000
    rho = MacroField(np.ones(Nx) / L, L)
    bar = P.mc_error_bar(rho, N)
    errs = []
    for _ in range(200):
        counts = rng.multinomial(N, np.full(Nx, 1 / Nx))
        errs.append(np.abs(counts / (N * L / Nx) - rho.values).sum() * L / Nx)
    assert np.mean(errs) == pytest.approx(bar, rel=0.05)


def test_empirical_density_mass(ref_coeffs, ctx):
    ens = P.init_ensemble(ref_coeffs, ctx, _rho(), 5000, seed=1)
    assert P.empirical_density(ens, 32, mass=2.0).integral() == pytest.approx(2.0, rel=1e-13)
    assert ens.Y_max == default_Y_max(ref_coeffs)


def test_ensemble_and_log_io(tmp_path, ref_coeffs, ctx):
    ens = P.simulate(P.init_ensemble(ref_coeffs, ctx, _rho(), 300, 1, log_runs=True), 0.01, 2.5e-4)
    raw = P.load_ensemble(P.save_ensemble(ens, tmp_path / "e.bin"))
    np.testing.assert_array_equal(raw["x"], ens.x)
    np.testing.assert_array_equal(raw["y"], ens.y)
    d = ens.durations()
    assert d.size > 0 and np.all(d > 0)
    back = P.read_run_log(P.write_run_log(d, tmp_path / "r.csv"))
    np.testing.assert_array_equal(back, d)


def test_input_checks(ref_coeffs, ctx):
    with pytest.raises(InvalidInputError):
        P.init_ensemble(ref_coeffs, ctx, _rho(), 0, 0)
    with pytest.raises(InvalidInputError):
        P.init_ensemble(ref_coeffs, ctx, MacroField(-np.ones(8), L), 10, 0)
    ens = P.init_ensemble(ref_coeffs, ctx, _rho(), 10, 0)
    with pytest.raises(InvalidInputError):
        P.simulate(ens, 0.1, 0.0)
    with pytest.raises(InvalidInputError):
        P.simulate(ens, 0.1, 1e-3, mode="milstein")
