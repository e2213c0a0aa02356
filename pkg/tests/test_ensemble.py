"""Thermal-cloud averaging: quadrature vs Monte Carlo, determinism."""

import numpy as np
import pytest

from ramanlmt.constants import (RB85, KinematicState, TWO_PI, resonant_offset,
                                thermal_sigma_v)
from ramanlmt.ensemble import (EnsembleSpec, EnsembleResult,
                               GaussHermiteSampling, MonteCarloSampling,
                               run_ensemble, sample_velocities)
from ramanlmt.errors import LadderOverflow
from ramanlmt.sequencer import make_single_pulse

KIN = KinematicState(v0=0.1962, g=9.81)

# frozen regression: 14 uK cloud, 10 us resonant pi pulse on the +1 pair;
# Doppler dephasing (k_eff*sigma_v ~ 2pi x 95 kHz vs Rabi 2pi x 50 kHz)
# caps the transfer well below 1
THERMAL_PI_TRANSFER = 0.3461641088431483
DOPPLER_FREE_TRANSFER = 0.9888558605117292


def resonant_probe(addressed=+1):
    offset = resonant_offset(RB85, KIN, addressed)
    return make_single_pulse(RB85, KIN, duration=10e-6, rabi=TWO_PI * 50e3,
                             omega_offset=offset, addressed=addressed)


def gh_ensemble(order=40, temperature=14e-6):
    return EnsembleSpec(temperature=temperature, v0_bias=KIN.v0,
                        sampling=GaussHermiteSampling(order))


def test_weights_sum_to_one_and_center_on_bias():
    for sampling in (GaussHermiteSampling(40), MonteCarloSampling(5000, 7)):
        spec = EnsembleSpec(temperature=14e-6, v0_bias=0.1962,
                            sampling=sampling)
        vs, ws = sample_velocities(spec, RB85)
        assert ws.sum() == pytest.approx(1.0, rel=1e-12)
        assert float(np.sum(ws * vs)) == pytest.approx(0.1962, abs=3e-3)


def test_gauss_hermite_nodes_symmetric_about_bias():
    vs, ws = sample_velocities(gh_ensemble(11), RB85)
    np.testing.assert_allclose(vs + vs[::-1], 2 * 0.1962, atol=1e-12)
    np.testing.assert_allclose(ws, ws[::-1], atol=1e-18)


def test_single_node_quadrature_is_the_bias_atom():
    vs, ws = sample_velocities(gh_ensemble(1), RB85)
    assert vs.shape == (1,) and ws.shape == (1,)
    assert vs[0] == pytest.approx(0.1962)
    assert ws[0] == pytest.approx(1.0)


def test_monte_carlo_sampling_is_seeded_and_gaussian():
    spec = EnsembleSpec(temperature=14e-6, v0_bias=0.1962,
                        sampling=MonteCarloSampling(20000, seed=321))
    va, wa = sample_velocities(spec, RB85)
    vb, _ = sample_velocities(spec, RB85)
    np.testing.assert_array_equal(va, vb)
    sigma = thermal_sigma_v(RB85, 14e-6)
    assert va.mean() == pytest.approx(0.1962, abs=4 * sigma / np.sqrt(20000))
    assert va.std(ddof=1) == pytest.approx(sigma, rel=0.05)
    np.testing.assert_allclose(wa, 1.0 / 20000)
    other, _ = sample_velocities(
        EnsembleSpec(temperature=14e-6, v0_bias=0.1962,
                     sampling=MonteCarloSampling(20000, seed=322)), RB85)
    assert not np.array_equal(va, other)


def test_thermal_pi_transfer_regression():
    r = run_ensemble(resonant_probe(), gh_ensemble(), RB85, n_max=4)
    assert r.mean_population_f3 == pytest.approx(THERMAL_PI_TRANSFER,
                                                 rel=1e-9)
    assert r.stderr == 0.0
    assert r.values.shape == (40,)


def test_doppler_free_channel_ignores_temperature():
    probe = make_single_pulse(RB85, KIN, duration=10e-6, rabi=TWO_PI * 50e3,
                              omega_offset=0.0, addressed=0)
    r = run_ensemble(probe, gh_ensemble(), RB85, n_max=4)
    assert r.mean_population_f3 == pytest.approx(DOPPLER_FREE_TRANSFER,
                                                 rel=1e-9)
    assert r.mean_population_f3 > 0.95


def test_samplers_agree_on_the_probe_transfer():
    spec = EnsembleSpec(temperature=14e-6, v0_bias=KIN.v0,
                        sampling=MonteCarloSampling(4000, seed=99))
    r = run_ensemble(resonant_probe(), spec, RB85, n_max=4)
    assert r.stderr > 0.0
    assert abs(r.mean_population_f3 - THERMAL_PI_TRANSFER) < 4 * r.stderr


def test_chunk_size_does_not_change_results_bitwise():
    ref = run_ensemble(resonant_probe(), gh_ensemble(), RB85, n_max=4)
    for chunk in (1, 7, 64):
        r = run_ensemble(resonant_probe(), gh_ensemble(), RB85, n_max=4,
                         chunk_size=chunk)
        assert r.mean_population_f3 == ref.mean_population_f3
        np.testing.assert_array_equal(r.values, ref.values)


def test_monte_carlo_stderr_shrinks_with_count():
    def stderr(count):
        spec = EnsembleSpec(temperature=14e-6, v0_bias=KIN.v0,
                            sampling=MonteCarloSampling(count, seed=5))
        return run_ensemble(resonant_probe(), spec, RB85, n_max=4).stderr
    ratio = stderr(1000) / stderr(4000)
    assert 1.6 < ratio < 2.6


def test_hotter_cloud_transfers_less_on_a_side_resonance():
    cold = run_ensemble(resonant_probe(), gh_ensemble(temperature=5e-6),
                        RB85, n_max=4)
    hot = run_ensemble(resonant_probe(), gh_ensemble(temperature=20e-6),
                       RB85, n_max=4)
    assert hot.mean_population_f3 < cold.mean_population_f3


def test_overflow_propagates_with_offending_velocity():
    strong = make_single_pulse(RB85, KinematicState(v0=2.5, g=0.0),
                               duration=40e-6, rabi=TWO_PI * 2e6,
                               omega_offset=0.0, substeps=8)
    spec = EnsembleSpec(temperature=1e-6, v0_bias=2.5,
                        sampling=GaussHermiteSampling(5))
    with pytest.raises(LadderOverflow) as err:
        run_ensemble(strong, spec, RB85, g=0.0, n_max=2)
    assert err.value.velocity == pytest.approx(2.5, abs=0.05)


def test_result_guards():
    ok = dict(stderr=0.0, velocities=np.zeros(1), weights=np.ones(1),
              values=np.zeros(1))
    with pytest.raises(ValueError):
        EnsembleResult(mean_population_f3=1.5, **ok)
    with pytest.raises(ValueError):
        EnsembleResult(mean_population_f3=0.5, stderr=-1.0,
                       velocities=np.zeros(1), weights=np.ones(1),
                       values=np.zeros(1))


def test_spec_guards_and_from_fall():
    with pytest.raises(ValueError):
        GaussHermiteSampling(0)
    with pytest.raises(ValueError):
        MonteCarloSampling(1)
    with pytest.raises(ValueError):
        EnsembleSpec(temperature=-1e-6, v0_bias=0.0,
                     sampling=GaussHermiteSampling(4))
    spec = EnsembleSpec.from_fall(14e-6, 0.020, GaussHermiteSampling(4),
                                  g=9.81)
    assert spec.v0_bias == pytest.approx(0.1962)
    assert spec.t_fall == pytest.approx(0.020)
