"""Kernel estimators, batch-means errors, and the ratio statistics."""

import math

import numpy as np
import pytest

from ppbell.errors import ConfigError, UnstableDenominatorError
from ppbell.estimators import (
    BATCH,
    AngleSet,
    BellStatistic,
    GInfinity,
    GPhi,
    Joint,
    Marginal,
    MeasurementPlan,
    MomentAccumulator,
    NormZ,
    RatioSpec,
    accumulate,
    ch_design,
    chd_design,
    chsh_design,
    concat_designs,
    correlator_g,
    moments_design,
    norm_z,
    prob_joint,
    prob_marginal,
    s_chd,
    stderr_batch,
)
from ppbell.phasespace import PhasePoint
from ppbell.runner import STREAM_DYNAMIC, substream
from ppbell.sde import SdeConfig, simulate


def small_ensemble(n=1 << 13, tau=0.1, seed=8):
    cfg = SdeConfig(t_end=tau, n_traj=n, seed=seed, record_times=(tau,))
    return simulate(cfg, workers=1)[tau]


def test_angle_set_construction():
    ang = AngleSet.from_relative(0.3)
    assert ang.theta == 0.0
    assert ang.phi == pytest.approx(0.3)
    assert ang.theta_p == pytest.approx(0.6)
    assert ang.phi_p == pytest.approx(0.9)
    assert len(ang.pairs()) == 4


def test_accumulator_rejects_bad_chunks():
    acc = MomentAccumulator(2)
    with pytest.raises(ConfigError):
        acc.add_chunk(np.zeros((3, BATCH)))
    with pytest.raises(ConfigError):
        acc.add_chunk(np.zeros((2, BATCH + 1)))
    with pytest.raises(ConfigError):
        acc.mean()
    acc.add_chunk(np.zeros((2, BATCH), dtype=complex))
    with pytest.raises(ConfigError):
        acc.cov_of_mean()  # one batch cannot estimate a variance


def test_accumulator_merge_is_order_independent(rng):
    data = rng.standard_normal((3, 4 * BATCH)) + 1j * rng.standard_normal((3, 4 * BATCH))
    whole = MomentAccumulator(3)
    whole.add_chunk(data)
    pieces = []
    for k in range(4):
        a = MomentAccumulator(3)
        a.add_chunk(data[:, k * BATCH:(k + 1) * BATCH])
        pieces.append(a)
    m1 = pieces[0].merge(pieces[1]).merge(pieces[2]).merge(pieces[3])
    m2 = pieces[3].merge(pieces[2].merge(pieces[1].merge(pieces[0])))
    np.testing.assert_allclose(m1.mean(), whole.mean(), rtol=1e-12)
    np.testing.assert_allclose(m1.mean(), m2.mean(), rtol=1e-12)
    np.testing.assert_allclose(m1.cov_of_mean(), whole.cov_of_mean(), rtol=1e-9)
    with pytest.raises(ConfigError):
        pieces[0].merge(MomentAccumulator(2))


def test_batch_means_stderr_tracks_iid_scale(rng):
    n = 1 << 16
    data = rng.standard_normal((1, n)) + 0j
    acc = MomentAccumulator(1)
    acc.add_chunk(data)
    se = stderr_batch(acc, 0)
    assert abs(se - 1.0 / math.sqrt(n)) < 0.15 / math.sqrt(n)


def test_constant_samples_have_zero_stderr():
    acc = MomentAccumulator(1)
    acc.add_chunk(np.full((1, 2 * BATCH), 2.5 + 0.5j))
    assert stderr_batch(acc, 0) == 0.0
    assert acc.mean()[0] == pytest.approx(2.5 + 0.5j)


def test_ratio_spec_on_synthetic_means(rng):
    # value = (2 m0 - m1) / (1 + m2) with known inputs and tiny noise
    n = 8 * BATCH
    noise = 1e-3 * rng.standard_normal((3, n))
    data = np.array([[3.0], [1.0], [0.5]]) + noise + 0j
    acc = MomentAccumulator(3)
    acc.add_chunk(data)
    spec = RatioSpec(name="toy", num=((2.0, 0), (-1.0, 1)), den=((1.0, 2),),
                     den_const=1.0)
    st = spec.evaluate(acc, params={"note": "toy"}, lhv_bound=1.0)
    assert st.value == pytest.approx(5.0 / 1.5, abs=1e-2)
    assert st.stderr > 0
    assert st.imag_consistent()
    assert st.params["note"] == "toy"


def test_unstable_denominator_raises(rng):
    n = 4 * BATCH
    data = rng.standard_normal((1, n)) + 0j  # zero-mean denominator
    acc = MomentAccumulator(1)
    acc.add_chunk(data)
    spec = RatioSpec(name="bad", num=((1.0, 0),), den=((1.0, 0),))
    with pytest.raises(UnstableDenominatorError):
        spec.evaluate(acc, params={}, lhv_bound=1.0)


def test_imag_floor_for_exactly_real_combinations():
    st = BellStatistic(name="x", value=1.0, stderr=0.1,
                       imag_residual=1e-18, imag_stderr=0.0,
                       n_samples=BATCH, params={}, lhv_bound=1.0)
    assert st.imag_consistent()
    st2 = BellStatistic(name="x", value=1.0, stderr=0.1,
                        imag_residual=1e-3, imag_stderr=1e-5,
                        n_samples=BATCH, params={}, lhv_bound=1.0)
    assert not st2.imag_consistent()


def test_violation_flag_uses_lhv_bound():
    st = BellStatistic(name="x", value=1.2, stderr=0.01, imag_residual=0.0,
                       imag_stderr=0.0, n_samples=BATCH, params={},
                       lhv_bound=1.0)
    assert st.violation
    st2 = BellStatistic(name="x", value=1.2, stderr=0.01, imag_residual=0.0,
                        imag_stderr=0.0, n_samples=BATCH, params={},
                        lhv_bound=2.0)
    assert not st2.violation


def test_plan_measure_shapes_and_rotation_cache(doubled_point):
    plan = MeasurementPlan(components=(
        GPhi(theta=0.0, phi=0.3, I=1, J=1),
        GPhi(theta=0.0, phi=0.3, I=2, J=2),
        GInfinity(I=1, J=1),
        Joint(theta=0.1, phi=0.2, pattern="++"),
        Marginal(side="A", angle=0.4),
        NormZ(),
    ))
    out = plan.measure(doubled_point.alpha, doubled_point.alpha_plus)
    assert out.shape == (6, doubled_point.n_samples)
    out2 = plan.measure(doubled_point.alpha, doubled_point.alpha_plus)
    np.testing.assert_array_equal(out, out2)


def test_direct_ops_match_design_pipeline():
    pt = small_ensemble()
    phi = math.pi / 8

    g_phi, g_inf = correlator_g(pt, 1, 1, 1, phi)
    plan, ratio = chd_design(1, phi)
    m = accumulate(plan, pt).mean()
    assert g_phi == pytest.approx(complex(m[0]), rel=1e-12)
    assert g_inf == pytest.approx(complex(m[2]), rel=1e-12)

    s_direct = s_chd(pt, 1, phi)
    st = ratio.evaluate(accumulate(plan, pt), params={}, lhv_bound=1.0)
    assert s_direct.value == pytest.approx(st.value, rel=1e-12)

    assert prob_joint(pt, 0.0, phi, "++").real > 0
    assert prob_marginal(pt, "A", phi).real > 0
    assert 0 < norm_z(pt).real < 1


def test_ch_postselection_is_algebraically_inert():
    pt = small_ensemble()
    ang = AngleSet()
    plan_n, ratio_n = ch_design(ang, postselect=False)
    plan_p, ratio_p = ch_design(ang, postselect=True)
    st_n = ratio_n.evaluate(accumulate(plan_n, pt), params={}, lhv_bound=1.0)
    st_p = ratio_p.evaluate(accumulate(plan_p, pt), params={}, lhv_bound=1.0)
    assert abs(st_n.value - st_p.value) <= 1e-12
    assert abs(st_n.stderr - st_p.stderr) <= 1e-12 * max(st_n.stderr, 1.0)


def test_chsh_design_shapes():
    plan_p, _ = chsh_design(AngleSet(), postselect=True)
    plan_n, ratio_n = chsh_design(AngleSet(), postselect=False)
    assert plan_p.n_components == 17  # 16 joints + norm
    assert plan_n.n_components == 16
    assert ratio_n.den == ()
    assert ratio_n.den_const == 2.0


def test_concat_designs_shifts_indices():
    fused, ratios = concat_designs([chd_design(1, 0.1), chd_design(1, 0.2)])
    assert fused.n_components == 6
    assert ratios[0].num[0][1] == 0
    assert ratios[1].num[0][1] == 3
    pt = small_ensemble(n=1 << 12)
    acc = accumulate(fused, pt)
    solo = chd_design(1, 0.2)
    st_solo = solo[1].evaluate(accumulate(solo[0], pt), params={}, lhv_bound=1.0)
    st_fused = ratios[1].evaluate(acc, params={}, lhv_bound=1.0)
    assert st_solo.value == pytest.approx(st_fused.value, rel=1e-12)


def test_moments_design_covers_raw_kinds():
    plan = moments_design()
    pt = small_ensemble(n=1 << 12)
    acc = accumulate(plan, pt)
    m = acc.mean()
    assert plan.n_components == 7
    # symmetric pair: both polarizations carry the same mean intensity
    assert m[0].real == pytest.approx(m[1].real, abs=5e-3)
