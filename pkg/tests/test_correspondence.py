import math

import numpy as np
import pytest

from corrpose.correspondence import (
    CorruptionSpec,
    DescriptorBank,
    DescriptorSpec,
    DriftProvider,
    OracleProvider,
    corrupt_field,
    identity_field,
    oracle_provider,
    rectify,
    similarity_weights,
    synth_descriptors,
)
from corrpose.errors import InvalidArgumentError
from corrpose.fields import CorrespondenceField
from corrpose.lm import LMSettings, PoseProblem, lm_solve
from corrpose.scene import ground_truth_field, render_view
from corrpose.se3 import PoseSE3, exp, log


@pytest.fixture
def big_field(rng):
    n = 10_000
    return CorrespondenceField(rng.uniform(0, 640, (n, 2)), np.ones(n, dtype=bool))


@pytest.fixture
def view(K, sphere500):
    return render_view(sphere500, PoseSE3(exp([0, 0, 0, 0.3, -0.2, 0.1]).rotation, [0.01, 0.02, 0.85]), K)


def test_zero_corruption_is_identity(big_field):
    out = oracle_provider(big_field, CorruptionSpec(), seed=1)
    np.testing.assert_array_equal(out.targets, big_field.targets)
    np.testing.assert_array_equal(out.valid, big_field.valid)


def test_all_outliers_stay_in_disk(big_field):
    out = oracle_provider(big_field, CorruptionSpec(0.0, 1.0, 50.0), seed=2)
    d = np.linalg.norm(out.targets - big_field.targets, axis=1)
    assert d.max() <= 50.0
    # mean radius of a uniform disk sample is 2R/3
    assert d.mean() == pytest.approx(2 / 3 * 50, rel=0.02)


def test_gaussian_noise_std(big_field):
    out = oracle_provider(big_field, CorruptionSpec(2.0, 0.0), seed=3)
    d = out.targets - big_field.targets
    assert d[:, 0].std() == pytest.approx(2.0, rel=0.05)
    assert d[:, 1].std() == pytest.approx(2.0, rel=0.05)


def test_outlier_fraction_and_mask(big_field):
    est = corrupt_field(big_field, CorruptionSpec(0.0, 0.3, 50.0), np.random.default_rng(4))
    assert est.outlier_mask.mean() == pytest.approx(0.3, abs=0.02)
    moved = np.linalg.norm(est.field.targets - big_field.targets, axis=1) > 0
    np.testing.assert_array_equal(moved, est.outlier_mask)


def test_provider_determinism(big_field):
    spec = CorruptionSpec(1.0, 0.2, 30.0)
    a = oracle_provider(big_field, spec, seed=9)
    b = oracle_provider(big_field, spec, seed=9)
    np.testing.assert_array_equal(a.targets, b.targets)


def test_invalid_entries_untouched(rng):
    f = CorrespondenceField(rng.uniform(0, 100, (50, 2)), np.arange(50) % 2 == 0)
    out = oracle_provider(f, CorruptionSpec(3.0, 0.5, 20.0), seed=0)
    np.testing.assert_array_equal(out.valid, f.valid)
    np.testing.assert_array_equal(out.targets[~f.valid], f.targets[~f.valid])


@pytest.mark.parametrize("kwargs", [
    dict(noise_std=-1), dict(outlier_fraction=1.5), dict(outlier_fraction=-0.1), dict(outlier_radius=0),
])
def test_corruption_validation(kwargs):
    with pytest.raises(InvalidArgumentError):
        CorruptionSpec(**kwargs)


def test_oracle_provider_ignores_prior(big_field):
    p = OracleProvider(CorruptionSpec(1.0, 0.1))
    a = p.estimate(big_field, big_field, np.random.default_rng(0))
    b = p.estimate(big_field, identity_field(np.zeros((len(big_field), 2))), np.random.default_rng(0))
    np.testing.assert_array_equal(a.field.targets, b.field.targets)


def test_drift_provider_out_of_window_is_spurious(rng):
    n = 4000
    gt = CorrespondenceField(np.tile([[30.0, 0.0]], (n, 1)), np.ones(n, bool))
    prior = identity_field(np.zeros((n, 2)))
    est = DriftProvider(CorruptionSpec(), window=8.0).estimate(gt, prior, rng)
    d = np.linalg.norm(est.field.targets, axis=1)
    assert d.max() <= 8.0
    assert d.mean() == pytest.approx(2 / 3 * 8.0, rel=0.03)
    # the spurious matches carry no information about the true direction
    assert abs(est.field.targets[:, 0].mean()) < 0.2
    assert est.outlier_mask.all()


def test_drift_provider_mixed_reach(rng):
    gt = CorrespondenceField(np.array([[5.0, 0.0], [30.0, 0.0], [0.0, 8.0]]), np.ones(3, bool))
    prior = identity_field(np.zeros((3, 2)))
    est = DriftProvider(CorruptionSpec(), window=8.0).estimate(gt, prior, rng)
    np.testing.assert_array_equal(est.field.targets[[0, 2]], gt.targets[[0, 2]])
    assert est.outlier_mask.tolist() == [False, True, False]


def test_drift_provider_within_window_is_exact(rng):
    gt = CorrespondenceField(rng.uniform(0, 100, (200, 2)), np.ones(200, bool))
    est = DriftProvider(CorruptionSpec(), window=8.0).estimate(gt, gt, rng)
    np.testing.assert_array_equal(est.field.targets, gt.targets)
    assert not est.outlier_mask.any()


def test_descriptors_unit_norm(rng):
    f = identity_field(np.zeros((500, 2)))
    mask = rng.uniform(size=500) < 0.3
    bank = synth_descriptors(f, mask, DescriptorSpec(), seed=1)
    np.testing.assert_allclose(np.linalg.norm(bank.model, axis=1), 1, atol=1e-9)
    np.testing.assert_allclose(np.linalg.norm(bank.target, axis=1), 1, atol=1e-9)


def test_zero_perturbation_gives_unit_weights():
    f = identity_field(np.zeros((300, 2)))
    bank = synth_descriptors(f, np.zeros(300, bool), DescriptorSpec(inlier_perturb=0.0), seed=2)
    np.testing.assert_allclose(np.einsum("ij,ij->i", bank.model, bank.target), 1.0, atol=1e-12)
    np.testing.assert_allclose(similarity_weights(bank), 1.0, atol=1e-12)


def test_outlier_descriptors_are_near_orthogonal():
    n = 10_000
    f = identity_field(np.zeros((n, 2)))
    bank = synth_descriptors(f, np.ones(n, bool), DescriptorSpec(dim=16), seed=3)
    dots = np.einsum("ij,ij->i", bank.model, bank.target)
    # random unit vectors in 16-D: E[d.d] = 0, Var = 1/16
    assert abs(dots.mean()) < 4 * 0.25 / math.sqrt(n)
    assert dots.std() == pytest.approx(0.25, rel=0.05)
    assert np.abs(1 - dots).mean() == pytest.approx(1.0, abs=0.02)


def test_inlier_weights_bounded_below():
    spec = DescriptorSpec(inlier_perturb=0.05)
    f = identity_field(np.zeros((2000, 2)))
    w = similarity_weights(synth_descriptors(f, np.zeros(2000, bool), spec, seed=4))
    assert w.min() >= math.exp(-0.05)
    assert w.max() <= 1.0


@pytest.mark.parametrize("kwargs", [dict(dim=1), dict(inlier_perturb=0.5), dict(inlier_perturb=-0.1), dict(sigma=0)])
def test_descriptor_spec_validation(kwargs):
    with pytest.raises(InvalidArgumentError):
        DescriptorSpec(**kwargs)


def _pair_bank(cosines, sigma=1.0):
    c = np.asarray(cosines, dtype=float)
    e1 = np.tile([1.0, 0.0], (c.size, 1))
    other = np.stack([c, np.sqrt(1 - c**2)], axis=1)
    return DescriptorBank(e1, other, sigma)


@pytest.mark.parametrize("cos,sigma,expected", [
    (1.0, 1.0, 1.0), (0.0, 1.0, 0.36787944117144233), (0.0, 2.0, 0.6065306597126334),
])
def test_similarity_examples(cos, sigma, expected):
    assert similarity_weights(_pair_bank([cos], sigma))[0] == pytest.approx(expected, abs=1e-15)


def test_similarity_exactly_one_only_at_unit_dot():
    w = similarity_weights(_pair_bank([1.0, 1 - 1e-12]))
    assert w[0] == 1.0 and w[1] < 1.0


def test_similarity_strictly_decreasing():
    cos = np.linspace(1, -1, 201)
    w = similarity_weights(_pair_bank(cos))
    assert np.all(np.diff(w) < 0)
    assert np.all((w > 0) & (w <= 1))


def test_rectify_identity(view, K):
    junk = CorrespondenceField(np.zeros((len(view), 2)), np.ones(len(view), bool))
    out = rectify(junk, view, PoseSE3.identity(), K)
    np.testing.assert_allclose(out.targets, view.pixels, atol=1e-10)


def test_rectify_with_true_delta_equals_ground_truth(view, K, rng):
    delta = exp([0.01, -0.02, 0.05, 0.05, 0.02, -0.04])
    gt = ground_truth_field(view, delta, K)
    noisy = oracle_provider(gt, CorruptionSpec(3.0, 0.4, 40.0), seed=5)
    out = rectify(noisy, view, delta, K)
    np.testing.assert_array_equal(out.targets, gt.targets)
    np.testing.assert_array_equal(out.valid, gt.valid)


def test_rectify_idempotent(view, K):
    delta = exp([0.02, 0.0, -0.03, 0.0, 0.1, 0.05])
    noisy = oracle_provider(ground_truth_field(view, delta, K), CorruptionSpec(2.0, 0.3), seed=6)
    once = rectify(noisy, view, delta, K)
    twice = rectify(once, view, delta, K)
    np.testing.assert_allclose(twice.targets, once.targets, rtol=0, atol=1e-12)


def test_rectified_field_is_rigid_consistent(view, K):
    delta = exp([0.03, -0.01, 0.08, -0.06, 0.1, 0.02])
    gt = ground_truth_field(view, delta, K)
    noisy = oracle_provider(gt, CorruptionSpec(1.0, 0.3, 50.0), seed=7)
    solved = lm_solve(PoseProblem.from_view(view, noisy, 1.0, K), LMSettings()).pose
    rect = rectify(noisy, view, solved, K)
    again = lm_solve(PoseProblem.from_view(view, rect, 1.0, K), LMSettings())
    np.testing.assert_allclose(log(again.pose), log(solved), atol=1e-8)
