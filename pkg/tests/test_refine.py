import math

import numpy as np
import pytest

from corrpose.correspondence import CorruptionSpec
from corrpose.refine import RefinementConfig, model_alignment_error, refine
from corrpose.scene import Scene, SceneSpec, generate_scene
from corrpose.se3 import PoseSE3, exp, rotation_error, translation_error

ZERO_NOISE = SceneSpec(rot_noise_deg=0.0, trans_noise=(0.0, 0.0, 0.0))


def test_fixed_point(K, box5):
    sc = generate_scene(box5, K, ZERO_NOISE, 1)
    res = refine(sc, None, RefinementConfig(iterations=1, cycles=1))
    assert not res.failed
    assert res.pose.allclose(sc.pose_gt, atol=1e-10)


def test_fixed_point_every_residual_is_identity(K, box5):
    sc = generate_scene(box5, K, ZERO_NOISE, 2)
    res = refine(sc, None, RefinementConfig())
    for rec in res.trace.iterations:
        assert rec.delta.allclose(PoseSE3.identity(), atol=1e-10)
    assert res.pose.allclose(sc.pose_gt, atol=1e-10)


def test_noiseless_refinement_from_paper_noise(K, sphere500):
    ok = 0
    for seed in range(100):
        sc = generate_scene(sphere500, K, SceneSpec(), seed)
        res = refine(sc, None, RefinementConfig())
        ok += (math.degrees(rotation_error(res.pose, sc.pose_gt)) < 0.01
               and translation_error(res.pose, sc.pose_gt) < 1e-4)
    assert ok >= 99


def test_trace_shape_and_reconstruction(K, box5):
    sc = generate_scene(box5, K, SceneSpec(), 3)
    cfg = RefinementConfig(iterations=3, cycles=2, corruption=CorruptionSpec(1.0, 0.2))
    res = refine(sc, None, cfg)
    assert len(res.trace) == 6
    assert len(res.trace.cycle_poses) == 2
    for c in range(2):
        last = res.trace.iterations[3 * c + 2]
        rebuilt = last.delta @ res.trace.cycle_inits[c]
        assert rebuilt.allclose(res.trace.cycle_poses[c], atol=0)
    assert res.trace.cycle_poses[-1].allclose(res.pose, atol=0)
    assert res.trace.cycle_inits[0].allclose(sc.pose_init, atol=0)
    assert res.trace.cycle_inits[1].allclose(res.trace.cycle_poses[0], atol=0)


def test_median_alignment_error_improves_per_cycle(K, box5):
    per_cycle = []
    for seed in range(100):
        sc = generate_scene(box5, K, SceneSpec(rot_noise_deg=20.0), seed)
        res = refine(sc, None, RefinementConfig(provider="drift"))
        per_cycle.append([model_alignment_error(p, sc.pose_gt, box5) for p in res.trace.cycle_poses])
    med = np.median(np.array(per_cycle), axis=0)
    assert np.all(np.diff(med) <= 0)


def test_weighting_toggle_sees_identical_fields(K, box5):
    sc = generate_scene(box5, K, SceneSpec(), 4)
    cor = CorruptionSpec(1.0, 0.3, 50.0)
    a = refine(sc, None, RefinementConfig(corruption=cor, weighting=True, iterations=1, cycles=1))
    b = refine(sc, None, RefinementConfig(corruption=cor, weighting=False, iterations=1, cycles=1))
    assert a.trace.iterations[0].field_error == b.trace.iterations[0].field_error


def test_off_frame_is_reported_not_raised(K, box5):
    gt = PoseSE3(np.eye(3), [0, 0, 0.8])
    sc = Scene(box5, K, gt, PoseSE3(np.eye(3), [5.0, 0, 0.8]), seed=0)
    res = refine(sc, None, RefinementConfig())
    assert res.failed and "EmptyViewError" in res.error
    assert not res.converged


def test_refine_is_deterministic(K, box5):
    sc = generate_scene(box5, K, SceneSpec(), 9)
    cfg = RefinementConfig(corruption=CorruptionSpec(1.0, 0.3, 50.0), provider="drift")
    assert refine(sc, None, cfg).pose.allclose(refine(sc, None, cfg).pose, atol=0)


def test_config_validation():
    with pytest.raises(ValueError):
        RefinementConfig(iterations=0)
    with pytest.raises(ValueError):
        RefinementConfig(provider="gru")


def test_alignment_error_examples(box5, rng):
    p = PoseSE3(exp(np.r_[0, 0, 0, 0.3, 0.2, -0.1]).rotation, [0.1, 0, 0.8])
    assert model_alignment_error(p, p, box5) == 0
    shifted = PoseSE3(p.rotation, p.translation + [0.01, 0, 0])
    assert model_alignment_error(shifted, p, box5) == pytest.approx(0.01, abs=1e-15)
    q = exp(rng.normal(size=6) * 0.1) @ p
    brute = sum(
        sum(abs(a - b) for a, b in zip(q.apply(v), p.apply(v))) for v in box5.vertices
    ) / len(box5)
    assert model_alignment_error(q, p, box5) == pytest.approx(brute, rel=1e-12)
