import numpy as np
from pytest import approx, raises
from pytest import mark as pytestr
from saydream import metrics
from saydream.config import EvalConfig
from saydream.errors import ShapeError
from saydream.metrics import metric
from saydream.metrics.corruption import (scramble_gripper, swap_target,
                                         teleport_target)
from saydream.metrics.detect import detect_entities, detect_video
from saydream.metrics.embodiment import ec_aggregate, embodiment_consistency
from saydream.metrics.frechet import (feature_distance,
                                      frechet_feature_distance)
from saydream.metrics.quality import psnr, ssim
from saydream.metrics.report import (aggregate, build_report, read_report,
                                     score_video, score_videos, write_report)
from saydream.metrics.success import (interaction_success, referring_success,
                                      task_completion)
from saydream.sim import Color
from tests.helper import expert_trajectories

FULL = 32
EXPERTS = expert_trajectories(4, seed=7, size=FULL)


def test_registered_metrics():
    assert sorted(metrics.registry) == ['ec', 'isr', 'rsr', 'tcr']


def test_metric_signature_is_checked():
    with raises(TypeError):
        metric('X', 'no config', 'x')(lambda detections, task: True)
    with raises(ValueError):
        metric('X', 'bad aggregate', 'x', 'median')


def test_metric_keys_are_unique():
    before = dict(metrics.registry)
    with raises(ValueError):
        metric('EC2', 'duplicate', 'ec')(
            lambda detections, task, config: 1.0)
    assert metrics.registry == before


def test_detector_on_rendered_frames():
    traj = EXPERTS[0]
    det = detect_entities(traj.frames[0])
    gx, gy = traj.gripper_path()[0]
    assert det.gripper_score == approx(1.0)
    assert det.gripper_open
    assert det.gripper == approx((gx, gy), abs=1.0 / FULL)
    target = det.blocks[traj.task.target_color]
    assert target == approx(tuple(traj.target_path()[0]), abs=1.5 / FULL)
    x0, y0, x1, y1 = det.box
    assert x0 <= traj.box_region[0] and x1 >= traj.box_region[2]
    blank = detect_entities(np.ones((FULL, FULL, 3)))
    assert blank.gripper is None and blank.box is None
    assert all(p is None for p in blank.blocks.values())


@pytestr.parametrize('index', range(len(EXPERTS)))
def test_expert_episodes_pass_every_judge(index):
    traj = EXPERTS[index]
    config = EvalConfig()
    detections = detect_video(traj.frames, config.detect_min)
    assert referring_success(None, traj.task, detections, config)
    assert interaction_success(None, traj.task, detections, config)
    assert task_completion(None, traj.task, detections, config)
    row = score_video(traj.frames, traj.task, config, 'expert')
    assert row['ec_case'] == 'I' and row['ec'] == 3.0
    assert row['coverage'] == 1.0 and row['flags'] == []


def test_scrambled_grippers_lose_embodiment_consistency():
    broken = []
    for i, traj in enumerate(EXPERTS):
        for seed in range(5):
            video = scramble_gripper(traj, np.random.default_rng([i, seed]))
            scores = [d.gripper_score for d in detect_video(video)]
            broken.append(embodiment_consistency(scores)[0] != 'I')
    assert np.mean(broken) >= 0.9


def test_teleported_targets_fail_interaction():
    broken = [not interaction_success(teleport_target(t), t.task)
              for t in EXPERTS]
    assert np.mean(broken) >= 0.9


def test_swapped_targets_fail_completion():
    broken = [not task_completion(swap_target(t), t.task) for t in EXPERTS]
    assert np.mean(broken) >= 0.9


def test_embodiment_cases():
    assert embodiment_consistency([0.95, 0.99]) == ('I', 3)
    assert embodiment_consistency([0.95, 0.8]) == ('II', 2)
    assert embodiment_consistency([0.95, 0.2]) == ('III', 1)
    assert ec_aggregate([3, 2, 1, 2]) == 2.0
    with raises(ValueError):
        embodiment_consistency([])


def test_judges_need_frames():
    with raises(ValueError):
        referring_success(None, EXPERTS[0].task)
    with raises(ValueError):
        task_completion([], EXPERTS[0].task)


def test_ssim_and_psnr():
    rng = np.random.default_rng(0)
    a = rng.uniform(size=(16, 16, 3))
    assert ssim(a, a) == approx(1.0)
    assert psnr(a, a) == 99.0
    assert psnr(np.zeros((8, 8, 3)), np.full((8, 8, 3), 0.1)) == \
        approx(20.0)
    assert ssim(a, 1.0 - a) < 0.5
    with raises(ShapeError):
        ssim(a, a[:8])
    with raises(ShapeError):
        ssim(a[:5, :5], a[:5, :5])


def test_frechet_distance_of_shifted_gaussians():
    rng = np.random.default_rng(0)
    a = rng.normal(0.0, 1.0, size=10000)
    b = rng.normal(3.0, 1.0, size=10000)
    d2, jitter = feature_distance(a, b)
    assert d2 == approx(9.0, abs=0.5) and not jitter
    same, _ = feature_distance(a, a)
    assert same == approx(0.0, abs=1e-6)


def test_singular_covariances_get_jitter():
    d2, jitter = feature_distance(np.ones((5, 2)), np.zeros((5, 2)))
    assert jitter
    assert d2 == approx(2.0, abs=1e-4)


def test_clip_set_distance():
    clips = np.stack([t.frames[:4] for t in EXPERTS])
    d2, _ = frechet_feature_distance(clips, clips, dims=4)
    assert d2 == approx(0.0, abs=1e-4)
    with raises(ValueError):
        frechet_feature_distance(clips[:1], clips, dims=4)


def test_report(tmp_path):
    videos = [t.frames for t in EXPERTS]
    rows = score_videos(videos, [t.task for t in EXPERTS])
    assert [r['video'] for r in rows] == \
        ['video0000', 'video0001', 'video0002', 'video0003']
    aggregates = aggregate(rows)
    assert aggregates == {'ec': 3.0, 'isr': 100.0, 'rsr': 100.0,
                          'tcr': 100.0}
    assert {r['target'] for r in rows} == {c.label() for c in Color}
    report = build_report(rows, {'seed': 7}, {'dataset': 'abc'})
    path = str(tmp_path / 'report.json')
    write_report(path, report)
    back = read_report(path)
    assert back.aggregates == aggregates
    assert back.hashes == {'dataset': 'abc'} and back.flags == []
    assert back.quality is None
    assert aggregate([]) == {}
