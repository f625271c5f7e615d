import numpy as np
from pytest import approx, raises
from pytest import mark as pytestr
from saydream.errors import CheckpointError
from saydream.imagination import (compress_keyframes, dream, keyframe_indices,
                                  training_clip, uniform_sample)
from tests.helper import expert_trajectories, identity_codec, tiny_world_model


@pytestr.parametrize('T,n,expected', [
    (100, 4, [25, 50, 75, 100]),
    (3, 5, [1, 1, 1, 2, 3]),
    (7, 1, [7]),
    (8, 8, list(range(1, 9))),
])
def test_keyframe_indices(T, n, expected):
    assert keyframe_indices(T, n) == expected


@pytestr.randomize(T=int, n=int, min_num=1, max_num=300, ncalls=20)
def test_keyframes_end_on_the_last_frame(T, n):
    indices = keyframe_indices(T, n)
    assert len(indices) == n
    assert indices[-1] == T
    assert all(1 <= t <= T for t in indices)
    assert indices == sorted(indices)


def test_keyframe_errors():
    with raises(ValueError):
        keyframe_indices(10, 0)
    with raises(ValueError):
        keyframe_indices(0, 4)


def test_compress_keyframes():
    frames = [np.full((2, 2, 3), float(t)) for t in range(1, 11)]
    clip = compress_keyframes(frames, 5)
    assert clip.indices == [2, 4, 6, 8, 10]
    assert clip.n == 5 and clip.source_T == 10
    assert [float(f[0, 0, 0]) for f in clip.frames] == [2, 4, 6, 8, 10]


def test_training_clip_starts_with_the_observation():
    traj = expert_trajectories(1)[0]
    clip = training_clip(traj, 4)
    assert clip.indices == [0] + keyframe_indices(traj.length, 3)
    assert np.array_equal(clip.frames[0], traj.frames[0])
    assert np.array_equal(clip.frames[-1], traj.frames[-1])
    with raises(ValueError):
        training_clip(traj, 1)


def test_uniform_sample():
    assert uniform_sample(10, 4) == [0, 3, 6, 9]
    assert uniform_sample(5, 1) == [4]
    assert uniform_sample(1, 3) == [0, 0, 0]
    with raises(ValueError):
        uniform_sample(0, 2)


def test_dream():
    traj = expert_trajectories(1)[0]
    wm, codec = tiny_world_model(), identity_codec()
    clip = dream(traj.frames[0], traj.task, wm, codec, seed=5)
    assert clip.frames.shape == (4, 16, 16, 3)
    assert clip.latents.shape == (4, 16, 8, 8)
    assert clip.indices == [0, 1, 2, 3] and clip.source_T is None
    assert clip.frames[0] == approx(traj.frames[0], abs=1e-9)
    assert clip.meta['seed'] == 5
    again = dream(traj.frames[0], traj.task, wm, codec, seed=5)
    assert np.array_equal(clip.latents, again.latents)


def test_dream_checks_the_models_agree():
    traj = expert_trajectories(1)[0]
    wm, codec = tiny_world_model(), identity_codec()
    with raises(CheckpointError):
        dream(traj.frames[0], traj.task, wm, codec, n=5)
    with raises(CheckpointError):
        dream(np.zeros((32, 32, 3)), traj.task, wm, codec)
