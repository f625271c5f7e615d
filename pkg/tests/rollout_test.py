import numpy as np
from pytest import approx, raises
from saydream.errors import CheckpointError, DatasetError
from saydream.imagination import KeyframeClip
from saydream.policy.net import PolicyNet
from saydream.policy.rollout import (episode_bytes, parse_episode,
                                     read_episode, rollout, rollout_many,
                                     write_episode)
from saydream.sim import Color, TaskSpec, scripted_expert
from tests.helper import (SMALL, expert_trajectories, identity_codec,
                          tiny_config, tiny_world_model)


def _policy():
    return PolicyNet((SMALL, SMALL), n=4, k=2, m=3, width=8, layers=1,
                     heads=2, rng=np.random.default_rng(0))


def _short_task(color=Color.RED):
    return TaskSpec(color, 2, 11, max_steps=5)


def test_expert_controller_succeeds(tmp_path):
    task = TaskSpec(Color.YELLOW, 2, 3)
    record = rollout(task, None, None, None, tiny_config().policy,
                     controller=lambda s: scripted_expert(s, task),
                     height=SMALL, width=SMALL)
    assert record.success and record.trajectory.success()
    assert record.meta['policy'] == 'controller'
    assert record.clip is None
    path = str(tmp_path / 'episode.sdep')
    write_episode(path, record)
    back = read_episode(path)
    assert back.success and back.clip is None
    expected = record.trajectory.quantized()
    assert np.array_equal(back.trajectory.frames, expected.frames)
    assert np.array_equal(back.trajectory.actions, expected.actions)
    assert back.meta['target'] == 'yellow'


def test_policy_needs_an_imagined_clip():
    with raises(CheckpointError):
        rollout(_short_task(), _policy(), None, None, tiny_config().policy)


def test_fixed_clip_rollout():
    frames = expert_trajectories(1)[0].frames[:4]
    clip = KeyframeClip(frames, [0, 1, 2, 3])
    record = rollout(_short_task(), _policy(), None, None,
                     tiny_config().policy, imagined=clip, height=SMALL,
                     width=SMALL)
    assert record.trajectory.length == 5
    assert record.clip is clip
    assert np.all(np.abs(record.trajectory.actions[:, :2]) <= 0.05)
    back = parse_episode(episode_bytes(record))
    assert back.clip.frames == approx(frames, abs=1.0 / 255)
    assert back.clip.latents is None
    assert back.success == record.success


def test_dreamed_rollouts_are_reproducible():
    tasks = [_short_task(Color.BLUE), _short_task(Color.GREEN)]
    wm, codec = tiny_world_model(), identity_codec()
    config = tiny_config().policy
    first = rollout_many(tasks, _policy(), wm, codec, config, seed=4,
                         height=SMALL, width=SMALL)
    second = rollout_many(tasks, _policy(), wm, codec, config, seed=4,
                          height=SMALL, width=SMALL)
    assert len(first) == 2
    for a, b in zip(first, second):
        assert np.array_equal(a.trajectory.actions, b.trajectory.actions)
        assert np.array_equal(a.clip.latents, b.clip.latents)
    record = first[0]
    assert record.meta['dream_target'] == 'blue'
    back = parse_episode(episode_bytes(record))
    assert back.clip.latents == approx(record.clip.latents, rel=1e-5,
                                       abs=1e-5)
    assert back.meta['sampler']['steps'] == 2
    assert [r.meta['dream_seed'] for r in first] == [[4, 0], [4, 1]]
    assert back.meta['dream_seed'] == [4, 0]
    alone = rollout(tasks[1], _policy(), wm, codec, config,
                    np.random.default_rng(first[1].meta['dream_seed']),
                    height=SMALL, width=SMALL)
    assert np.array_equal(alone.trajectory.actions,
                          first[1].trajectory.actions)


def test_wrong_imagination_is_recorded():
    record = rollout(_short_task(Color.RED), _policy(), tiny_world_model(),
                     identity_codec(), tiny_config().policy,
                     dream_task=_short_task(Color.BLUE), height=SMALL,
                     width=SMALL)
    assert record.meta['target'] == 'red'
    assert record.meta['dream_target'] == 'blue'


def test_damaged_records_are_rejected(tmp_path):
    frames = expert_trajectories(1)[0].frames[:4]
    record = rollout(_short_task(), _policy(), None, None,
                     tiny_config().policy,
                     imagined=KeyframeClip(frames, [0, 1, 2, 3]),
                     height=SMALL, width=SMALL)
    data = episode_bytes(record)
    with raises(DatasetError):
        parse_episode(data[:-10])
    with raises(DatasetError):
        parse_episode(b'SDDS' + data[4:])
    with raises(DatasetError):
        read_episode(str(tmp_path / 'missing.sdep'))
