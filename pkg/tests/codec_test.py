import numpy as np
from pytest import approx, raises
from pytest import mark as pytestr
from saydream.codec import (Codec, depth_to_space, frame_pool,
                            round_trip_psnr, space_to_depth, train_codec)
from saydream.errors import ShapeError
from tests.helper import SMALL, expert_trajectories, identity_codec


@pytestr.randomize(seed=int, min_num=0, max_num=2 ** 31, ncalls=3)
def test_space_to_depth_is_invertible(seed):
    x = np.random.default_rng(seed).uniform(size=(2, 3, 8, 6, 3))
    packed = space_to_depth(x, 2)
    assert packed.shape == (2, 3, 4, 3, 12)
    assert np.array_equal(depth_to_space(packed, 2), x)


def test_frame_size_must_divide():
    with raises(ShapeError):
        space_to_depth(np.zeros((7, 8, 3)), 2)


def test_latent_layout():
    frames = expert_trajectories(1)[0].frames
    latents = identity_codec().encode(frames)
    assert latents.shape == (len(frames), 16, SMALL // 2, SMALL // 2)
    with raises(ShapeError):
        identity_codec().decode(np.zeros((3, 8, 8)))


def test_orthogonal_codec_round_trips():
    frames = expert_trajectories(1)[0].frames
    codec = identity_codec()
    assert codec.decode(codec.encode(frames)) == approx(frames, abs=1e-9)
    assert round_trip_psnr(codec, frames) == 99.0
    assert codec.operator_norm() == approx(1.0, rel=1e-6)
    with raises(ValueError):
        Codec(4, orthogonal=True)


def test_save_and_load(tmp_path):
    codec = Codec(2, np.random.default_rng(4))
    path = str(tmp_path / 'codec.ckpt')
    codec.save(path, {'psnr': 12.5})
    back, meta = Codec.load(path)
    assert back.factor == 2 and meta['psnr'] == 12.5
    assert back.checksum() == codec.checksum()
    frames = expert_trajectories(1)[0].frames[:3]
    assert np.array_equal(back.encode(frames), codec.encode(frames))


def test_training_reduces_the_loss():
    frames = frame_pool(expert_trajectories(2))
    codec, history = train_codec(frames, epochs=4, lr=1e-2, batch_size=32,
                                 rng=np.random.default_rng(0))
    assert len(history) == 4
    assert history[-1] < history[0]
    assert round_trip_psnr(codec, frames) > 0.0
