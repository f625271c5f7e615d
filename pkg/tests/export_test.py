import os
import numpy as np
from pytest import raises
from pytest import mark as pytestr
from saydream.errors import DatasetError
from saydream.export import (export_video, gif_bytes, gif_size, lzw_decode,
                             lzw_encode, palette, parse_gif, quantize,
                             read_ppm, write_ppm)
from tests.helper import expert_trajectories


@pytestr.randomize(seed=int, min_num=0, max_num=2 ** 31, ncalls=5)
def test_lzw_decodes_what_it_encodes(seed):
    rng = np.random.default_rng(seed)
    noisy = rng.integers(0, 216, size=20000).astype(np.uint8).tobytes()
    assert lzw_decode(lzw_encode(noisy)) == noisy


@pytestr.parametrize('data', [b'', b'\x07', b'\x00' * 5000,
                              bytes(range(216)) * 40])
def test_lzw_edge_cases(data):
    assert lzw_decode(lzw_encode(data)) == data


def test_palette_covers_the_cube():
    table = palette()
    assert table.shape == (256, 3)
    assert tuple(table[0]) == (0, 0, 0) and tuple(table[215]) == (255,) * 3
    frame = np.array([[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]])
    assert quantize(frame).tolist() == [[180, 5]]


def test_ppm_round_trip(tmp_path):
    frame = expert_trajectories(1)[0].frames[0]
    path = str(tmp_path / 'frame.ppm')
    write_ppm(path, frame)
    assert np.array_equal(read_ppm(path), frame)
    with open(path, 'rb') as fh:
        data = fh.read()
    with open(path, 'wb') as fh:
        fh.write(data[:-3])
    with raises(DatasetError):
        read_ppm(path)


def test_gif_frames(tmp_path):
    frames = expert_trajectories(1)[0].frames[:5]
    width, height, decoded = parse_gif(gif_bytes(frames))
    assert (width, height, len(decoded)) == (16, 16, 5)
    for frame, indices in zip(frames, decoded):
        assert np.array_equal(indices, quantize(frame))
    with raises(ValueError):
        parse_gif(b'PNG' + gif_bytes(frames))


def test_export_video(tmp_path):
    frames = expert_trajectories(1)[0].frames[:6]
    out = str(tmp_path / 'video')
    paths = export_video(frames, out, 'imagined')
    assert len(paths) == 7
    assert sorted(os.listdir(out)) == \
        ['imagined.gif'] + [f'imagined_{i:03d}.ppm' for i in range(6)]
    assert gif_size(paths[-1]) == (16, 16, 6)
    assert len(export_video(frames, out, 'executed', gif=False)) == 6
