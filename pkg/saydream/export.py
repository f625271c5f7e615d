"""
Video export: numbered binary portable pixmaps (P6) and an animated GIF89a
with a fixed 6x6x6 color cube palette and LZW-compressed frames.
"""
import os
import struct
from typing import List, Sequence, Tuple
import numpy as np
from saydream.errors import DatasetError

LEVELS = 6
MAX_CODES = 4096


def _bytes(frame: np.ndarray) -> np.ndarray:
    return np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_ppm(path: str, frame: np.ndarray) -> None:
    """
    Raises:
      DatasetError: if `path` cannot be written.
    """
    height, width = frame.shape[:2]
    try:
        with open(path, 'wb') as fh:
            fh.write(f'P6\n{width} {height}\n255\n'.encode('ascii'))
            fh.write(_bytes(frame).tobytes())
    except OSError as e:
        raise DatasetError(path, e.strerror or str(e))


def read_ppm(path: str) -> np.ndarray:
    try:
        with open(path, 'rb') as fh:
            data = fh.read()
    except OSError as e:
        raise DatasetError(path, e.strerror or str(e))
    fields: List[bytes] = []
    pos = 0
    while (len(fields) < 4):
        while (pos < len(data) and data[pos:pos + 1].isspace()):
            pos += 1
        if (data[pos:pos + 1] == b'#'):
            pos = data.index(b'\n', pos)
            continue
        end = pos
        while (end < len(data) and not data[end:end + 1].isspace()):
            end += 1
        if (end == pos):
            raise DatasetError(path, 'truncated pixmap header')
        fields.append(data[pos:end])
        pos = end
    if (fields[0] != b'P6' or fields[3] != b'255'):
        raise DatasetError(path, 'not an 8-bit P6 pixmap')
    width, height = int(fields[1]), int(fields[2])
    raw = data[pos + 1:pos + 1 + width * height * 3]
    if (len(raw) != width * height * 3):
        raise DatasetError(path, 'truncated pixmap')
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3) / 255.0


def palette() -> np.ndarray:
    """The 256 x 3 color table: a 6-level color cube, then black."""
    levels = np.round(np.linspace(0, 255, LEVELS)).astype(np.uint8)
    cube = np.array([(r, g, b) for r in levels for g in levels
                     for b in levels], dtype=np.uint8)
    out = np.zeros((256, 3), dtype=np.uint8)
    out[:len(cube)] = cube
    return out


def quantize(frame: np.ndarray) -> np.ndarray:
    """Color-cube index of every pixel."""
    q = np.round(np.clip(frame, 0.0, 1.0) * (LEVELS - 1)).astype(np.int64)
    return (q[..., 0] * LEVELS * LEVELS + q[..., 1] * LEVELS +
            q[..., 2]).astype(np.uint8)


class _BitWriter:
    def __init__(self):
        self.out = bytearray()
        self.acc = 0
        self.bits = 0

    def write(self, code: int, width: int) -> None:
        self.acc |= code << self.bits
        self.bits += width
        while (self.bits >= 8):
            self.out.append(self.acc & 0xFF)
            self.acc >>= 8
            self.bits -= 8

    def flush(self) -> bytes:
        if (self.bits > 0):
            self.out.append(self.acc & 0xFF)
        return bytes(self.out)


def lzw_encode(indices: bytes, min_size: int = 8) -> bytes:
    """Variable-width (up to 12 bit) LZW as used by GIF image data."""
    clear, eoi = 1 << min_size, (1 << min_size) + 1
    writer = _BitWriter()

    def reset():
        return {bytes([i]): i for i in range(clear)}, eoi + 1, min_size + 1

    table, next_code, width = reset()
    writer.write(clear, width)
    w = b''
    for k in indices:
        wk = w + bytes([k])
        if (wk in table):
            w = wk
            continue
        writer.write(table[w], width)
        table[wk] = next_code
        next_code += 1
        if (next_code == MAX_CODES):
            writer.write(clear, width)
            table, next_code, width = reset()
        elif (next_code > (1 << width)):
            width += 1
        w = bytes([k])
    if (w):
        writer.write(table[w], width)
        if (next_code + 1 > (1 << width) and width < 12):
            width += 1
    writer.write(eoi, width)
    return writer.flush()


def lzw_decode(data: bytes, min_size: int = 8) -> bytes:
    clear, eoi = 1 << min_size, (1 << min_size) + 1
    table: List[bytes] = []
    width = min_size + 1
    prev = None
    out = bytearray()
    acc = bits = pos = 0
    while (True):
        while (bits < width):
            if (pos >= len(data)):
                return bytes(out)
            acc |= data[pos] << bits
            bits += 8
            pos += 1
        code = acc & ((1 << width) - 1)
        acc >>= width
        bits -= width
        if (code == clear):
            table = [bytes([i]) for i in range(clear)] + [b'', b'']
            width, prev = min_size + 1, None
            continue
        if (code == eoi):
            return bytes(out)
        if (code < len(table)):
            entry = table[code]
        elif (prev is not None and code == len(table)):
            entry = prev + prev[:1]
        else:
            raise ValueError(f'invalid LZW code {code}')
        out.extend(entry)
        if (prev is not None and len(table) < MAX_CODES):
            table.append(prev + entry[:1])
            if (len(table) == (1 << width) and width < 12):
                width += 1
        prev = entry


def _sub_blocks(data: bytes) -> bytes:
    out = bytearray()
    for i in range(0, len(data), 255):
        chunk = data[i:i + 255]
        out.append(len(chunk))
        out.extend(chunk)
    out.append(0)
    return bytes(out)


def gif_bytes(frames: Sequence[np.ndarray], delay_cs: int = 20) -> bytes:
    height, width = frames[0].shape[:2]
    out = bytearray(b'GIF89a')
    out += struct.pack('<HHBBB', width, height, 0xF7, 0, 0)
    out += palette().tobytes()
    out += b'\x21\xff\x0bNETSCAPE2.0\x03\x01' + struct.pack('<H', 0) + b'\x00'
    for frame in frames:
        out += b'\x21\xf9\x04\x00' + struct.pack('<H', delay_cs) + b'\x00\x00'
        out += b'\x2c' + struct.pack('<HHHHB', 0, 0, width, height, 0)
        out += b'\x08' + _sub_blocks(lzw_encode(quantize(frame).tobytes()))
    out += b'\x3b'
    return bytes(out)


def write_gif(path: str, frames: Sequence[np.ndarray],
              delay_cs: int = 20) -> None:
    """
    Raises:
      DatasetError: if `path` cannot be written.
    """
    try:
        with open(path, 'wb') as fh:
            fh.write(gif_bytes(frames, delay_cs))
    except OSError as e:
        raise DatasetError(path, e.strerror or str(e))


def _skip_sub_blocks(data: bytes, pos: int) -> Tuple[bytes, int]:
    out = bytearray()
    while (data[pos] != 0):
        out.extend(data[pos + 1:pos + 1 + data[pos]])
        pos += 1 + data[pos]
    return bytes(out), pos + 1


def parse_gif(data: bytes) -> Tuple[int, int, List[np.ndarray]]:
    """
    Returns:
      (width, height, frames) where every frame holds the [H, W] color
      indices of one image.
    """
    if (data[:6] not in (b'GIF89a', b'GIF87a')):
        raise ValueError('not a GIF file')
    width, height, packed = struct.unpack('<HHB', data[6:11])
    pos = 13
    if (packed & 0x80):
        pos += 3 * (2 << (packed & 0x07))
    frames = []
    while (pos < len(data)):
        tag = data[pos]
        if (tag == 0x3B):
            break
        elif (tag == 0x21):
            _, pos = _skip_sub_blocks(data, pos + 2)
        elif (tag == 0x2C):
            w, h, flags = struct.unpack('<4xHHB', data[pos + 1:pos + 10])
            pos += 10
            if (flags & 0x80):
                pos += 3 * (2 << (flags & 0x07))
            min_size = data[pos]
            raw, pos = _skip_sub_blocks(data, pos + 1)
            pixels = lzw_decode(raw, min_size)
            frames.append(np.frombuffer(pixels[:w * h],
                                        dtype=np.uint8).reshape(h, w))
        else:
            raise ValueError(f'unexpected GIF block 0x{tag:02x}')
    return width, height, frames


def gif_size(path: str) -> Tuple[int, int, int]:
    """(width, height, frame count) of a GIF file."""
    try:
        with open(path, 'rb') as fh:
            data = fh.read()
    except OSError as e:
        raise DatasetError(path, e.strerror or str(e))
    width, height, frames = parse_gif(data)
    return width, height, len(frames)


def export_video(frames: Sequence[np.ndarray], out_dir: str,
                 stem: str = 'frame', gif: bool = True) -> List[str]:
    """
    Write one numbered pixmap per frame, and an animated GIF when `gif`.

    Returns:
      The written paths, pixmaps first.

    Raises:
      DatasetError: if the output directory cannot be written.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise DatasetError(out_dir, e.strerror or str(e))
    paths = []
    for i, frame in enumerate(frames):
        path = os.path.join(out_dir, f'{stem}_{i:03d}.ppm')
        write_ppm(path, frame)
        paths.append(path)
    if (gif):
        path = os.path.join(out_dir, f'{stem}.gif')
        write_gif(path, frames)
        paths.append(path)
    return paths
