"""
Checkpoint blob: a little-endian binary file holding named float64 arrays.

Layout::

    magic    8 bytes  b'SAYDREAM'
    version  u32      (currently 1)
    section  u16 length + UTF-8 tag ("codec", "teacher", "student", ...)
    meta     u32 length + UTF-8 JSON (config echo, input hashes, ...)
    count    u32
    count x  u16 name length, UTF-8 name, u8 rank, rank x u32 extents,
             prod(extents) x float64 values (row-major)
"""
import json
import struct
from typing import Any, BinaryIO, Dict, Optional, Tuple
import numpy as np
from saydream.errors import CheckpointError, DatasetError

MAGIC = b'SAYDREAM'
VERSION = 1


def _write_str(fh: BinaryIO, text: str, fmt: str) -> None:
    raw = text.encode('utf-8')
    fh.write(struct.pack(fmt, len(raw)))
    fh.write(raw)


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    data = fh.read(n)
    if (len(data) != n):
        raise CheckpointError('truncated checkpoint')
    return data


def _read_str(fh: BinaryIO, fmt: str) -> str:
    (length,) = struct.unpack(fmt, _read_exact(fh, struct.calcsize(fmt)))
    return _read_exact(fh, length).decode('utf-8')


def write_checkpoint(path: str, section: str, arrays: Dict[str, np.ndarray],
                     meta: Optional[Dict[str, Any]] = None) -> None:
    """
    Write `arrays` under the given section tag to `path`.

    Raises:
      DatasetError: if the file cannot be written.
    """
    try:
        with open(path, 'wb') as fh:
            fh.write(MAGIC)
            fh.write(struct.pack('<I', VERSION))
            _write_str(fh, section, '<H')
            _write_str(fh, json.dumps(meta or {}, sort_keys=True), '<I')
            fh.write(struct.pack('<I', len(arrays)))
            for name, value in arrays.items():
                value = np.ascontiguousarray(value, dtype='<f8')
                _write_str(fh, name, '<H')
                fh.write(struct.pack('<B', value.ndim))
                fh.write(struct.pack(f'<{value.ndim}I', *value.shape))
                fh.write(value.tobytes())
    except OSError as e:
        raise DatasetError(path, f'cannot write checkpoint: {e}')


def read_checkpoint(path: str, section: Optional[str] = None) -> Tuple[
        str, Dict[str, np.ndarray], Dict[str, Any]]:
    """
    Read a checkpoint blob.

    Args:
      path: The checkpoint file.
      section: If given, the section tag the checkpoint must carry.

    Returns:
      The tuple (section tag, arrays, metadata).

    Raises:
      CheckpointError: on a bad magic/version, truncation, or a section
        mismatch.
      DatasetError: if the file cannot be opened.
    """
    try:
        fh = open(path, 'rb')
    except OSError as e:
        raise DatasetError(path, f'cannot read checkpoint: {e}')
    with fh:
        if (fh.read(len(MAGIC)) != MAGIC):
            raise CheckpointError(f'{path}: not a checkpoint blob')
        (version,) = struct.unpack('<I', _read_exact(fh, 4))
        if (version != VERSION):
            raise CheckpointError(f'{path}: unsupported version {version}')
        tag = _read_str(fh, '<H')
        if (section is not None and tag != section):
            raise CheckpointError(f'{path}: expected section "{section}", '
                                  f'found "{tag}"')
        meta = json.loads(_read_str(fh, '<I'))
        (count,) = struct.unpack('<I', _read_exact(fh, 4))
        arrays: Dict[str, np.ndarray] = {}
        for _ in range(count):
            name = _read_str(fh, '<H')
            (rank,) = struct.unpack('<B', _read_exact(fh, 1))
            shape = struct.unpack(f'<{rank}I', _read_exact(fh, 4 * rank))
            n = int(np.prod(shape)) if rank else 1
            raw = _read_exact(fh, 8 * n)
            arrays[name] = np.frombuffer(raw, dtype='<f8').astype(
                np.float64).reshape(shape)
    return tag, arrays, meta
