import struct

import numpy as np
import pytest

from getup.core import ParameterStore, checkpoint
from getup.errors import CheckpointError


def _store():
    s = ParameterStore()
    s.add("a.weight", np.arange(6.0).reshape(2, 3))
    s.add("b", np.array([1.5]))
    s.add("scalar", np.array(2.0))
    return s


def test_layout_is_exact():
    buf = checkpoint.dumps(_store().state())
    assert buf[:8] == b"GETUPCK1"
    assert struct.unpack_from("<I", buf, 8)[0] == 3
    pos = 12
    nlen = struct.unpack_from("<I", buf, pos)[0]
    assert buf[pos + 4:pos + 4 + nlen] == b"a.weight"
    pos += 4 + nlen
    assert struct.unpack_from("<I", buf, pos)[0] == 2
    assert struct.unpack_from("<2Q", buf, pos + 4) == (2, 3)
    data = np.frombuffer(buf, "<f8", count=6, offset=pos + 20)
    assert np.array_equal(data, np.arange(6.0))


def test_roundtrip(tmp_path):
    s = _store()
    path = tmp_path / "ck.bin"
    checkpoint.save(path, s)
    state = checkpoint.load(path)
    assert list(state) == s.names()
    for k, v in s.state().items():
        assert state[k].shape == v.shape
        assert np.array_equal(state[k], v)
    assert checkpoint.dumps(state) == path.read_bytes()


def test_corruption_detected(tmp_path):
    buf = checkpoint.dumps(_store().state())
    with pytest.raises(CheckpointError):
        checkpoint.loads(b"NOTACKPT" + buf[8:])
    with pytest.raises(CheckpointError):
        checkpoint.loads(buf[:-3])
    with pytest.raises(CheckpointError):
        checkpoint.loads(buf + b"\0")
    with pytest.raises(CheckpointError):
        checkpoint.load(tmp_path / "missing.bin")
