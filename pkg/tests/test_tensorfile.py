import numpy as np
import pytest

from wseg import TensorFormatError, read_tensor, write_tensor


def test_roundtrip_ranks(tmp_path):
    for shape in ((7,), (3, 5), (2, 3, 4)):
        arr = np.arange(np.prod(shape), dtype=np.float32).reshape(shape)
        path = tmp_path / f"r{len(shape)}.wst"
        write_tensor(path, arr)
        np.testing.assert_array_equal(read_tensor(path), arr)


def test_rank_zero_scalar(tmp_path):
    path = tmp_path / "scalar.wst"
    write_tensor(path, np.float32(2.5))
    out = read_tensor(path)
    assert out.shape == () and out == np.float32(2.5)


def test_write_is_deterministic(tmp_path):
    arr = np.linspace(0.0, 1.0, 12).reshape(3, 4)
    write_tensor(tmp_path / "a.wst", arr)
    write_tensor(tmp_path / "b.wst", arr)
    assert (tmp_path / "a.wst").read_bytes() == (tmp_path / "b.wst").read_bytes()


def test_header_layout(tmp_path):
    path = tmp_path / "t.wst"
    write_tensor(path, np.zeros((2, 3), dtype=np.float32))
    blob = path.read_bytes()
    assert blob[:4] == b"WST1"
    assert np.frombuffer(blob, "<u4", count=3, offset=4).tolist() == [2, 2, 3]
    assert len(blob) == 4 + 4 + 8 + 4 * 6


def test_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bad.wst"
    write_tensor(path, np.zeros(3))
    blob = bytearray(path.read_bytes())
    blob[:4] = b"NOPE"
    path.write_bytes(bytes(blob))
    with pytest.raises(TensorFormatError, match="magic"):
        read_tensor(path)


def test_rejects_truncation_and_trailing(tmp_path):
    path = tmp_path / "t.wst"
    write_tensor(path, np.zeros((4, 4)))
    blob = path.read_bytes()
    for cut in (2, 6, 10, len(blob) - 1):
        path.write_bytes(blob[:cut])
        with pytest.raises(TensorFormatError):
            read_tensor(path)
    path.write_bytes(blob + b"\x00")
    with pytest.raises(TensorFormatError):
        read_tensor(path)


def test_rejects_absurd_rank(tmp_path):
    path = tmp_path / "t.wst"
    path.write_bytes(b"WST1" + np.uint32(4096).astype("<u4").tobytes())
    with pytest.raises(TensorFormatError, match="rank"):
        read_tensor(path)
