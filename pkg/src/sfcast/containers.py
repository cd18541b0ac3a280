"""Binary on-disk containers for matrices and models.

Three formats, all little-endian:

* SFPM — profile matrix: dims, row-major f64 data, bit-packed mask, index.
* SFSM — sparse metadata matrix: CSC index arrays + values, vocab, ids.
* SFMD — model: spec as JSON, then named f64 arrays.

Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np
import scipy.sparse as sp

from .errors import ContainerFormatError
from .metadata import MetadataMatrix
from .model import ModelParams, ModelSpec
from .profile_matrix import ProfileMatrix, SeriesYearIndex

VERSION = 1


def atomic_write(path, payload: bytes) -> None:
    """Write via a temp file in the same directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".sfcast-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ContainerFormatError("truncated container")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")

    def f64s(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * n), dtype="<f8").copy()

    def i64s(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * n), dtype="<i8").copy()


def _check_magic(r: _Reader, magic: bytes) -> None:
    got = r.take(4)
    if got != magic:
        raise ContainerFormatError(f"bad magic {got!r}, expected {magic!r}")
    version = r.u32()
    if version != VERSION:
        raise ContainerFormatError(f"unsupported version {version}")


# ---------------------------------------------------------------- SFPM

def save_profile_matrix(path, pm: ProfileMatrix) -> None:
    T, N = pm.shape
    parts = [b"SFPM", struct.pack("<III", VERSION, T, N)]
    parts.append(pm.data.astype("<f8").tobytes())
    parts.append(np.packbits(pm.mask.ravel()).tobytes())
    parts.append(struct.pack("<I", len(pm.index.entries)))
    for sid, u, col in pm.index.entries:
        parts.append(_pack_str(sid) + struct.pack("<II", u, col))
    parts.append(struct.pack("<I", len(pm.offsets)))
    for sid, off in pm.offsets.items():
        parts.append(_pack_str(sid) + struct.pack("<I", off))
    atomic_write(path, b"".join(parts))


def load_profile_matrix(path) -> ProfileMatrix:
    r = _Reader(open(path, "rb").read())
    _check_magic(r, b"SFPM")
    T, N = struct.unpack("<II", r.take(8))
    data = r.f64s(T * N).reshape(T, N)
    nbits = T * N
    mask_bytes = np.frombuffer(r.take((nbits + 7) // 8), dtype=np.uint8)
    mask = np.unpackbits(mask_bytes)[:nbits].reshape(T, N).astype(bool)
    entries = []
    for _ in range(r.u32()):
        sid = r.string()
        u, col = struct.unpack("<II", r.take(8))
        entries.append((sid, u, col))
    offsets = {}
    for _ in range(r.u32()):
        sid = r.string()
        offsets[sid] = struct.unpack("<I", r.take(4))[0]
    return ProfileMatrix(data, mask, T, SeriesYearIndex(tuple(entries)), offsets)


# ---------------------------------------------------------------- SFSM

def save_metadata_matrix(path, meta: MetadataMatrix) -> None:
    M = meta.matrix.tocsc()
    M.sort_indices()
    m, n = M.shape
    parts = [b"SFSM", struct.pack("<III", VERSION, m, n)]
    parts.append(struct.pack("<Q", M.nnz))
    parts.append(M.indptr.astype("<i8").tobytes())
    parts.append(M.indices.astype("<i8").tobytes())
    parts.append(M.data.astype("<f8").tobytes())
    parts.append(struct.pack("<I", len(meta.vocab)))
    for term in meta.vocab:
        parts.append(_pack_str(term))
    parts.append(struct.pack("<I", len(meta.ids)))
    for sid in meta.ids:
        parts.append(_pack_str(sid))
    atomic_write(path, b"".join(parts))


def load_metadata_matrix(path) -> MetadataMatrix:
    r = _Reader(open(path, "rb").read())
    _check_magic(r, b"SFSM")
    m, n = struct.unpack("<II", r.take(8))
    nnz = r.u64()
    indptr = r.i64s(n + 1)
    indices = r.i64s(nnz)
    data = r.f64s(nnz)
    vocab = tuple(r.string() for _ in range(r.u32()))
    ids = tuple(r.string() for _ in range(r.u32()))
    matrix = sp.csc_matrix((data, indices, indptr), shape=(m, n))
    return MetadataMatrix(matrix, vocab, ids)


# ---------------------------------------------------------------- SFMD

def save_model(path, params: ModelParams) -> None:
    spec_doc = {
        "spec": vars(params.spec),
        "dims": list(params.dims),
        "knots_vector": None
        if params.basis is None
        else params.basis.knots.tolist(),
    }
    parts = [b"SFMD", struct.pack("<I", VERSION)]
    parts.append(_pack_str(json.dumps(spec_doc, sort_keys=True)))
    parts.append(struct.pack("<I", len(params.arrays)))
    for name in sorted(params.arrays):
        arr = np.ascontiguousarray(params.arrays[name], dtype="<f8")
        parts.append(_pack_str(name))
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}q", *arr.shape))
        parts.append(arr.tobytes())
    atomic_write(path, b"".join(parts))


def load_model(path) -> ModelParams:
    from .basis import bspline_basis

    r = _Reader(open(path, "rb").read())
    _check_magic(r, b"SFMD")
    doc = json.loads(r.string())
    spec = ModelSpec(**doc["spec"])
    dims = tuple(doc["dims"])
    arrays = {}
    for _ in range(r.u32()):
        name = r.string()
        ndim = r.u32()
        shape = struct.unpack(f"<{ndim}q", r.take(8 * ndim))
        arrays[name] = r.f64s(int(np.prod(shape))).reshape(shape)
    basis = None
    if spec.regression_variant == "functional":
        basis = bspline_basis(dims[0], spec.knots)
    return ModelParams(spec, dims, arrays, basis)
