"""Content-addressed, append-only artifact store.

Each artifact lives under ``root/<key>/`` with a payload file and a sha256
checksum recorded in ``root/index.json``.  JSON payloads encode floats with
their shortest round-trip representation and complex numbers as tagged ``[re, im]``
pairs; trajectories go to chunked ``.npy`` files plus a JSON index.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
import tempfile
import threading
from pathlib import Path

import numpy as np

FORMATS = ("json", "npy-chunks")


class IntegrityError(RuntimeError):
    """Checksum mismatch, or a key rebound to a different payload."""


def _encode(obj):
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"__complex__": [_encode(float(obj.real)), _encode(float(obj.imag))]}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return {"__float__": "nan"}
        if math.isinf(x):
            return {"__float__": "inf" if x > 0 else "-inf"}
        return x
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if set(obj) == {"__complex__"}:
            re, im = obj["__complex__"]
            return complex(_decode(re), _decode(im))
        if set(obj) == {"__float__"}:
            return float(obj["__float__"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def dumps(payload) -> str:
    """Deterministic JSON text: sorted keys, repr floats (exact round trip), no NaN literals."""
    return json.dumps(_encode(payload), sort_keys=True, indent=1, allow_nan=False) + "\n"


def loads(text: str):
    return _decode(json.loads(text))


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class ArtifactStore:
    """Append-only store; a single lock serializes writers, reads need no lock."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self.index_path = self.root / "index.json"
        self.index = loads(self.index_path.read_text()) if self.index_path.exists() else {}

    def __contains__(self, key: str) -> bool:
        return key in self.index

    def keys(self) -> list:
        return sorted(self.index)

    def _flush(self) -> None:
        _atomic_write(self.index_path, dumps(self.index).encode())

    def put(self, key: str, payload, fmt: str = "json") -> str:
        if fmt not in FORMATS:
            raise ValueError(f"unregistered format {fmt!r}")
        if fmt == "json":
            files = {"payload.json": dumps(payload).encode()}
        else:
            files = _chunk_files(payload)
        sums = {name: _sha(data) for name, data in files.items()}
        with self._lock:
            if key in self.index:
                if self.index[key]["checksums"] != sums:
                    raise IntegrityError(f"key {key} already bound to a different payload")
                return key
            for name, data in files.items():
                _atomic_write(self.root / key / name, data)
            self.index[key] = {"format": fmt, "path": key, "checksums": sums}
            self._flush()
        return key

    def get(self, key: str):
        if key not in self.index:
            raise KeyError(key)
        entry = self.index[key]
        blobs = {}
        for name, digest in entry["checksums"].items():
            path = self.root / entry["path"] / name
            if not path.exists():
                raise IntegrityError(f"artifact file {path} missing")
            data = path.read_bytes()
            if _sha(data) != digest:
                raise IntegrityError(f"checksum mismatch for {path}")
            blobs[name] = data
        if entry["format"] == "json":
            return loads(blobs["payload.json"].decode())
        return _read_chunks(blobs)

    def raw_bytes(self, key: str) -> dict:
        entry = self.index[key]
        return {name: (self.root / entry["path"] / name).read_bytes() for name in entry["checksums"]}


def _npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(arr), allow_pickle=False)
    return buf.getvalue()


def _chunk_files(payload: dict, chunk: int = 64) -> dict:
    """``payload`` = {"times": 1-d array, "u": 2-d array, "v": 2-d array, "meta": dict}."""
    times = np.asarray(payload["times"], dtype=float)
    u = np.asarray(payload["u"])
    v = np.asarray(payload["v"])
    if u.shape != v.shape or u.shape[0] != times.size:
        raise ValueError("trajectory arrays have inconsistent shapes")
    files = {"times.npy": _npy_bytes(times)}
    names = []
    for c, start in enumerate(range(0, times.size, chunk)):
        name = f"chunk{c:05d}.npy"
        files[name] = _npy_bytes(np.stack([u[start:start + chunk], v[start:start + chunk]]))
        names.append(name)
    files["index.json"] = dumps({"chunks": names, "chunk": chunk, "shape": list(u.shape),
                                 "meta": payload.get("meta", {})}).encode()
    return files


def _read_chunks(blobs: dict) -> dict:
    idx = loads(blobs["index.json"].decode())
    times = np.load(io.BytesIO(blobs["times.npy"]), allow_pickle=False)
    parts = [np.load(io.BytesIO(blobs[name]), allow_pickle=False) for name in idx["chunks"]]
    stacked = np.concatenate(parts, axis=1) if parts else np.zeros((2, 0) + tuple(idx["shape"][1:]))
    return {"times": times, "u": stacked[0], "v": stacked[1], "meta": idx["meta"]}
