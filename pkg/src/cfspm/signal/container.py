"""Bit-exact tensor container and cohort manifest IO.

Container layout (little-endian throughout): magic "CFSP", version u8=1,
dtype u8 (0=f32, 1=f64, 2=i64), ndim u8, one reserved zero byte,
ndim x u64 extents, then the row-major payload.  A cohort on disk is a
manifest.json next to one trials container (n_trials x C x T) and one
labels container (i64, values 1..K) per subject.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .data import Cohort, Subject

MAGIC = b"CFSP"
VERSION = 1

_CODE_TO_DTYPE = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}
_KIND_TO_CODE = {("f", 4): 0, ("f", 8): 1, ("i", 8): 2}


def write_tensor(path: str | Path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr)
    code = _KIND_TO_CODE.get((arr.dtype.kind, arr.dtype.itemsize))
    if code is None:
        raise ValueError(f"unsupported dtype {arr.dtype} (f32/f64/i64 only)")
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise ValueError("refusing to write non-finite values")
    header = MAGIC + bytes([VERSION, code, arr.ndim, 0])
    header += b"".join(struct.pack("<Q", e) for e in arr.shape)
    payload = arr.astype(_CODE_TO_DTYPE[code], copy=False).tobytes()
    Path(path).write_bytes(header + payload)


def read_tensor(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < 8:
        raise ValueError(f"{path}: truncated header")
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:4]!r}")
    version, code, ndim, reserved = blob[4], blob[5], blob[6], blob[7]
    if version != VERSION:
        raise ValueError(f"{path}: version mismatch (got {version}, want {VERSION})")
    if code not in _CODE_TO_DTYPE:
        raise ValueError(f"{path}: unknown dtype code {code}")
    if reserved != 0:
        raise ValueError(f"{path}: reserved byte must be zero")
    offset = 8 + 8 * ndim
    if len(blob) < offset:
        raise ValueError(f"{path}: truncated extent table")
    shape = tuple(struct.unpack_from("<Q", blob, 8 + 8 * i)[0] for i in range(ndim))
    dtype = _CODE_TO_DTYPE[code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize if ndim else dtype.itemsize
    if len(blob) - offset != expected:
        raise ValueError(
            f"{path}: truncated payload ({len(blob) - offset} bytes, want {expected})")
    return np.frombuffer(blob, dtype=dtype, offset=offset).reshape(shape).copy()


def save_cohort(directory: str | Path, cohort: Cohort) -> Path:
    cohort.validate()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in cohort.subjects:
        trials_name = f"{s.subject_id}_trials.cfsp"
        labels_name = f"{s.subject_id}_labels.cfsp"
        write_tensor(directory / trials_name, s.trials.astype(np.float64))
        write_tensor(directory / labels_name, s.labels.astype(np.int64))
        entries.append({"id": s.subject_id, "trials": trials_name,
                        "labels": labels_name})
    manifest = {
        "fs": int(round(cohort.fs)),
        "channels": list(cohort.channels),
        "groups": {k: list(map(int, v)) for k, v in cohort.groups.items()},
        "subjects": entries,
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def load_cohort(directory: str | Path) -> Cohort:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise ValueError(f"no manifest.json under {directory}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    for key in ("fs", "channels", "groups", "subjects"):
        if key not in manifest:
            raise ValueError(f"manifest missing field {key!r}")
    subjects = []
    for entry in manifest["subjects"]:
        trials = read_tensor(directory / entry["trials"])
        labels = read_tensor(directory / entry["labels"])
        if trials.ndim != 3:
            raise ValueError(f"subject {entry['id']}: trials container must be 3-axis")
        if labels.ndim != 1 or labels.dtype.kind != "i":
            raise ValueError(f"subject {entry['id']}: labels container must be 1-axis i64")
        subjects.append(Subject(subject_id=entry["id"],
                                trials=trials.astype(np.float64),
                                labels=labels.astype(np.int64)))
    cohort = Cohort(fs=float(manifest["fs"]), channels=list(manifest["channels"]),
                    groups={k: list(v) for k, v in manifest["groups"].items()},
                    subjects=subjects)
    cohort.validate()
    return cohort
