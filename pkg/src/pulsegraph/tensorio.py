"""The ``.rptf`` tensor file format plus dataset and checkpoint layouts.

``.rptf`` layout (all little-endian)::

    b"RPTF" | u32 version=1 | u8 dtype (0=f32, 1=f64) | u8 ndim | ndim x u64 dims | payload

Dataset layout::

    <root>/manifest.csv              id,fps,hr_bpm,seed
    <root>/clips/<id>/video.rptf     [T, H, W, 3]
    <root>/clips/<id>/bvp.rptf       [T]
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signal import BvpSeries

MAGIC = b"RPTF"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}
MANIFEST_FIELDS = ("id", "fps", "hr_bpm", "seed")


class TensorFormatError(ValueError):
    """Malformed ``.rptf`` data; ``code`` names the failing check."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def encode_tensor(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype not in _CODES:
        raise TypeError(f"only float32/float64 tensors are serialisable, got {arr.dtype}")
    if arr.ndim > 255:
        raise TensorFormatError("bad_dims", "too many dimensions")
    code = _CODES[arr.dtype]
    header = MAGIC + struct.pack("<IBB", VERSION, code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()


def decode_tensor(buf: bytes) -> np.ndarray:
    if len(buf) < 10 or buf[:4] != MAGIC:
        raise TensorFormatError("bad_magic", "bad magic")
    version, code, ndim = struct.unpack_from("<IBB", buf, 4)
    if version != VERSION:
        raise TensorFormatError("bad_version", f"unsupported version {version}")
    if code not in _DTYPES:
        raise TensorFormatError("bad_dtype", f"unknown dtype code {code}")
    off = 10
    if len(buf) < off + 8 * ndim:
        raise TensorFormatError("bad_dims", "header short")
    shape = struct.unpack_from(f"<{ndim}Q", buf, off)
    off += 8 * ndim
    dtype = _DTYPES[code]
    nbytes = int(np.prod(shape, dtype=np.uint64)) * dtype.itemsize
    if len(buf) - off < nbytes:
        raise TensorFormatError("payload_short", "payload short")
    if len(buf) - off > nbytes:
        raise TensorFormatError("payload_long", "trailing bytes after payload")
    return np.frombuffer(buf, dtype=dtype, count=nbytes // dtype.itemsize, offset=off).reshape(shape).copy()


def write_tensor(path, arr: np.ndarray) -> None:
    Path(path).write_bytes(encode_tensor(arr))


def read_tensor(path) -> np.ndarray:
    path = Path(path)
    try:
        return decode_tensor(path.read_bytes())
    except TensorFormatError as exc:
        raise TensorFormatError(exc.code, f"{path}: {exc}") from None


def _write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def write_dataset_clip(root, clip_id: str, frames: np.ndarray, bvp: BvpSeries) -> None:
    d = Path(root) / "clips" / clip_id
    try:
        d.mkdir(parents=True, exist_ok=True)
        write_tensor(d / "video.rptf", np.asarray(frames, dtype=np.float32))
        write_tensor(d / "bvp.rptf", np.asarray(bvp.samples, dtype=np.float64))
    except OSError as exc:
        raise OSError(f"cannot write clip {clip_id} under {d}: {exc}") from exc


def write_manifest(root, rows) -> None:
    formatted = [{"id": r["id"], "fps": repr(float(r["fps"])),
                  "hr_bpm": repr(float(r["hr_bpm"])), "seed": int(r["seed"])} for r in rows]
    _write_csv(Path(root) / "manifest.csv", MANIFEST_FIELDS, formatted)


@dataclass
class ClipRecord:
    clip_id: str
    frames: np.ndarray     # [T, H, W, 3]
    bvp: BvpSeries
    hr_bpm: float | None   # manifest value; absent for real ingested data


def read_manifest(root) -> list[dict]:
    path = Path(root) / "manifest.csv"
    if not path.exists():
        raise FileNotFoundError(f"dataset manifest missing: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"id", "fps"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: header must contain id,fps")
        return list(reader)


def load_dataset(root) -> list[ClipRecord]:
    root = Path(root)
    records = []
    for row in read_manifest(root):
        cid = row["id"]
        d = root / "clips" / cid
        try:
            frames = read_tensor(d / "video.rptf")
            bvp = read_tensor(d / "bvp.rptf")
        except (OSError, TensorFormatError) as exc:
            raise ValueError(f"clip {cid}: {exc}") from exc
        if frames.ndim != 4 or frames.shape[-1] != 3:
            raise ValueError(f"clip {cid}: video must be [T,H,W,3], got {frames.shape}")
        if bvp.shape != (frames.shape[0],):
            raise ValueError(f"clip {cid}: bvp length {bvp.shape} does not match T={frames.shape[0]}")
        hr = row.get("hr_bpm")
        records.append(ClipRecord(cid, frames, BvpSeries(bvp, float(row["fps"])),
                                  float(hr) if hr not in (None, "") else None))
    return records


def save_params(ckpt_dir, params: dict[str, np.ndarray]) -> None:
    """Checkpoint = one ``.rptf`` per tensor plus ``manifest.csv`` (name, shape, file)."""
    d = Path(ckpt_dir)
    d.mkdir(parents=True, exist_ok=True)
    rows = []
    for name in sorted(params):
        fname = name.replace("/", "__") + ".rptf"
        write_tensor(d / fname, params[name])
        rows.append({"name": name, "shape": "x".join(str(s) for s in params[name].shape), "file": fname})
    _write_csv(d / "manifest.csv", ("name", "shape", "file"), rows)


def load_params(ckpt_dir) -> dict[str, np.ndarray]:
    d = Path(ckpt_dir)
    with open(d / "manifest.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    params = {}
    for row in rows:
        arr = read_tensor(d / row["file"])
        shape = tuple(int(s) for s in row["shape"].split("x")) if row["shape"] else ()
        if arr.shape != shape:
            raise ValueError(f"checkpoint tensor {row['name']}: shape {arr.shape} != manifest {shape}")
        params[row["name"]] = arr
    return params
