"""Domain types plus manifest, embedding and image file I/O."""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import EmbeddingFormatError, ImageFormatError, ManifestError, ValidationError

ORIGINS = ("real", "pbda", "iida")

EMBEDDING_MAGIC = b"EMB1"
_EMB_HEADER = struct.Struct("<4sII")


class ImageBuffer:
    """Read-only H x W x 3 float64 raster with intensities in [0, 1].

    The backing array is C-ordered (row-major, channel-interleaved) and
    marked non-writeable, so instances can be shared across threads.
    """

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValidationError(f"image must be H x W x 3, got shape {arr.shape}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ImageFormatError("image has a zero dimension")
        if not np.isfinite(arr).all():
            raise ValidationError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError("image intensities must lie in [0, 1]")
        arr.flags.writeable = False
        self._data = arr

    @classmethod
    def from_uint8(cls, pixels) -> "ImageBuffer":
        pixels = np.asarray(pixels, dtype=np.uint8)
        return cls(pixels.astype(np.float64) / 255.0)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def height(self) -> int:
        return self._data.shape[0]

    @property
    def width(self) -> int:
        return self._data.shape[1]

    @property
    def channels(self) -> int:
        return 3

    def to_uint8(self) -> np.ndarray:
        """Quantize with round-half-up, clamped to [0, 255]."""
        q = np.floor(self._data * 255.0 + 0.5)
        return np.clip(q, 0, 255).astype(np.uint8)

    def __eq__(self, other):
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return np.array_equal(self._data, other._data)

    def __repr__(self):
        return f"ImageBuffer(width={self.width}, height={self.height})"


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box; (x, y) is the top-left pixel."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            if not isinstance(getattr(self, name), (int, np.integer)):
                raise ValidationError(f"bbox {name} must be an integer")
        if self.w < 1 or self.h < 1:
            raise ValidationError(f"bbox must have positive size, got {self.w}x{self.h}")

    @classmethod
    def from_list(cls, values) -> "BBox":
        if not isinstance(values, (list, tuple)) or len(values) != 4:
            raise ValidationError(f"bbox must be [x, y, w, h], got {values!r}")
        if any(isinstance(v, bool) for v in values):
            raise ValidationError(f"bbox must be [x, y, w, h] integers, got {values!r}")
        return cls(*values)

    def to_list(self) -> list:
        return [int(self.x), int(self.y), int(self.w), int(self.h)]

    @property
    def x1(self) -> int:
        return self.x + self.w

    @property
    def y1(self) -> int:
        return self.y + self.h

    def inside(self, width: int, height: int, margin: int = 0) -> bool:
        return (
            self.x >= margin
            and self.y >= margin
            and self.x1 <= width - margin
            and self.y1 <= height - margin
        )

    def check_attached(self, width: int, height: int, what: str = "bbox") -> None:
        """Require the box and its one-pixel exterior ring inside the image."""
        if not self.inside(width, height):
            raise ValidationError(
                f"{what} {self.to_list()} out of bounds for {width}x{height} image"
            )
        if not self.inside(width, height, margin=1):
            raise ValidationError(
                f"{what} {self.to_list()}: exterior ring outside {width}x{height} image"
            )


@dataclass(frozen=True)
class Sample:
    id: str
    path: str
    label: str
    patient_id: str
    split: str = ""
    bbox: Optional[BBox] = None
    embedding_index: Optional[int] = None
    origin: str = "real"

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "path": self.path,
            "label": self.label,
            "patient_id": self.patient_id,
            "split": self.split,
        }
        if self.bbox is not None:
            rec["bbox"] = self.bbox.to_list()
        if self.embedding_index is not None:
            rec["embedding_index"] = int(self.embedding_index)
        rec["origin"] = self.origin
        return rec


@dataclass(frozen=True)
class Manifest:
    samples: tuple = ()
    class_names: tuple = field(default=None)

    def __post_init__(self):
        samples = tuple(self.samples)
        object.__setattr__(self, "samples", samples)
        seen = set()
        for s in samples:
            if s.id in seen:
                raise ManifestError(f"duplicate id {s.id!r}")
            seen.add(s.id)
        if self.class_names is None:
            object.__setattr__(self, "class_names", tuple(sorted({s.label for s in samples})))
        else:
            object.__setattr__(self, "class_names", tuple(self.class_names))

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def by_label(self) -> dict:
        out = {}
        for s in self.samples:
            out.setdefault(s.label, []).append(s)
        return out

    def by_patient(self) -> dict:
        out = {}
        for s in self.samples:
            out.setdefault(s.patient_id, []).append(s)
        return out

    def counts(self) -> dict:
        out = dict.fromkeys(self.class_names, 0)
        for s in self.samples:
            out[s.label] = out.get(s.label, 0) + 1
        return out

    def filter(self, pred) -> "Manifest":
        return Manifest(tuple(s for s in self.samples if pred(s)))

    def check_embeddings(self, table: "EmbeddingTable") -> None:
        for s in self.samples:
            if s.embedding_index is not None and not 0 <= s.embedding_index < table.count:
                raise ValidationError(
                    f"sample {s.id!r}: embedding_index {s.embedding_index} "
                    f"outside table of {table.count} rows"
                )


_REQUIRED = ("id", "path", "label", "patient_id")
_KNOWN = set(_REQUIRED) | {"split", "bbox", "embedding_index", "origin"}


def sample_from_record(rec: dict, line: Optional[int] = None) -> Sample:
    if not isinstance(rec, dict):
        raise ManifestError("record must be a JSON object", line)
    for key in _REQUIRED:
        if not isinstance(rec.get(key), str):
            raise ManifestError(f"field {key!r} missing or not a string", line)
    unknown = set(rec) - _KNOWN
    if unknown:
        raise ManifestError(f"unknown fields {sorted(unknown)}", line)
    split = rec.get("split", "")
    if not isinstance(split, str):
        raise ManifestError("field 'split' must be a string", line)
    origin = rec.get("origin", "real")
    if origin not in ORIGINS:
        raise ManifestError(f"unknown origin {origin!r}", line)

    bbox = None
    if rec.get("bbox") is not None:
        raw = rec["bbox"]
        if (
            not isinstance(raw, list)
            or len(raw) != 4
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in raw)
        ):
            raise ManifestError(f"bbox must be [x, y, w, h] integers, got {raw!r}", line)
        x, y, w, h = raw
        if w < 3 or h < 3:
            raise ManifestError(f"bbox {raw} smaller than 3x3", line)
        if x < 1 or y < 1:
            raise ManifestError(f"bbox {raw} leaves no exterior ring", line)
        bbox = BBox(x, y, w, h)

    emb = rec.get("embedding_index")
    if emb is not None and (not isinstance(emb, int) or isinstance(emb, bool) or emb < 0):
        raise ManifestError(f"embedding_index must be a non-negative integer, got {emb!r}", line)

    return Sample(
        id=rec["id"],
        path=rec["path"],
        label=rec["label"],
        patient_id=rec["patient_id"],
        split=split,
        bbox=bbox,
        embedding_index=emb,
        origin=origin,
    )


def load_manifest(path) -> Manifest:
    samples = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON: {exc.msg}", lineno) from None
            sample = sample_from_record(rec, lineno)
            if sample.id in seen:
                raise ManifestError(f"duplicate id {sample.id!r}", lineno)
            seen.add(sample.id)
            samples.append(sample)
    return Manifest(tuple(samples))


def dumps_manifest(manifest: Manifest | Iterable[Sample]) -> str:
    return "".join(json.dumps(s.to_record()) + "\n" for s in manifest)


def save_manifest(manifest: Manifest | Iterable[Sample], path) -> None:
    Path(path).write_text(dumps_manifest(manifest), encoding="utf-8")


class EmbeddingTable:
    """count x dim matrix of float32 feature vectors (read-only)."""

    __slots__ = ("_rows",)

    def __init__(self, rows):
        arr = np.array(rows, dtype=np.float32, order="C", copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"embedding table must be a non-empty 2-D matrix, got {arr.shape}")
        if not np.isfinite(arr).all():
            bad = int(np.argwhere(~np.isfinite(arr))[0][0])
            raise EmbeddingFormatError(f"non-finite value in embedding row {bad}")
        arr.flags.writeable = False
        self._rows = arr

    @property
    def rows(self) -> np.ndarray:
        return self._rows

    @property
    def count(self) -> int:
        return self._rows.shape[0]

    @property
    def dim(self) -> int:
        return self._rows.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self._rows[i]

    def __len__(self):
        return self.count


def encode_embeddings(table: EmbeddingTable) -> bytes:
    header = _EMB_HEADER.pack(EMBEDDING_MAGIC, table.dim, table.count)
    return header + table.rows.astype("<f4", copy=False).tobytes(order="C")


def decode_embeddings(blob: bytes) -> EmbeddingTable:
    if len(blob) < _EMB_HEADER.size:
        raise EmbeddingFormatError(
            f"truncated header: expected {_EMB_HEADER.size} bytes, got {len(blob)}"
        )
    magic, dim, count = _EMB_HEADER.unpack_from(blob)
    if magic != EMBEDDING_MAGIC:
        raise EmbeddingFormatError(f"bad magic {magic!r}, expected {EMBEDDING_MAGIC!r}")
    if dim == 0 or count == 0:
        raise EmbeddingFormatError(f"header declares empty table (dim={dim}, count={count})")
    expected = dim * count * 4
    actual = len(blob) - _EMB_HEADER.size
    if actual < expected:
        raise EmbeddingFormatError(
            f"truncated payload: expected {expected} bytes, got {actual}"
        )
    if actual > expected:
        raise EmbeddingFormatError(
            f"trailing data: expected {expected} payload bytes, got {actual}"
        )
    rows = np.frombuffer(blob, dtype="<f4", count=dim * count, offset=_EMB_HEADER.size)
    return EmbeddingTable(rows.reshape(count, dim))


def load_embeddings(path) -> EmbeddingTable:
    return decode_embeddings(Path(path).read_bytes())


def save_embeddings(table: EmbeddingTable, path) -> None:
    Path(path).write_bytes(encode_embeddings(table))


_DECODABLE = ("PNG", "JPEG")


def decode_image(blob: bytes) -> ImageBuffer:
    try:
        with Image.open(io.BytesIO(blob)) as img:
            if img.format not in _DECODABLE:
                raise ImageFormatError(f"unsupported image format {img.format!r}")
            if img.width == 0 or img.height == 0:
                raise ImageFormatError("image has a zero dimension")
            rgb = img.convert("RGB")
            pixels = np.asarray(rgb, dtype=np.uint8)
    except ImageFormatError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ImageFormatError(f"cannot decode image: {exc}") from None
    return ImageBuffer.from_uint8(pixels)


def encode_png(image: ImageBuffer) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image.to_uint8(), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def read_image(path) -> ImageBuffer:
    try:
        return decode_image(Path(path).read_bytes())
    except ImageFormatError as exc:
        raise ImageFormatError(f"{path}: {exc}") from None


def write_image(image: ImageBuffer, path) -> None:
    path = Path(path)
    if path.suffix.lower() != ".png":
        raise ImageFormatError(f"only PNG encoding is supported, got {path.suffix!r}")
    path.write_bytes(encode_png(image))


def image_io(arg, path=None):
    """Decode when given a path, encode to ``path`` when given an ImageBuffer."""
    if isinstance(arg, ImageBuffer):
        if path is None:
            return encode_png(arg)
        write_image(arg, path)
        return Path(path)
    return read_image(arg)


def quantize(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(np.asarray(values) * 255.0 + 0.5), 0, 255).astype(np.uint8)
