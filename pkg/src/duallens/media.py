"""Image handling: loading, canonical PNG encoding, deterministic resize, crop.

Resampling is implemented here with numpy rather than delegated to an image
library so that the resize is bit-reproducible across library versions: the
acceptance suite pins exact output dimensions and idempotence.
"""

from __future__ import annotations

import base64
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .core.types import BBox


class EmptyRegion(ValueError):
    """Raised when a crop box does not intersect the image."""


@dataclass(frozen=True, eq=False)
class ImageBuf:
    """An RGB image held as a read-only uint8 array plus its content hash.

    The hash is the sha256 of the canonical PNG re-encoding, so two buffers
    with identical pixels always share a hash regardless of where the bytes
    came from.
    """

    pixels: np.ndarray
    content_hash: str = field(default="")

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def size(self) -> tuple[int, int]:
        """(width, height), matching the usual image convention."""
        return (self.width, self.height)

    @property
    def hash16(self) -> str:
        return self.content_hash[:16]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImageBuf):
            return NotImplemented
        return self.content_hash == other.content_hash

    def __hash__(self) -> int:
        return hash(self.content_hash)


def make_image(pixels: np.ndarray) -> ImageBuf:
    """Build an ImageBuf from an array, normalizing dtype/shape and hashing it."""
    arr = np.asarray(pixels)
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected HxWx3 RGB array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    arr = arr.astype(np.uint8, copy=True)
    arr.setflags(write=False)
    digest = hashlib.sha256(_canonical_png_bytes(arr)).hexdigest()
    return ImageBuf(pixels=arr, content_hash=digest)


def _canonical_png_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def load_image(source: str | Path | bytes) -> ImageBuf:
    """Load from a file path or raw encoded bytes; always converts to RGB."""
    if isinstance(source, bytes):
        pil = Image.open(io.BytesIO(source))
    else:
        pil = Image.open(source)
    return make_image(np.asarray(pil.convert("RGB")))


def encode_png(img: ImageBuf) -> bytes:
    return _canonical_png_bytes(np.asarray(img.pixels))


def save_png(img: ImageBuf, path: str | Path) -> None:
    Path(path).write_bytes(encode_png(img))


def to_base64_png(img: ImageBuf) -> str:
    return base64.b64encode(encode_png(img)).decode("ascii")


def _round_half_up(value: float) -> int:
    return int(np.floor(value + 0.5))


def _axis_weights(out_size: int, in_size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Sample at output pixel centers mapped back into the source grid.
    scale = in_size / out_size
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, in_size - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, in_size - 1)
    frac = src - lo
    return lo, hi, frac


def resize_shortest_edge(img: ImageBuf, target: int) -> ImageBuf:
    """Downscale so the shortest edge equals `target`; never upscales.

    Images whose shortest edge is already <= target are returned unchanged.
    The long edge is scaled by the same factor and rounded half-up, so the
    aspect ratio drifts by less than one pixel.
    """
    if target < 1:
        raise ValueError("target edge must be >= 1")
    w, h = img.width, img.height
    shortest = min(w, h)
    if shortest <= target:
        return img
    scale = target / shortest
    if w <= h:
        new_w, new_h = target, _round_half_up(h * scale)
    else:
        new_w, new_h = _round_half_up(w * scale), target
    return make_image(_bilinear(np.asarray(img.pixels, dtype=np.float64), new_h, new_w))


def _bilinear(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    y_lo, y_hi, fy = _axis_weights(out_h, src.shape[0])
    x_lo, x_hi, fx = _axis_weights(out_w, src.shape[1])
    top = src[y_lo][:, x_lo] * (1 - fx)[None, :, None] + src[y_lo][:, x_hi] * fx[None, :, None]
    bot = src[y_hi][:, x_lo] * (1 - fx)[None, :, None] + src[y_hi][:, x_hi] * fx[None, :, None]
    blended = top * (1 - fy)[:, None, None] + bot * fy[:, None, None]
    return np.clip(np.floor(blended + 0.5), 0, 255).astype(np.uint8)


def crop(img: ImageBuf, box: BBox) -> ImageBuf:
    """Crop a detection box, clamping it to the image bounds.

    Raises EmptyRegion when the clamped box has no area.
    """
    x0 = max(0, box.x)
    y0 = max(0, box.y)
    x1 = min(img.width, box.x + box.w)
    y1 = min(img.height, box.y + box.h)
    if x1 <= x0 or y1 <= y0:
        raise EmptyRegion(
            f"box ({box.x},{box.y},{box.w},{box.h}) does not intersect "
            f"a {img.width}x{img.height} image")
    return make_image(np.asarray(img.pixels)[y0:y1, x0:x1])


__all__ = [
    "EmptyRegion",
    "ImageBuf",
    "crop",
    "encode_png",
    "load_image",
    "make_image",
    "resize_shortest_edge",
    "save_png",
    "to_base64_png",
]
