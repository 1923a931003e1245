"""Raster images: loading, saving, cropping and overlay rendering.

A raster is a (height, width, channels) float32 array with every value in
[0, 1].  Only 8-bit PNG, binary PGM (P5) and binary PPM (P6) files are
supported; the format is chosen by file extension.  Rasters are immutable
after construction so they can be shared freely between threads.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "Raster",
    "PixelPoint",
    "load_raster",
    "save_raster",
    "crop",
    "render_overlay",
]

SUPPORTED_EXTENSIONS = {".png", ".pgm", ".ppm"}


@dataclass(frozen=True)
class PixelPoint:
    """Integer pixel coordinate, x = column, y = row."""

    x: int
    y: int


@dataclass(frozen=True)
class Raster:
    """Immutable image with normalized pixel values.

    ``pixels`` has shape (height, width, channels) and dtype float32 with
    all values in [0, 1].  Channels is 1 (panchromatic) or 3 (RGB).
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.ndim == 2:
            px = px[:, :, np.newaxis]
        px = np.ascontiguousarray(px, dtype=np.float32)
        if px.ndim != 3:
            raise ValueError(f"raster pixels must be 2- or 3-dimensional, got shape {px.shape}")
        h, w, c = px.shape
        if h < 1 or w < 1:
            raise ValueError(f"raster dimensions must be positive, got {w}x{h}")
        if c not in (1, 3):
            raise ValueError(f"raster must have 1 or 3 channels, got {c}")
        if not np.all(np.isfinite(px)):
            raise ValueError("raster contains non-finite pixel values")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("raster pixel values must lie in [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


def load_raster(path) -> Raster:
    """Load an 8-bit image file, mapping sample value v to v/255."""
    path = Path(path)
    ext = path.suffix.lower()
    if ext not in SUPPORTED_EXTENSIONS:
        raise ValueError(f"unsupported image format {ext!r} (expected one of {sorted(SUPPORTED_EXTENSIONS)})")
    data = path.read_bytes()
    if ext in (".pgm", ".ppm"):
        arr = _decode_pnm(data)
    else:
        arr = _decode_png(data)
    return Raster(arr.astype(np.float32) / 255.0)


def save_raster(r: Raster, path) -> None:
    """Write ``r`` as an 8-bit file; round trip error is at most 1/255 per pixel."""
    path = Path(path)
    ext = path.suffix.lower()
    if ext not in SUPPORTED_EXTENSIONS:
        raise ValueError(f"unsupported image format {ext!r} (expected one of {sorted(SUPPORTED_EXTENSIONS)})")
    samples = np.rint(r.pixels * 255.0).astype(np.uint8)
    if ext == ".pgm":
        if r.channels != 1:
            raise ValueError("PGM files hold a single channel")
        payload = b"P5\n%d %d\n255\n" % (r.width, r.height) + samples.tobytes()
    elif ext == ".ppm":
        if r.channels != 3:
            raise ValueError("PPM files hold three channels")
        payload = b"P6\n%d %d\n255\n" % (r.width, r.height) + samples.tobytes()
    else:
        img = Image.fromarray(samples[:, :, 0] if r.channels == 1 else samples,
                              mode="L" if r.channels == 1 else "RGB")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        payload = buf.getvalue()
    path.write_bytes(payload)


def crop(r: Raster, top_left: PixelPoint, w: int, h: int) -> Raster:
    """Extract the w x h sub-raster whose top-left pixel is ``top_left``.

    The rectangle must lie fully inside ``r``; no padding is ever synthesized.
    """
    x, y = top_left.x, top_left.y
    if w < 1 or h < 1:
        raise ValueError(f"crop size must be positive, got {w}x{h}")
    if x < 0 or y < 0 or x + w > r.width or y + h > r.height:
        raise ValueError(
            f"crop rectangle ({x},{y})+{w}x{h} exceeds raster bounds {r.width}x{r.height}")
    return Raster(r.pixels[y:y + h, x:x + w, :].copy())


def render_overlay(scene: Raster, overlay, style: str = None, *,
                   marker_radius: int = 5, strength: float = 0.6) -> Raster:
    """Render a confidence heatmap or detected peaks over ``scene``.

    ``overlay`` is a ConfidenceMap (heatmap style: confidence blended into
    the red channel) or a PeakList (peak style: a ring marker of radius
    ``marker_radius`` around each peak).  Output is always 3-channel.
    """
    if scene.channels == 1:
        base = np.repeat(scene.pixels, 3, axis=2).astype(np.float32)
    else:
        base = scene.pixels.copy()

    kind = style or _overlay_kind(overlay)
    if kind == "heatmap":
        cm = overlay
        if (cm.scene_width, cm.scene_height) != (scene.width, scene.height):
            raise ValueError(
                f"confidence map was computed for a {cm.scene_width}x{cm.scene_height} scene, "
                f"not {scene.width}x{scene.height}")
        conf = _upsample_map(cm, scene.width, scene.height)
        # lerp the red channel toward 1 by strength * confidence
        base[:, :, 0] += (1.0 - base[:, :, 0]) * (strength * conf)
    elif kind == "peaks":
        pl = overlay
        if (pl.scene_width, pl.scene_height) != (scene.width, scene.height):
            raise ValueError(
                f"peak list belongs to a {pl.scene_width}x{pl.scene_height} scene, "
                f"not {scene.width}x{scene.height}")
        for px, py, _c in pl.peaks:
            _draw_ring(base, px, py, marker_radius)
    else:
        raise ValueError(f"unknown overlay style {kind!r}")
    return Raster(np.clip(base, 0.0, 1.0))


# --- helpers ---------------------------------------------------------------


def _overlay_kind(overlay) -> str:
    if hasattr(overlay, "values"):
        return "heatmap"
    if hasattr(overlay, "peaks"):
        return "peaks"
    raise ValueError(f"cannot infer overlay style from {type(overlay).__name__}")


def _upsample_map(cm, width: int, height: int) -> np.ndarray:
    """Nearest-cell expansion of a confidence map onto scene pixels."""
    half = cm.window_side // 2
    xs = np.clip(np.rint((np.arange(width) - half) / cm.stride).astype(int), 0, cm.cols - 1)
    ys = np.clip(np.rint((np.arange(height) - half) / cm.stride).astype(int), 0, cm.rows - 1)
    return cm.values[np.ix_(ys, xs)].astype(np.float32)


def _draw_ring(base: np.ndarray, cx: int, cy: int, radius: int) -> None:
    h, w, _ = base.shape
    y0, y1 = max(0, cy - radius), min(h, cy + radius + 1)
    x0, x1 = max(0, cx - radius), min(w, cx + radius + 1)
    yy, xx = np.mgrid[y0:y1, x0:x1]
    d = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
    ring = np.abs(d - radius) <= 0.75
    region = base[y0:y1, x0:x1, :]
    region[ring] = (1.0, 0.1, 0.1)


def _decode_pnm(data: bytes) -> np.ndarray:
    """Parse binary PGM (P5) / PPM (P6) with an 8-bit maxval."""
    tokens, pos = [], 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise ValueError("truncated PNM header")
        ch = data[pos:pos + 1]
        if ch == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end:end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    pos += 1  # single whitespace byte after maxval
    magic, sw, sh, smax = tokens
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported PNM magic {magic!r}")
    width, height, maxval = int(sw), int(sh), int(smax)
    if width < 1 or height < 1:
        raise ValueError(f"PNM image has zero dimension ({width}x{height})")
    if maxval != 255:
        raise ValueError(f"only 8-bit PNM supported, maxval was {maxval}")
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    body = data[pos:pos + need]
    if len(body) < need:
        raise ValueError(f"PNM pixel data truncated ({len(body)} of {need} bytes)")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, channels)


def _decode_png(data: bytes) -> np.ndarray:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise ValueError(f"unreadable PNG file: {exc}") from exc
    if img.width < 1 or img.height < 1:
        raise ValueError(f"PNG image has zero dimension ({img.width}x{img.height})")
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB" if ("A" in img.mode or img.mode in ("P", "CMYK")) else "L")
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
    arr = np.asarray(img, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    return arr
