"""Image and audio files, lattice coordinates, PSNR and a mean-pool/bilinear Laplacian pyramid."""

from __future__ import annotations

import os
import tempfile
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .objectives import SampledSignal

PSNR_CAP_DB = 200.0


class FormatError(ValueError):
    """Malformed or unsupported file contents."""


@dataclass
class ImageGrid:
    """Pixel values in [0, 1], shape (H, W, c) with c in {1, 3}."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.ndim != 3 or v.shape[2] not in (1, 3):
            raise ValueError("image must be (H, W) or (H, W, c) with c in {1, 3}")
        if not np.all(np.isfinite(v)):
            raise ValueError("image values must be finite")
        self.values = np.clip(v, 0.0, 1.0)

    @property
    def shape(self):
        return self.values.shape[:2]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass
class AudioClip:
    rate: int
    samples: np.ndarray

    def __post_init__(self):
        if int(self.rate) <= 0:
            raise ValueError("sample rate must be positive")
        self.rate = int(self.rate)
        self.samples = np.clip(np.asarray(self.samples, dtype=float).reshape(-1), -1.0, 1.0)


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    """Write via a temporary file in the same directory, then rename over the target."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- PGM / PPM ----------------------------------------------------------------


def _header_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read ``count`` whitespace-separated integers after the magic, honoring comments."""
    pos = 2
    tokens: list[int] = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b"#"):
            if data[pos:pos + 1] == b"#":
                while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise FormatError(f"malformed header: expected an integer at byte offset {start}")
        tokens.append(int(data[start:pos]))
    if pos >= n or not data[pos:pos + 1].isspace():
        raise FormatError(f"malformed header: expected whitespace at byte offset {pos}")
    return tokens, pos + 1


def decode_pnm(data: bytes) -> ImageGrid:
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"unsupported magic {magic!r} at byte offset 0 (expected P5 or P6)")
    (w, h, maxval), start = _header_tokens(data, 3)
    if w < 1 or h < 1:
        raise FormatError("image dimensions must be positive")
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}; only 255 is handled")
    c = 1 if magic == b"P5" else 3
    need = w * h * c
    if len(data) - start < need:
        raise FormatError(
            f"truncated payload: expected {need} bytes from offset {start}, "
            f"data ends at byte offset {len(data)}"
        )
    pix = np.frombuffer(data, dtype=np.uint8, count=need, offset=start)
    return ImageGrid(pix.reshape(h, w, c).astype(float) / 255.0)


def encode_pnm(img: ImageGrid) -> bytes:
    v = img.values
    h, w, c = v.shape
    magic = b"P5" if c == 1 else b"P6"
    q = np.rint(v * 255.0).astype(np.uint8)
    return magic + f"\n{w} {h}\n255\n".encode() + q.tobytes()


def load_pgm_ppm(path) -> ImageGrid:
    with open(path, "rb") as fh:
        return decode_pnm(fh.read())


def save_pgm_ppm(img: ImageGrid, path) -> None:
    atomic_write_bytes(path, encode_pnm(img))


# --- WAV -------------------------------------------------------------------------


def load_wav(path) -> AudioClip:
    try:
        with wave.open(str(path), "rb") as w:
            if w.getnchannels() != 1:
                raise FormatError(f"unsupported format: {w.getnchannels()} channels (mono only)")
            if w.getsampwidth() != 2:
                raise FormatError(f"unsupported format: {8 * w.getsampwidth()}-bit samples (PCM16 only)")
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except wave.Error as exc:
        raise FormatError(f"unsupported or malformed WAV: {exc}") from exc
    pcm = np.frombuffer(raw, dtype="<i2")
    return AudioClip(rate, pcm.astype(float) / 32768.0)


def encode_wav(clip: AudioClip) -> bytes:
    import io

    pcm = np.clip(np.rint(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(clip.rate)
        w.writeframes(pcm.tobytes())
    return buf.getvalue()


def save_wav(clip: AudioClip, path) -> None:
    atomic_write_bytes(path, encode_wav(clip))


# --- coordinates ---------------------------------------------------------------------


def lattice_coords(shape: tuple[int, ...]) -> np.ndarray:
    """Pixel-center coordinates (2 i + 1)/n - 1 per axis, row-major, axis order as ``shape``."""
    axes = [(2.0 * np.arange(n) + 1.0) / n - 1.0 for n in shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def coords_to_indices(coords: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Inverse of :func:`lattice_coords`: nearest integer pixel index per axis."""
    n = np.asarray(shape, dtype=float)
    return np.rint(((np.asarray(coords) + 1.0) * n - 1.0) / 2.0).astype(np.int64)


def to_samples(item) -> SampledSignal:
    """Lattice samples of an image (coords are (row, col)) or audio clip."""
    if isinstance(item, ImageGrid):
        h, w, c = item.values.shape
        return SampledSignal(lattice_coords((h, w)), item.values.reshape(h * w, c), (h, w))
    if isinstance(item, AudioClip):
        n = item.samples.shape[0]
        return SampledSignal(lattice_coords((n,)), item.samples[:, None], (n,))
    arr = np.asarray(item, dtype=float)
    if arr.ndim == 1:
        return SampledSignal(lattice_coords(arr.shape), arr[:, None], arr.shape)
    if arr.ndim == 2:
        return SampledSignal(lattice_coords(arr.shape), arr.reshape(-1, 1), arr.shape)
    raise TypeError("expected an ImageGrid, AudioClip, or 1D/2D array")


def psnr(a, b) -> float:
    """10 log10(1 / MSE) for signals on a unit peak scale, capped at 200 dB."""
    va = a.values if isinstance(a, ImageGrid) else np.asarray(a, dtype=float)
    vb = b.values if isinstance(b, ImageGrid) else np.asarray(b, dtype=float)
    if va.shape != vb.shape:
        raise ValueError(f"shape mismatch: {va.shape} vs {vb.shape}")
    mse = float(np.mean((va - vb) ** 2))
    if mse <= 10.0 ** (-PSNR_CAP_DB / 10.0):
        return PSNR_CAP_DB
    return float(10.0 * np.log10(1.0 / mse))


# --- Laplacian pyramid -------------------------------------------------------------


def downsample2(img: np.ndarray) -> np.ndarray:
    """2x2 mean pooling over the first two axes."""
    h, w = img.shape[:2]
    return img.reshape(h // 2, 2, w // 2, 2, *img.shape[2:]).mean(axis=(1, 3))


def _upsample_axis(a: np.ndarray, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, 0)
    prev = np.concatenate([a[:1], a[:-1]], axis=0)
    nxt = np.concatenate([a[1:], a[-1:]], axis=0)
    out = np.empty((2 * a.shape[0],) + a.shape[1:])
    out[0::2] = 0.75 * a + 0.25 * prev
    out[1::2] = 0.75 * a + 0.25 * nxt
    return np.moveaxis(out, 0, axis)


def upsample2(img: np.ndarray) -> np.ndarray:
    """Bilinear 2x upsampling with pixel-center alignment and clamped edges."""
    return _upsample_axis(_upsample_axis(np.asarray(img, dtype=float), 0), 1)


def pyramid_decompose(img, J: int) -> list[np.ndarray]:
    """Levels ordered fine to coarse: J-1 residual bands followed by the coarse image."""
    v = img.values if isinstance(img, ImageGrid) else np.asarray(img, dtype=float)
    if J < 1:
        raise ValueError("pyramid needs J >= 1")
    h, w = v.shape[:2]
    f = 2 ** (J - 1)
    if h % f or w % f:
        raise ValueError(f"image {h}x{w} is not divisible by 2^(J-1) = {f}")
    bands = []
    cur = v
    for _ in range(J - 1):
        low = downsample2(cur)
        bands.append(cur - upsample2(low))
        cur = low
    return bands + [cur]


def pyramid_reconstruct(levels: list[np.ndarray]) -> np.ndarray:
    cur = levels[-1]
    for band in reversed(levels[:-1]):
        cur = upsample2(cur) + band
    return cur
