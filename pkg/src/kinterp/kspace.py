"""Complex 2D+t volumes, centered orthonormal FFTs, and .kvol binary I/O.

Volumes carry a domain tag ("image" or "kspace") that only the transforms
flip, plus a ``scale`` field recording the divisor that maps the current data
back to its source frame.  Spatial extents must be powers of two: the 2D
transform is a radix-2 Cooley-Tukey FFT applied per frame with the DC
component at (X//2, Y//2) and orthonormal scaling, so Parseval holds exactly
up to roundoff.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateInputError,
    DimensionError,
    DomainError,
    FormatError,
    UnsupportedSizeError,
)

DOMAIN_IMAGE = "image"
DOMAIN_KSPACE = "kspace"

_KVOL_MAGIC = b"KVOL"
_KVOL_VERSION = 1
_HEADER = struct.Struct("<4sIIIIBd")


@dataclass
class ComplexVolume:
    """A complex X x Y x T volume stored as separate float64 re/im arrays."""

    re: np.ndarray
    im: np.ndarray
    domain: str
    scale: float = 1.0

    def __post_init__(self):
        self.re = np.ascontiguousarray(np.asarray(self.re, dtype=np.float64))
        self.im = np.ascontiguousarray(np.asarray(self.im, dtype=np.float64))
        if self.re.ndim != 3 or self.im.shape != self.re.shape:
            raise DimensionError("volume needs matching 3D re/im arrays")
        if self.domain not in (DOMAIN_IMAGE, DOMAIN_KSPACE):
            raise DomainError(f"unknown volume domain {self.domain!r}")
        if not (np.all(np.isfinite(self.re)) and np.all(np.isfinite(self.im))):
            raise DegenerateInputError("volume contains non-finite values")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise DegenerateInputError(f"volume scale must be positive, got {self.scale}")

    @property
    def x_dim(self) -> int:
        return self.re.shape[0]

    @property
    def y_dim(self) -> int:
        return self.re.shape[1]

    @property
    def t_dim(self) -> int:
        return self.re.shape[2]

    def as_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    def copy(self) -> "ComplexVolume":
        return ComplexVolume(self.re.copy(), self.im.copy(), self.domain, self.scale)


def magnitude(v: ComplexVolume) -> np.ndarray:
    return np.hypot(v.re, v.im)


def _require_power_of_two(n: int, label: str) -> None:
    if n < 1 or (n & (n - 1)) != 0:
        raise UnsupportedSizeError(f"{label} extent {n} is not a power of two")


def _bit_reversal(n: int) -> np.ndarray:
    levels = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for _ in range(levels):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def _fft_along(data: np.ndarray, axis: int, inverse: bool) -> np.ndarray:
    """Radix-2 Cooley-Tukey transform along one axis (standard DFT convention)."""
    n = data.shape[axis]
    _require_power_of_two(n, "fft")
    y = np.moveaxis(data, axis, 0)
    lead = y.shape[0]
    rest = y.shape[1:]
    y = y.reshape(lead, -1)[_bit_reversal(n)]
    sign = 1.0 if inverse else -1.0
    size = 2
    while size <= n:
        half = size // 2
        w = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        y = y.reshape(n // size, size, -1)
        even = y[:, :half]
        odd = y[:, half:] * w[None, :, None]
        y = np.concatenate([even + odd, even - odd], axis=1).reshape(n, -1)
        size *= 2
    if inverse:
        y = y / n
    return np.moveaxis(y.reshape((lead,) + rest), 0, axis)


def _shift(data: np.ndarray, axis: int, forward: bool) -> np.ndarray:
    n = data.shape[axis]
    return np.roll(data, n // 2 if forward else -(n // 2), axis=axis)


def fft2(v: ComplexVolume) -> ComplexVolume:
    """Centered orthonormal 2D FFT applied independently per frame."""
    if v.domain != DOMAIN_IMAGE:
        raise DomainError("fft2 expects an image-domain volume")
    _require_power_of_two(v.x_dim, "fft x")
    _require_power_of_two(v.y_dim, "fft y")
    work = v.as_complex()
    for axis in (0, 1):
        work = _shift(work, axis, forward=False)
        work = _fft_along(work, axis, inverse=False)
        work = _shift(work, axis, forward=True)
    work /= np.sqrt(v.x_dim * v.y_dim)
    return ComplexVolume(work.real, work.imag, DOMAIN_KSPACE, v.scale)


def ifft2(v: ComplexVolume) -> ComplexVolume:
    """Inverse of :func:`fft2`."""
    if v.domain != DOMAIN_KSPACE:
        raise DomainError("ifft2 expects a k-space volume")
    _require_power_of_two(v.x_dim, "fft x")
    _require_power_of_two(v.y_dim, "fft y")
    work = v.as_complex()
    for axis in (0, 1):
        work = _shift(work, axis, forward=False)
        work = _fft_along(work, axis, inverse=True)
        work = _shift(work, axis, forward=True)
    work *= np.sqrt(v.x_dim * v.y_dim)
    return ComplexVolume(work.real, work.imag, DOMAIN_IMAGE, v.scale)


def normalize(v: ComplexVolume) -> ComplexVolume:
    """Divide by the max complex magnitude; the divisor composes into ``scale``."""
    peak = float(np.max(magnitude(v)))
    if peak == 0.0:
        raise DegenerateInputError("cannot normalize an all-zero volume")
    return ComplexVolume(v.re / peak, v.im / peak, v.domain, v.scale * peak)


def denormalize(v: ComplexVolume) -> ComplexVolume:
    """Multiply the data by ``scale`` and reset the tag to 1."""
    return ComplexVolume(v.re * v.scale, v.im * v.scale, v.domain, 1.0)


def write_volume(v: ComplexVolume, path: str | Path) -> None:
    """Serialize to .kvol: header + interleaved (re, im) float32, kx fastest.

    The payload is always 32-bit, so values that are not float32-representable
    are quantized on write.
    """
    path = Path(path)
    domain_code = 0 if v.domain == DOMAIN_IMAGE else 1
    header = _HEADER.pack(
        _KVOL_MAGIC, _KVOL_VERSION, v.x_dim, v.y_dim, v.t_dim, domain_code, v.scale
    )
    interleaved = np.empty((v.t_dim, v.y_dim, v.x_dim, 2), dtype="<f4")
    interleaved[..., 0] = v.re.transpose(2, 1, 0)
    interleaved[..., 1] = v.im.transpose(2, 1, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(interleaved.tobytes())


def read_volume(path: str | Path) -> ComplexVolume:
    """Parse a .kvol file; malformed content raises :class:`FormatError`."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, x, y, t, domain_code, scale = _HEADER.unpack_from(blob)
    if magic != _KVOL_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != _KVOL_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if min(x, y, t) < 1:
        raise FormatError(f"{path}: non-positive extent in header")
    if domain_code not in (0, 1):
        raise FormatError(f"{path}: bad domain tag {domain_code}")
    if not (np.isfinite(scale) and scale > 0):
        raise FormatError(f"{path}: bad scale {scale}")
    expected = x * y * t * 2 * 4
    payload = blob[_HEADER.size :]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    flat = np.frombuffer(payload, dtype="<f4").reshape(t, y, x, 2)
    re = flat[..., 0].transpose(2, 1, 0).astype(np.float64)
    im = flat[..., 1].transpose(2, 1, 0).astype(np.float64)
    domain = DOMAIN_IMAGE if domain_code == 0 else DOMAIN_KSPACE
    return ComplexVolume(re, im, domain, float(scale))
