"""Synthetic dynamic 2D+t phantoms: beating soft-edged ellipses with phase.

Frames are rendered at 4x supersampling and box-averaged down, which
anti-aliases the ellipse boundaries; a small smooth edge profile keeps the
spectrum strongly low-frequency dominated.  All motion terms scale with the
motion amplitude, so amplitude 0 yields a bitwise-static sequence, and the
temporal phase uses ``t mod period`` so sequences repeat exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SpecError
from .kspace import ComplexVolume, DOMAIN_IMAGE, fft2, magnitude, write_volume

SUPERSAMPLE = 4
_FOV_MARGIN = 0.05
# Magnitude bound of the random low-order polynomial phase coefficients; kept
# mild so the complex images stay close to Hermitian-symmetric in k-space.
PHASE_COEFF_RANGE = 0.8


@dataclass(frozen=True)
class PhantomSpec:
    """Parameters of one synthetic sequence; geometry is drawn from ``seed``."""

    x_dim: int
    y_dim: int
    t_dim: int
    seed: int
    n_ellipses: int = 4
    intensities: tuple[complex, ...] | None = None
    motion_amplitude: float = 0.08
    period: int | None = None
    edge_softness: float = 1.5

    def resolved_period(self) -> int:
        return self.t_dim if self.period is None else self.period


def _validate(spec: PhantomSpec) -> None:
    if min(spec.x_dim, spec.y_dim) < 8 or spec.t_dim < 2:
        raise SpecError("phantom needs X, Y >= 8 and T >= 2")
    if not 2 <= spec.n_ellipses <= 6:
        raise SpecError(f"n_ellipses must lie in [2, 6], got {spec.n_ellipses}")
    if not 0.0 <= spec.motion_amplitude <= 0.5:
        raise SpecError(f"motion amplitude {spec.motion_amplitude} outside [0, 0.5]")
    if spec.resolved_period() < 1:
        raise SpecError("cardiac period must be at least one frame")
    if spec.edge_softness < 0:
        raise SpecError("edge softness cannot be negative")
    if spec.intensities is not None:
        if len(spec.intensities) != spec.n_ellipses:
            raise SpecError("one intensity per ellipse is required")
        if sum(abs(a) for a in spec.intensities) > 1.0 + 1e-12:
            raise SpecError("sum of |intensity| must not exceed 1")


def _draw_geometry(spec: PhantomSpec, rng: np.random.Generator) -> list[dict]:
    """Draw per-ellipse geometry and motion; reject specs that cannot stay in view."""
    a_m = spec.motion_amplitude
    ellipses = []
    for i in range(spec.n_ellipses):
        if i == 0:  # large, nearly static outer body
            rx, ry = rng.uniform(0.26, 0.36, size=2)
            move_scale = 0.15
            pulse = rng.uniform(-0.4, 0.4)
        elif i == 1:  # inner ventricle-like ellipse: strong contraction
            rx, ry = rng.uniform(0.09, 0.15, size=2)
            move_scale = float(rng.uniform(0.4, 0.8))
            pulse = float(rng.uniform(-3.5, -2.0))
        else:
            rx, ry = rng.uniform(0.05, 0.12, size=2)
            move_scale = float(rng.uniform(0.3, 1.0))
            pulse = float(rng.uniform(-0.8, 0.8))
        theta = float(rng.uniform(0.0, math.pi))
        direction = rng.uniform(0.0, 2 * math.pi)
        phase_c = float(rng.uniform(0.0, 2 * math.pi))
        phase_r = float(rng.uniform(0.0, 2 * math.pi))
        reach = max(rx, ry) * (1.0 + abs(pulse) * a_m) + a_m * move_scale
        lo, hi = _FOV_MARGIN + reach, 1.0 - _FOV_MARGIN - reach
        if lo > hi:
            raise SpecError(
                f"ellipse {i} cannot fit in the field of view with motion "
                f"amplitude {a_m}"
            )
        cx, cy = rng.uniform(lo, hi, size=2)
        ellipses.append(
            {
                "cx": float(cx),
                "cy": float(cy),
                "rx": float(rx),
                "ry": float(ry),
                "theta": theta,
                "dir": (math.cos(direction), math.sin(direction)),
                "move": move_scale,
                "pulse": pulse,
                "phase_c": phase_c,
                "phase_r": phase_r,
            }
        )
    return ellipses


def _frame_params(spec: PhantomSpec, ellipses: list[dict], t: int) -> list[dict]:
    period = spec.resolved_period()
    tau = 2 * math.pi * (t % period) / period
    a_m = spec.motion_amplitude
    frames = []
    for e in ellipses:
        wobble = a_m * e["move"] * math.sin(tau + e["phase_c"])
        squeeze = 1.0 + a_m * e["pulse"] * math.sin(tau + e["phase_r"])
        frames.append(
            {
                "cx": e["cx"] + wobble * e["dir"][0],
                "cy": e["cy"] + wobble * e["dir"][1],
                "rx": e["rx"] * squeeze,
                "ry": e["ry"] * squeeze,
                "theta": e["theta"],
            }
        )
    return frames


def _check_in_view(params: list[dict], t: int) -> None:
    for i, p in enumerate(params):
        reach = max(p["rx"], p["ry"])
        if reach <= 0:
            raise SpecError(f"ellipse {i} collapsed at frame {t}")
        for c in (p["cx"], p["cy"]):
            if c - reach < 0.0 or c + reach > 1.0:
                raise SpecError(f"ellipse {i} leaves the field of view at frame {t}")


def generate(spec: PhantomSpec) -> ComplexVolume:
    """Render the sequence as an image-domain complex volume (max |.| <= 1)."""
    _validate(spec)
    rng = np.random.default_rng(spec.seed)
    ellipses = _draw_geometry(spec, rng)
    if spec.intensities is not None:
        amps = np.array(spec.intensities, dtype=np.complex128)
    else:
        mags = rng.uniform(0.3, 1.0, size=spec.n_ellipses)
        mags *= 0.9 / mags.sum()
        phases = rng.uniform(-math.pi, math.pi, size=spec.n_ellipses)
        amps = mags * np.exp(1j * phases)

    sup = SUPERSAMPLE
    xx, yy = spec.x_dim * sup, spec.y_dim * sup
    u = (np.arange(xx) + 0.5) / xx
    v = (np.arange(yy) + 0.5) / yy
    uu, vv = np.meshgrid(u, v, indexing="ij")
    edge = spec.edge_softness * 0.5 * (1.0 / spec.x_dim + 1.0 / spec.y_dim)

    ub = (np.arange(spec.x_dim) + 0.5) / spec.x_dim
    vb = (np.arange(spec.y_dim) + 0.5) / spec.y_dim
    ubb, vbb = np.meshgrid(ub, vb, indexing="ij")
    coeff = rng.uniform(-PHASE_COEFF_RANGE, PHASE_COEFF_RANGE, size=6)
    psi = (
        coeff[0]
        + coeff[1] * ubb
        + coeff[2] * vbb
        + coeff[3] * ubb * vbb
        + coeff[4] * ubb**2
        + coeff[5] * vbb**2
    )
    phase_map = np.exp(1j * psi)

    re = np.zeros((spec.x_dim, spec.y_dim, spec.t_dim))
    im = np.zeros_like(re)
    for t in range(spec.t_dim):
        params = _frame_params(spec, ellipses, t)
        _check_in_view(params, t)
        frame = np.zeros((xx, yy), dtype=np.complex128)
        for p, amp in zip(params, amps):
            du, dv = uu - p["cx"], vv - p["cy"]
            ct, st = math.cos(p["theta"]), math.sin(p["theta"])
            a = (du * ct + dv * st) / p["rx"]
            b = (-du * st + dv * ct) / p["ry"]
            q = np.sqrt(a * a + b * b)
            w = max(edge / (0.5 * (p["rx"] + p["ry"])), 1e-6)
            ramp = np.clip((1.0 + w - q) / (2.0 * w), 0.0, 1.0)
            frame += amp * (ramp * ramp * (3.0 - 2.0 * ramp))
        frame = frame.reshape(spec.x_dim, sup, spec.y_dim, sup).mean(axis=(1, 3))
        frame = frame * phase_map
        re[:, :, t] = frame.real
        im[:, :, t] = frame.imag
    return ComplexVolume(re, im, DOMAIN_IMAGE, 1.0)


@dataclass(frozen=True)
class DatasetSpec:
    """Dimensions plus the per-sequence parameter ranges for a dataset."""

    x_dim: int
    y_dim: int
    t_dim: int
    n_ellipses_range: tuple[int, int] = (2, 6)
    motion_range: tuple[float, float] = (0.05, 0.11)


def _float32_quantize(v: ComplexVolume) -> ComplexVolume:
    return ComplexVolume(
        v.re.astype(np.float32).astype(np.float64),
        v.im.astype(np.float32).astype(np.float64),
        v.domain,
        v.scale,
    )


def make_dataset(
    out_dir: str | Path,
    n_train: int,
    n_test: int,
    dataset_spec: DatasetSpec,
    seed: int,
) -> Path:
    """Write normalized image/k-space .kvol pairs plus a split-labeled manifest.

    Train and test sequences use disjoint geometry seeds.  Each stored k-space
    volume is the exact transform of its stored (float32-quantized) image.
    Returns the manifest path; lines read ``<split> <image|kspace> <filename>``.
    """
    if n_train < 1 or n_test < 0:
        raise SpecError("dataset needs n_train >= 1 and n_test >= 0")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    lo_e, hi_e = dataset_spec.n_ellipses_range
    lines = []
    for split, count, offset in (("train", n_train, 0), ("test", n_test, n_train)):
        for i in range(count):
            item_seed = seed * 1_000_003 + offset + i
            pspec = PhantomSpec(
                x_dim=dataset_spec.x_dim,
                y_dim=dataset_spec.y_dim,
                t_dim=dataset_spec.t_dim,
                seed=item_seed,
                n_ellipses=int(rng.integers(lo_e, hi_e + 1)),
                motion_amplitude=float(rng.uniform(*dataset_spec.motion_range)),
            )
            image = generate(pspec)
            peak = float(np.max(magnitude(image)))
            image = ComplexVolume(image.re / peak, image.im / peak, DOMAIN_IMAGE, 1.0)
            image = _float32_quantize(image)
            kvol = fft2(image)
            image_name = f"{split}_{i:03d}.image.kvol"
            kspace_name = f"{split}_{i:03d}.kspace.kvol"
            write_volume(image, out_dir / image_name)
            write_volume(kvol, out_dir / kspace_name)
            lines.append(f"{split} image {image_name}")
            lines.append(f"{split} kspace {kspace_name}")
    manifest = out_dir / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest
