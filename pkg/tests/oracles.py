"""Independent reference implementations used as test oracles.

Everything here is deliberately brute-force so it cannot share an algorithm
(and therefore a bug) with the library code it checks: the DFT is a direct
matrix product, the metrics loop over explicit windows, and gradients come
from central finite differences.
"""

from __future__ import annotations

import math

import numpy as np

FD_STEP = 1e-6


def rel_err(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(float(np.max(np.abs(b))), 1e-12)
    return float(np.max(np.abs(a - b)) / denom)


def fd_gradient(f, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central finite differences of the scalar function f at every entry."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        grad[i] = (f(xp) - f(xm)) / (2 * h)
    return grad


def fd_at(f, x: np.ndarray, flat_index: int, h: float = FD_STEP) -> float:
    """Central finite difference of f along one flattened coordinate of x."""
    xp = np.array(x, dtype=np.float64)
    xm = xp.copy()
    xp.reshape(-1)[flat_index] += h
    xm.reshape(-1)[flat_index] -= h
    return (f(xp) - f(xm)) / (2 * h)


def direct_dft2(vol: np.ndarray) -> np.ndarray:
    """Centered orthonormal 2D DFT per frame, as an explicit matrix product."""
    x = np.asarray(vol, dtype=np.complex128)
    n_x, n_y, _ = x.shape
    jx = np.arange(n_x) - n_x // 2
    jy = np.arange(n_y) - n_y // 2
    ex = np.exp(-2j * np.pi * np.outer(jx, jx) / n_x)
    ey = np.exp(-2j * np.pi * np.outer(jy, jy) / n_y)
    return np.einsum("km,ln,mnt->klt", ex, ey, x) / math.sqrt(n_x * n_y)


def brute_psnr(estimate: np.ndarray, reference: np.ndarray) -> float:
    err = float(np.mean((estimate - reference) ** 2))
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(float(reference.max()) ** 2 / err)


def brute_nmse(estimate: np.ndarray, reference: np.ndarray) -> float:
    return float(np.sum((estimate - reference) ** 2) / np.sum(reference**2))


def brute_ssim(
    estimate: np.ndarray,
    reference: np.ndarray,
    window: int = 7,
    k1: float = 0.01,
    k2: float = 0.03,
) -> float:
    """Sliding 7x7 uniform-window SSIM, written as explicit python loops."""
    span = float(reference.max() - reference.min())
    c1, c2 = (k1 * span) ** 2, (k2 * span) ** 2
    n_x, n_y, n_t = reference.shape
    frame_means = []
    for t in range(n_t):
        values = []
        for i in range(n_x - window + 1):
            for j in range(n_y - window + 1):
                a = estimate[i : i + window, j : j + window, t]
                b = reference[i : i + window, j : j + window, t]
                mu_a, mu_b = a.mean(), b.mean()
                var_a, var_b = a.var(), b.var()
                cov = ((a - mu_a) * (b - mu_b)).mean()
                values.append(
                    ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                    / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
                )
        frame_means.append(np.mean(values))
    return float(np.mean(frame_means))
