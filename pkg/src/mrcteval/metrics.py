"""Full-reference image quality metrics: MSE, PSNR, SSIM, UQI, VIF.

All metrics operate on :class:`~mrcteval.imageio.ImagePlane` values in native
0..255 units; PSNR and SSIM take the dynamic range R from the plane itself.
Window sums use a fixed traversal order, so results are bit-stable regardless
of how callers parallelize across image pairs.

PSNR is computed as 10*log10(R^2/MSE). UQI is the three-factor
correlation/luminance/contrast product, i.e. SSIM with C1 = C2 = 0 and a
uniform window. VIF is the pixel-domain multi-scale variant: a Gaussian
pyramid with per-scale sigma = s/5, a scalar gain/residual channel model per
local window, and an information ratio summed over all windows and scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import MetricError
from .imageio import ImagePlane


@dataclass(frozen=True)
class SsimParams:
    """Window and stabilization constants for SSIM.

    C1 = (k1*R)^2 and C2 = (k2*R)^2 are derived from the plane's range R.
    """

    window_size: int = 11
    gaussian_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03

    def __post_init__(self):
        if self.window_size <= 0 or self.window_size % 2 == 0:
            raise MetricError("window_size must be an odd positive integer")
        if self.gaussian_sigma <= 0:
            raise MetricError("gaussian_sigma must be positive")
        if self.k1 <= 0 or self.k2 <= 0:
            raise MetricError("k1 and k2 must be positive")


@dataclass(frozen=True)
class VifParams:
    """Scale count, HVS noise variance, and gain stabilizer for VIF."""

    num_scales: int = 4
    noise_variance: float = 2.0
    eps: float = 1e-10

    def __post_init__(self):
        if self.num_scales < 1:
            raise MetricError("num_scales must be >= 1")
        if self.noise_variance <= 0:
            raise MetricError("noise_variance must be positive")
        if self.eps <= 0:
            raise MetricError("eps must be positive")


@dataclass(frozen=True)
class MetricRecord:
    """One evaluated pair's metric values; None marks a metric not computed.

    psnr_db is math.inf for identical planes (MSE = 0).
    """

    psnr_db: float | None = None
    ssim: float | None = None
    uqi: float | None = None
    vif: float | None = None

    def __post_init__(self):
        if self.ssim is not None and not -1.0 - 1e-9 <= self.ssim <= 1.0 + 1e-9:
            raise MetricError(f"ssim out of [-1, 1]: {self.ssim}")
        if self.uqi is not None and not -1.0 - 1e-9 <= self.uqi <= 1.0 + 1e-9:
            raise MetricError(f"uqi out of [-1, 1]: {self.uqi}")
        if self.vif is not None and self.vif < 0.0:
            raise MetricError(f"vif negative: {self.vif}")


def _require_same_shape(a: ImagePlane, b: ImagePlane, op: str) -> None:
    if not a.same_shape(b):
        raise MetricError(
            f"{op}: dimension mismatch {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Normalized 2-D Gaussian window of odd size, sum exactly renormalized."""
    if size <= 0 or size % 2 == 0:
        raise MetricError("kernel size must be an odd positive integer")
    c = size // 2
    coords = np.arange(size, dtype=np.float64) - c
    g1 = np.exp(-(coords**2) / (2.0 * sigma**2))
    g1 /= g1.sum()
    k = np.outer(g1, g1)
    return k / k.sum()


def _windowed_moments(a: np.ndarray, b: np.ndarray, kernel: np.ndarray):
    """Weighted mean/variance/covariance over every valid window position.

    Variances come from weighted squared deviations, never E[x^2]-mu^2, so a
    constant window yields an exact zero.
    """
    kh, kw = kernel.shape
    wa = sliding_window_view(a, (kh, kw))
    wb = sliding_window_view(b, (kh, kw))
    axes = ([2, 3], [0, 1])
    mu_a = np.tensordot(wa, kernel, axes=axes)
    mu_b = np.tensordot(wb, kernel, axes=axes)
    da = wa - mu_a[..., None, None]
    db = wb - mu_b[..., None, None]
    var_a = np.tensordot(da * da, kernel, axes=axes)
    var_b = np.tensordot(db * db, kernel, axes=axes)
    cov = np.tensordot(da * db, kernel, axes=axes)
    return mu_a, mu_b, var_a, var_b, cov


def _pad_symmetric(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    kh, kw = kernel.shape
    return np.pad(img, ((kh // 2, kh // 2), (kw // 2, kw // 2)), mode="symmetric")


def _filter_same(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Correlate with the kernel at every pixel, symmetric boundary."""
    padded = _pad_symmetric(img, kernel)
    windows = sliding_window_view(padded, kernel.shape)
    return np.tensordot(windows, kernel, axes=([2, 3], [0, 1]))


def mse(a: ImagePlane, b: ImagePlane) -> float:
    """Mean squared pixel difference; 0 iff the planes are identical."""
    _require_same_shape(a, b, "mse")
    d = a.pixels - b.pixels
    return float(np.mean(d * d))


def psnr(a: ImagePlane, b: ImagePlane) -> float:
    """Peak signal-to-noise ratio 10*log10(R^2/MSE) in dB; inf when MSE = 0."""
    _require_same_shape(a, b, "psnr")
    if a.range_r != b.range_r:
        raise MetricError(f"psnr: range mismatch {a.range_r} vs {b.range_r}")
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(a.range_r**2 / err)


def ssim(a: ImagePlane, b: ImagePlane, params: SsimParams | None = None) -> float:
    """Mean structural similarity over Gaussian-weighted sliding windows.

    Windows slide with stride 1 over valid positions only (no padding).
    """
    p = params or SsimParams()
    _require_same_shape(a, b, "ssim")
    if a.range_r != b.range_r:
        raise MetricError(f"ssim: range mismatch {a.range_r} vs {b.range_r}")
    if min(a.width, a.height) < p.window_size:
        raise MetricError(
            f"ssim: image {a.width}x{a.height} smaller than window {p.window_size}"
        )
    kernel = gaussian_kernel(p.window_size, p.gaussian_sigma)
    c1 = (p.k1 * a.range_r) ** 2
    c2 = (p.k2 * a.range_r) ** 2
    mu_a, mu_b, var_a, var_b, cov = _windowed_moments(a.pixels, b.pixels, kernel)
    scores = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )
    return float(np.mean(scores))


def uqi(a: ImagePlane, b: ImagePlane, window: int = 8) -> float:
    """Universal quality index over uniform sliding windows (stride 1).

    Per window: correlation * luminance * contrast, i.e. SSIM with
    C1 = C2 = 0. Degenerate windows: both variances zero and equal means
    contribute 1; both zero with differing means contribute the luminance
    factor alone; exactly one zero variance contributes 0.
    """
    if window <= 0:
        raise MetricError("uqi: window must be positive")
    _require_same_shape(a, b, "uqi")
    if min(a.width, a.height) < window:
        raise MetricError(f"uqi: image {a.width}x{a.height} smaller than window {window}")
    kernel = np.full((window, window), 1.0 / (window * window), dtype=np.float64)
    mu_a, mu_b, var_a, var_b, cov = _windowed_moments(a.pixels, b.pixels, kernel)

    a_zero = var_a == 0.0
    b_zero = var_b == 0.0
    both_zero = a_zero & b_zero
    regular = ~(a_zero | b_zero)

    scores = np.zeros_like(mu_a)
    if np.any(both_zero):
        ma, mb = mu_a[both_zero], mu_b[both_zero]
        lum = np.where(ma == mb, 1.0, 2.0 * ma * mb / (ma**2 + mb**2))
        scores[both_zero] = lum
    if np.any(regular):
        ma, mb = mu_a[regular], mu_b[regular]
        va, vb, cv = var_a[regular], var_b[regular], cov[regular]
        sa, sb = np.sqrt(va), np.sqrt(vb)
        corr = cv / (sa * sb)
        lum = 2.0 * ma * mb / (ma**2 + mb**2)
        con = 2.0 * sa * sb / (va + vb)
        scores[regular] = corr * lum * con
    # one_zero windows keep their initial 0
    return float(np.mean(scores))


def vif(a: ImagePlane, b: ImagePlane, params: VifParams | None = None) -> float:
    """Pixel-domain visual information fidelity of distorted b against reference a.

    Per scale s = 1..num_scales the planes are low-pass filtered with a
    Gaussian of sigma = s/5 and decimated by 2 (for s > 1); local moments are
    taken through the same kernel centered on every pixel with symmetric
    boundary handling. Gain g = cov/(var_ref + eps) and residual
    var_b - g*cov are both clamped to >= 0.
    """
    p = params or VifParams()
    _require_same_shape(a, b, "vif")
    if min(a.width, a.height) < 2**p.num_scales:
        raise MetricError(
            f"vif: image {a.width}x{a.height} too small for {p.num_scales} scales"
        )
    x = a.pixels
    y = b.pixels
    if float(x.min()) == float(x.max()):
        raise MetricError("vif: reference carries no information")
    num = 0.0
    den = 0.0
    for s in range(1, p.num_scales + 1):
        sigma = s / 5.0
        size = 2 * math.ceil(3.0 * sigma) + 1
        kernel = gaussian_kernel(size, sigma)
        if s > 1:
            x = _filter_same(x, kernel)[::2, ::2]
            y = _filter_same(y, kernel)[::2, ::2]
        px = _pad_symmetric(x, kernel)
        py = _pad_symmetric(y, kernel)
        _, _, var_x, var_y, cov = _windowed_moments(px, py, kernel)
        g = np.clip(cov / (var_x + p.eps), 0.0, None)
        sv_sq = np.clip(var_y - g * cov, 0.0, None)
        num += float(np.sum(np.log2(1.0 + g**2 * var_x / (sv_sq + p.noise_variance))))
        den += float(np.sum(np.log2(1.0 + var_x / p.noise_variance)))
    if den == 0.0:
        raise MetricError("vif: reference carries no information")
    return num / den
