"""Independent brute-force reference implementations.

These deliberately avoid the library's code paths: morphology scans
neighborhoods pixel by pixel, Otsu evaluates every threshold with exact
rational arithmetic, the Gaussian uses a dense 2-D kernel, metrics count
pixels in Python loops, and the two-stain unmix solves the normal equations
by Cramer's rule.
"""

import math
from fractions import Fraction

import numpy as np


def morph_reference(bits: np.ndarray, op: str, radius: int) -> np.ndarray:
    """Direct neighborhood scan; out-of-bounds pixels are background."""
    if op == "open":
        return morph_reference(morph_reference(bits, "erode", radius), "dilate", radius)
    if op == "close":
        return morph_reference(morph_reference(bits, "dilate", radius), "erode", radius)
    h, w = bits.shape
    offsets = [
        (dy, dx)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
        if dx * dx + dy * dy <= radius * radius
    ]
    out = np.zeros_like(bits)
    for y in range(h):
        for x in range(w):
            samples = []
            for dy, dx in offsets:
                yy, xx = y + dy, x + dx
                samples.append(bool(bits[yy, xx]) if 0 <= yy < h and 0 <= xx < w else False)
            out[y, x] = any(samples) if op == "dilate" else all(samples)
    return out


def otsu_reference(values: np.ndarray) -> int:
    """Exhaustive 256-threshold argmax of w0*w1*(mu0-mu1)^2, exact rationals,
    smallest threshold on ties; constant images return their value."""
    vals = np.asarray(values).ravel()
    lo, hi = int(vals.min()), int(vals.max())
    if lo == hi:
        return lo
    n = int(vals.size)
    best_t = 0
    best = Fraction(-1)
    for t in range(256):
        low = vals <= t
        c0 = int(np.count_nonzero(low))
        c1 = n - c0
        if c0 == 0 or c1 == 0:
            sb = Fraction(0)
        else:
            mu0 = Fraction(int(vals[low].sum()), c0)
            mu1 = Fraction(int(vals[~low].sum()), c1)
            sb = Fraction(c0, n) * Fraction(c1, n) * (mu0 - mu1) ** 2
        if sb > best:
            best, best_t = sb, t
    return best_t


def gaussian_reference(data: np.ndarray, sigma: float) -> np.ndarray:
    """Dense 2-D convolution with the truncated, renormalized kernel and
    edge-replicated padding."""
    if sigma == 0:
        return data.copy()
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k1 = np.exp(-(x * x) / (2.0 * sigma * sigma))
    k1 /= k1.sum()
    k2 = np.outer(k1, k1)
    padded = np.pad(data, radius, mode="edge")
    h, w = data.shape
    out = np.empty((h, w), dtype=np.float64)
    for yy in range(h):
        for xx in range(w):
            out[yy, xx] = float(np.sum(padded[yy:yy + 2 * radius + 1, xx:xx + 2 * radius + 1] * k2))
    return out


def iou_reference(a: np.ndarray, b: np.ndarray) -> float:
    h, w = a.shape
    inter = 0
    union = 0
    for y in range(h):
        for x in range(w):
            if a[y, x] and b[y, x]:
                inter += 1
            if a[y, x] or b[y, x]:
                union += 1
    return 1.0 if union == 0 else inter / union


def dice_reference(a: np.ndarray, b: np.ndarray) -> float:
    h, w = a.shape
    inter = 0
    total = 0
    for y in range(h):
        for x in range(w):
            if a[y, x] and b[y, x]:
                inter += 1
            total += int(bool(a[y, x])) + int(bool(b[y, x]))
    return 1.0 if total == 0 else 2.0 * inter / total


def mae_reference(pred, ref) -> float:
    return math.fsum(abs(p - r) for p, r in zip(pred, ref)) / len(pred)


def pearson_reference(pred, ref) -> float:
    n = len(pred)
    mx = math.fsum(pred) / n
    my = math.fsum(ref) / n
    num = math.fsum((p - mx) * (r - my) for p, r in zip(pred, ref))
    den = math.sqrt(
        math.fsum((p - mx) ** 2 for p in pred) * math.fsum((r - my) ** 2 for r in ref)
    )
    return num / den


def unmix_two_stains_reference(stain_rows: np.ndarray, od: np.ndarray) -> tuple[float, float]:
    """Least squares min ||M^T c - od|| for two stains via normal equations
    and Cramer's rule (no clamping)."""
    m = np.asarray(stain_rows, dtype=np.float64)
    g00 = float(m[0] @ m[0])
    g01 = float(m[0] @ m[1])
    g11 = float(m[1] @ m[1])
    b0 = float(m[0] @ od)
    b1 = float(m[1] @ od)
    det = g00 * g11 - g01 * g01
    c0 = (b0 * g11 - b1 * g01) / det
    c1 = (g00 * b1 - g01 * b0) / det
    return c0, c1
