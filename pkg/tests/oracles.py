"""Independent reference implementations used to cross-check the library.

Everything here is deliberately written a different way than the package:
plain Python loops, sets, and explicit threshold enumeration — slow but
obviously correct.
"""

from __future__ import annotations

import math

import numpy as np


def epg_reference(values, gt_bits) -> float:
    """Pixel-by-pixel energy pointing: normalize, then two explicit sums."""
    values = np.asarray(values, dtype=np.float64)
    gt_bits = np.asarray(gt_bits, dtype=bool)
    lo = min(float(v) for v in values.ravel())
    hi = max(float(v) for v in values.ravel())
    if hi == lo:
        return 0.0
    inside = []
    everything = []
    for r in range(values.shape[0]):
        for c in range(values.shape[1]):
            a = (float(values[r, c]) - lo) / (hi - lo)
            everything.append(a)
            if gt_bits[r, c]:
                inside.append(a)
    denom = math.fsum(everything)
    if denom == 0.0:
        return 0.0
    return math.fsum(inside) / denom


def _rank_row_major(values) -> list[int]:
    """Flat pixel indices from most to least active; ties keep flat order."""
    flat = [float(v) for v in np.asarray(values, dtype=np.float64).ravel()]
    return sorted(range(len(flat)), key=lambda i: (-flat[i], i))


def nra_reference(values, gt_bits) -> float:
    """Exhaustive per-threshold IoU sweep with Python sets, then explicit
    trapezoid summation and the same analytic baselines."""
    gt_bits = np.asarray(gt_bits, dtype=bool)
    total = gt_bits.size
    gt_set = {i for i, b in enumerate(gt_bits.ravel().tolist()) if b}
    m = len(gt_set)
    if m == 0:
        raise ValueError("empty ground truth")
    order = _rank_row_major(values)

    def trapezoid(ys: list[float]) -> float:
        return math.fsum((ys[i] + ys[i + 1]) / 2.0 for i in range(len(ys) - 1))

    ious, ideal, rand = [], [], []
    for n in range(1, 101):
        k = round(n * total / 100)
        selected = set(order[:k])
        inter = len(selected & gt_set)
        union = len(selected | gt_set)
        ious.append(inter / union)
        best = min(k, m)
        ideal.append(best / (k + m - best))
        r = k * m / total
        rand.append(r / (k + m - r))
    auc, auc_high, auc_low = trapezoid(ious), trapezoid(ideal), trapezoid(rand)
    if auc_high == auc_low:
        raise ValueError("degenerate baselines")
    return (auc - auc_low) / (auc_high - auc_low)


def nra_all_masks_oracle(values) -> dict[int, float]:
    """NRA for EVERY non-empty, non-full mask on a tiny grid, computed by
    explicit per-threshold selection matrices and batched set algebra.

    Masks are encoded as integers whose bit i is flat pixel i. Independent
    of the library path (no argsort/cumsum): selection membership is
    materialized per threshold and intersections are matrix products.
    """
    values = np.asarray(values, dtype=np.float64)
    total = values.size
    if total > 20:
        raise ValueError("oracle is exponential; use grids of at most 20 pixels")
    order = _rank_row_major(values)

    ks = [round(n * total / 100) for n in range(1, 101)]
    selection = np.zeros((100, total), dtype=np.float64)
    for row, k in enumerate(ks):
        for i in order[:k]:
            selection[row, i] = 1.0

    n_masks = 1 << total
    codes = np.arange(n_masks, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(total)[None, :]) & 1).astype(np.float64)
    m_sizes = bits.sum(axis=1)

    inter = bits @ selection.T  # (masks, 100)
    k_row = np.asarray(ks, dtype=np.float64)[None, :]
    union = k_row + m_sizes[:, None] - inter
    ious = np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)
    aucs = np.trapezoid(ious, np.arange(1, 101, dtype=np.float64), axis=1)

    out: dict[int, float] = {}
    n_axis = np.arange(1, 101, dtype=np.float64)
    baseline_cache: dict[int, tuple[float, float]] = {}
    for code in range(1, n_masks - (1 if total else 0)):
        m = int(m_sizes[code])
        if m == 0 or m == total:
            continue
        if m not in baseline_cache:
            best = np.minimum(k_row[0], m)
            ideal = best / (k_row[0] + m - best)
            r = k_row[0] * m / total
            rand = r / (k_row[0] + m - r)
            baseline_cache[m] = (
                float(np.trapezoid(ideal, n_axis)),
                float(np.trapezoid(rand, n_axis)),
            )
        high, low = baseline_cache[m]
        out[code] = (float(aucs[code]) - low) / (high - low)
    return out


def image_aggregate_reference(cdps, lds) -> tuple[float, float, float]:
    """(adp, mdp, mad) by direct arithmetic."""
    cdps = [float(v) for v in cdps]
    lds = [float(v) for v in lds]
    adp = math.fsum(cdps) / len(cdps)
    mdp = max(cdps)
    mad = max(abs(v) for v in lds)
    return adp, mdp, mad


def softmax_reference(logits) -> list[float]:
    zs = [float(z) for z in logits]
    mx = max(zs)
    exps = [math.exp(z - mx) for z in zs]
    total = math.fsum(exps)
    return [e / total for e in exps]
