"""Value quantization: merge values lying within ``eps`` of each other.

Zero is never binned.  Zeros encode determinism (structural support), and
merging them with small positive values would silently re-grow the support.
"""
from __future__ import annotations

import numpy as np


def quantization_bins(values, eps):
    """Greedy sorted sweep over the distinct positive values.

    A new bin opens whenever a value exceeds the current bin's minimum by
    more than ``eps``.  For interval-diameter bins this greedy choice yields
    the minimum possible number of bins.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    distinct = sorted({float(v) for v in values if v > 0})
    bins = []
    for v in distinct:
        if bins and v - bins[-1][0] <= eps:
            bins[-1].append(v)
        else:
            bins.append([v])
    return bins


def quantization_map(values, eps):
    """Map each distinct positive value to the mean of its bin's distinct values."""
    mapping = {}
    for b in quantization_bins(values, eps):
        mean = b[0] if len(b) == 1 else sum(b) / len(b)
        for v in b:
            mapping[v] = mean
    return mapping


def quantize_array(values: np.ndarray, eps: float) -> np.ndarray:
    """Array form of :func:`quantization_map` applied entrywise."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    ordered = np.sort(values, axis=None)
    gaps = np.diff(ordered[ordered > 0])
    if not np.any((gaps > 0) & (gaps <= eps)):
        return values
    pos = values > 0
    distinct = np.unique(values[pos])
    mapping = quantization_map(distinct.tolist(), eps)
    means = np.array([mapping[v] for v in distinct.tolist()])
    out = np.zeros_like(values)
    out[pos] = means[np.searchsorted(distinct, values[pos])]
    return out
