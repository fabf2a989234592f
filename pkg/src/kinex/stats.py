"""Histograms, CCDFs, moments and inequality summaries of wealth samples."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats as sps


class EmptySampleError(ValueError):
    pass


def _as_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptySampleError("need at least one sample")
    return x


# --- binning -----------------------------------------------------------------


@dataclass(frozen=True)
class Linear:
    """``n_bins`` equal-width bins on ``[lo, hi)``; bounds default to the data range."""

    n_bins: int
    lo: float | None = None
    hi: float | None = None

    def edges(self, x: np.ndarray) -> np.ndarray:
        lo = float(x.min()) if self.lo is None else self.lo
        hi = float(np.nextafter(x.max(), np.inf)) if self.hi is None else self.hi
        if not hi > lo:
            hi = np.nextafter(lo, np.inf)
        return np.linspace(lo, hi, self.n_bins + 1)


@dataclass(frozen=True)
class Logarithmic:
    """``n_bins`` geometric bins from ``min_positive`` (default: smallest positive sample)."""

    n_bins: int
    min_positive: float | None = None
    hi: float | None = None

    def edges(self, x: np.ndarray) -> np.ndarray:
        pos = x[x > 0]
        if self.min_positive is None:
            if pos.size == 0:
                raise ValueError("logarithmic bins need at least one positive sample")
            lo = float(pos.min())
        else:
            lo = self.min_positive
        if self.hi is None:
            top = pos.max() if pos.size else lo
            hi = float(np.nextafter(top, np.inf))
        else:
            hi = self.hi
        if not hi > lo:
            hi = lo * (1 + 1e-12)
        return np.geomspace(lo, hi, self.n_bins + 1)


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    n_total: int
    underflow: int = 0
    overflow: int = 0
    scheme: Linear | Logarithmic | None = None

    @property
    def centers(self) -> np.ndarray:
        if isinstance(self.scheme, Logarithmic):
            return np.sqrt(self.edges[:-1] * self.edges[1:])
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def density(self) -> np.ndarray:
        return self.counts / (self.n_total * np.diff(self.edges))

    def mode_center(self) -> float:
        """Center of the most populated bin (first one on ties)."""
        return float(self.centers[int(np.argmax(self.counts))])

    def cumulative_mass(self) -> np.ndarray:
        """Normalized cumulative mass at each edge, underflow included.

        Entry k is the fraction of all samples below ``edges[k]``.
        """
        c = np.concatenate(([self.underflow], self.counts)).cumsum()
        return c / self.n_total


def build_histogram(samples, scheme=None, edges=None) -> Histogram:
    """Bin samples into half-open bins ``[edge_k, edge_k+1)``.

    Pass either a binning ``scheme`` or explicit ``edges``. Samples outside the
    edge range land in the under/overflow counters, so
    ``counts.sum() + underflow + overflow == n_total`` always. With a
    logarithmic scheme zeros are counted as underflow.
    """
    x = _as_samples(samples)
    if edges is None:
        if scheme is None:
            scheme = Linear(50)
        edges = scheme.edges(x)
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing with at least two entries")
    idx = np.searchsorted(edges, x, side="right") - 1
    under = int(np.count_nonzero(idx < 0))
    over = int(np.count_nonzero(idx >= edges.size - 1))
    inside = idx[(idx >= 0) & (idx < edges.size - 1)]
    counts = np.bincount(inside, minlength=edges.size - 1)
    return Histogram(edges, counts, int(x.size), under, over, scheme)


def histogram_ks(a: Histogram, b: Histogram) -> float:
    """Max absolute difference of normalized cumulative bin mass."""
    if a.edges.shape != b.edges.shape or not np.array_equal(a.edges, b.edges):
        raise ValueError("histograms were built with different bin edges")
    return float(np.max(np.abs(a.cumulative_mass() - b.cumulative_mass())))


# --- distribution functions --------------------------------------------------


@dataclass
class CcdfCurve:
    """Survival function ``P(X >= w)`` at each distinct sample value."""

    w: np.ndarray
    fraction: np.ndarray
    n_total: int

    @property
    def points(self):
        return list(zip(self.w.tolist(), self.fraction.tolist()))

    def at(self, x) -> np.ndarray:
        """Fraction of samples ``>= x`` for arbitrary query points."""
        x = np.asarray(x, dtype=float)
        # index of first stored value >= x
        k = np.searchsorted(self.w, x, side="left")
        padded = np.append(self.fraction, 0.0)
        return padded[k]

    def thinned(self, max_points: int) -> "CcdfCurve":
        """Subset of at most ``max_points`` points, dense in both bulk and tail."""
        m = self.w.size
        if m <= max_points:
            return self
        half = max_points // 2
        lin = np.linspace(0, m - 1, half)
        tail = m - np.geomspace(1, m, max_points - half)
        idx = np.unique(np.clip(np.round(np.concatenate((lin, tail))), 0, m - 1).astype(int))
        return CcdfCurve(self.w[idx], self.fraction[idx], self.n_total)


def empirical_ccdf(samples) -> CcdfCurve:
    x = np.sort(_as_samples(samples))
    n = x.size
    w, first = np.unique(x, return_index=True)
    return CcdfCurve(w, (n - first) / n, n)


def ccdf_slope(samples, lo: float, hi: float) -> float:
    """Least-squares slope of log CCDF against log w over samples in ``[lo, hi]``."""
    curve = empirical_ccdf(samples)
    sel = (curve.w >= lo) & (curve.w <= hi) & (curve.w > 0)
    if np.count_nonzero(sel) < 2:
        raise ValueError(f"fewer than two distinct samples in [{lo}, {hi}]")
    slope, _ = np.polyfit(np.log(curve.w[sel]), np.log(curve.fraction[sel]), 1)
    return float(slope)


def top_decade_slope(samples, tail_fraction: float = 0.01) -> float:
    """CCDF log-log slope over one decade of wealth starting at the
    ``1 - tail_fraction`` quantile."""
    x = _as_samples(samples)
    start = float(np.quantile(x, 1.0 - tail_fraction))
    return ccdf_slope(x, start, 10.0 * start)


def ks_distance(samples, model_cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Sup distance between the empirical CDF and ``model_cdf``, both one-sided gaps."""
    x = np.sort(_as_samples(samples))
    n = x.size
    f = np.asarray(model_cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1) / n)
    return float(max(d_plus, d_minus))


def ks_pvalue(distance: float, n: int) -> float:
    """Two-sided one-sample KS p-value for ``n`` iid samples."""
    return float(sps.kstwo.sf(distance, n))


# --- moments and inequality ---------------------------------------------------


@dataclass
class SummaryStats:
    mean: float
    variance: float
    raw_moments: tuple
    mode_center: float | None = None
    gini: float | None = None
    n: int = 0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "variance": self.variance,
            "m1": self.raw_moments[0],
            "m2": self.raw_moments[1],
            "m3": self.raw_moments[2],
            "m4": self.raw_moments[3],
            "mode_bin_center": self.mode_center,
            "gini": self.gini,
        }


def moments(samples, k: int = 4) -> SummaryStats:
    """Raw moments ``m_j = mean(x**j)`` for ``j = 1..k`` plus mean and variance."""
    if not 1 <= k <= 4:
        raise ValueError("k must be between 1 and 4")
    x = _as_samples(samples)
    raw = [float(np.mean(x**j)) for j in range(1, 5)]
    mean = raw[0]
    var = float(np.mean((x - mean) ** 2))
    return SummaryStats(mean, var, tuple(raw[:k]) + (None,) * (4 - k), n=int(x.size))


def gini(samples) -> float:
    """Gini coefficient from the sorted-index formula.

    ``G = 2 * sum(i * x_(i)) / (n * sum(x)) - (n + 1) / n`` with ``i = 1..n``.
    """
    x = np.sort(_as_samples(samples))
    if np.any(x < 0):
        raise ValueError("gini needs non-negative samples")
    total = x.sum()
    if total <= 0:
        raise ValueError("gini is undefined for all-zero samples")
    n = x.size
    i = np.arange(1, n + 1)
    g = 2.0 * np.dot(i, x) / (n * total) - (n + 1) / n
    return float(max(g, 0.0))


def normalize_by_mean(samples) -> np.ndarray:
    x = _as_samples(samples)
    m = x.mean()
    if not m > 0:
        raise ValueError("normalization needs a positive mean")
    return x / m


def summarize(samples, hist: Histogram | None = None) -> SummaryStats:
    """Moments, Gini and the histogram mode in one pass."""
    s = moments(samples)
    x = np.asarray(samples, dtype=float).ravel()
    if hist is None:
        hist = build_histogram(x, Linear(100, 0.0))
    s.mode_center = hist.mode_center()
    s.gini = gini(x) if x.sum() > 0 else None
    return s
