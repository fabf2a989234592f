"""Estimators for the bulk and tail shapes of wealth distributions.

Conventions
-----------
Gamma bulk
    density proportional to ``w**n * exp(-w / T)``; ``n`` is the reported
    exponent, so scipy's Gamma *shape* is ``n + 1`` and its scale is ``T``.
    ``n = 0`` is the exponential (Boltzmann-Gibbs) law.
Power-law tail
    survival function ``P(X > w) ~ w**-alpha``, i.e. density exponent
    ``alpha + 1``; ``alpha`` is estimated by Hill's estimator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import optimize, special

from .stats import _as_samples

EXPONENTIAL = "exponential"
GAMMA = "gamma"
POWERLAW = "powerlaw_tail"
LOGNORMAL = "lognormal"
PIECEWISE = "piecewise"
FAMILIES = (EXPONENTIAL, GAMMA, POWERLAW, LOGNORMAL, PIECEWISE)

MIN_TAIL = 10
# crossover scores closer than this many tail-KS resolutions (1/sqrt(k)) are ties
TIE_RESOLUTION = 0.25
DEFAULT_QUANTILES = 1.0 - np.geomspace(0.2, 0.001, 60)


class FitError(ValueError):
    def __init__(self, family: str, message: str):
        super().__init__(f"{family}: {message}")
        self.family = family


@dataclass
class FitResult:
    family: str
    params: dict
    ks: float
    n_used: int
    warnings: list = field(default_factory=list)
    parts: dict = field(default_factory=dict)

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.family == EXPONENTIAL:
            return _exp_cdf(x, p["T"])
        if self.family == GAMMA:
            return _gamma_cdf(x, p["n"], p["T"])
        if self.family == LOGNORMAL:
            return _lognormal_cdf(x, p["mu"], p["sigma"])
        if self.family == POWERLAW:
            # conditional on exceeding w_min
            return _pareto_cdf(x, p["alpha"], p["w_min"])
        if self.family == PIECEWISE:
            bulk = self.parts["bulk"]
            if p.get("w_c") is None:
                return bulk.cdf(x)
            return _piecewise_cdf(x, bulk, p["alpha"], p["w_c"], p["bulk_fraction"])
        raise FitError(self.family, "unknown family")

    def ccdf(self, x) -> np.ndarray:
        """Unconditional survival function; for a bare tail fit it is scaled by the tail fraction."""
        x = np.asarray(x, dtype=float)
        if self.family == POWERLAW:
            p = self.params
            out = p["tail_fraction"] * (1.0 - self.cdf(x))
            return np.where(x >= p["w_min"], out, np.nan)
        return 1.0 - self.cdf(x)

    def to_dict(self) -> dict:
        out = {
            "family": self.family,
            "params": {k: _plain(v) for k, v in self.params.items()},
            "ks": _plain(self.ks),
            "n_used": int(self.n_used),
            "warnings": list(self.warnings),
        }
        if self.parts:
            out["parts"] = {k: v.to_dict() for k, v in self.parts.items()}
        return out


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


# --- closed-form CDFs ----------------------------------------------------------


def _exp_cdf(x, T):
    return -np.expm1(-np.maximum(x, 0.0) / T)


def _gamma_cdf(x, n, T):
    return special.gammainc(n + 1.0, np.maximum(x, 0.0) / T)


def _lognormal_cdf(x, mu, sigma):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        lx = np.log(np.where(x > 0, x, 0.0))
    if sigma == 0:
        return (lx >= mu).astype(float)
    return 0.5 * special.erfc(-(lx - mu) / (sigma * math.sqrt(2.0)))


def _pareto_cdf(x, alpha, w_min):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > w_min, -np.expm1(-alpha * np.log(np.maximum(x, w_min) / w_min)), 0.0)


def _piecewise_cdf(x, bulk, alpha, w_c, p_bulk):
    x = np.asarray(x, dtype=float)
    head = p_bulk * bulk.cdf(np.minimum(x, w_c)) / bulk.cdf(w_c)
    tail = p_bulk + (1.0 - p_bulk) * _pareto_cdf(x, alpha, w_c)
    return np.where(x < w_c, head, tail)


def _ks_sorted(x, f):
    """KS distance for already sorted samples ``x`` with model CDF values ``f``."""
    n = x.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


# --- single-family fitters -----------------------------------------------------


def fit_exponential(samples) -> FitResult:
    """Maximum likelihood: the temperature is the sample mean."""
    x = np.sort(_as_samples(samples))
    if np.any(x < 0):
        raise FitError(EXPONENTIAL, "samples must be non-negative")
    T = float(x.mean())
    if not T > 0:
        raise FitError(EXPONENTIAL, "zero mean")
    return FitResult(EXPONENTIAL, {"T": T}, _ks_sorted(x, _exp_cdf(x, T)), x.size)


def gamma_moment_start(mean: float, var: float) -> tuple[float, float]:
    """Moment inversion ``T = v / m``, ``n = m**2 / v - 1``."""
    return mean * mean / var - 1.0, var / mean


def _gamma_mle(mean, mean_log, var):
    """Solve ``ln k - digamma(k) = ln(mean) - mean(ln x)`` for the shape ``k``."""
    s = math.log(mean) - mean_log
    n0, _ = gamma_moment_start(mean, var)
    k0 = n0 + 1.0
    if not s > 0:
        # all mass at one point up to rounding
        return k0

    def grad(k):
        return math.log(k) - special.digamma(k) - s

    lo, hi = max(k0 / 2.0, 1e-8), max(2.0 * k0, 1e-6)
    while grad(lo) < 0:
        lo /= 2.0
    while grad(hi) > 0:
        hi *= 2.0
    return optimize.brentq(grad, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def fit_gamma(samples, method: str = "mle") -> FitResult:
    """Fit ``w**n exp(-w/T)``.

    ``method="mle"`` refines the moment-inversion start by maximum
    likelihood; ``method="moments"`` keeps the moment inversion, which
    reproduces the sample mean and variance exactly. Both estimates are
    always reported in ``params`` (``n_moments``, ``T_moments``).
    """
    if method not in ("mle", "moments"):
        raise FitError(GAMMA, f"method must be 'mle' or 'moments', got {method!r}")
    x = np.sort(_as_samples(samples))
    if not x[0] > 0:
        raise FitError(GAMMA, "samples must be strictly positive")
    mean = float(x.mean())
    var = float(x.var())
    if not var > 0:
        raise FitError(GAMMA, "zero variance, degenerate sample")
    n_mom, T_mom = gamma_moment_start(mean, var)
    if method == "mle":
        k = _gamma_mle(mean, float(np.log(x).mean()), var)
    else:
        k = n_mom + 1.0
    n, T = k - 1.0, mean / k
    params = {"n": n, "T": T, "shape": k, "method": method, "n_moments": n_mom, "T_moments": T_mom}
    return FitResult(GAMMA, params, _ks_sorted(x, _gamma_cdf(x, n, T)), x.size)


def gamma_raw_moment(j: int, n: float, T: float) -> float:
    """``E[X**j]`` for the fitted Gamma: ``T**j * (n+1)(n+2)...(n+j)``."""
    out = T**j
    for i in range(1, j + 1):
        out *= n + i
    return out


def fit_lognormal(samples) -> FitResult:
    x = np.sort(_as_samples(samples))
    if not x[0] > 0:
        raise FitError(LOGNORMAL, "samples must be strictly positive")
    lx = np.log(x)
    mu = float(lx.mean())
    sigma = float(lx.std())
    warnings = []
    if sigma == 0.0:
        warnings.append("degenerate: zero log-variance")
    ks = _ks_sorted(x, _lognormal_cdf(x, mu, sigma))
    return FitResult(LOGNORMAL, {"mu": mu, "sigma": sigma}, ks, x.size, warnings)


def _hill(tail_sorted, w_min):
    return tail_sorted.size / float(np.sum(np.log(tail_sorted / w_min)))


def fit_powerlaw_tail(samples, w_min: float | None = None, quantiles=None) -> FitResult:
    """Hill estimate of the CCDF exponent over samples strictly above ``w_min``.

    Without ``w_min`` a grid of upper quantiles is scanned and the threshold
    whose fitted tail has the smallest KS distance is kept.
    """
    x = np.sort(_as_samples(samples))
    n = x.size
    if w_min is not None:
        if not w_min > 0:
            raise FitError(POWERLAW, "w_min must be positive")
        tail = x[np.searchsorted(x, w_min, side="right"):]
        if tail.size < MIN_TAIL:
            raise FitError(POWERLAW, f"need at least {MIN_TAIL} samples above w_min={w_min}, got {tail.size}")
        alpha = _hill(tail, w_min)
        ks = _ks_sorted(tail, _pareto_cdf(tail, alpha, w_min))
        params = {"alpha": alpha, "w_min": float(w_min), "tail_fraction": tail.size / n}
        return FitResult(POWERLAW, params, ks, tail.size)

    if quantiles is None:
        quantiles = 1.0 - np.geomspace(0.5, MIN_TAIL / max(n, 1), 80) if n > 2 * MIN_TAIL else []
    best = None
    for u in _quantile_thresholds(x, quantiles):
        if u <= 0:
            continue
        try:
            fit = fit_powerlaw_tail(x, u)
        except FitError:
            continue
        if best is None or fit.ks < best.ks:
            best = fit
    if best is None:
        raise FitError(POWERLAW, f"no threshold leaves at least {MIN_TAIL} positive tail samples")
    return best


def _quantile_thresholds(x_sorted, quantiles):
    n = x_sorted.size
    idx = np.unique(np.clip((np.asarray(quantiles) * n).astype(int), 0, n - 1))
    return np.unique(x_sorted[idx])


# --- bulk + tail ----------------------------------------------------------------


def fit_piecewise(samples, bulk: str = LOGNORMAL, quantiles=None) -> FitResult:
    """Bulk family below a crossover ``w_c`` and a Pareto tail above it.

    Candidate crossovers are order statistics at the given upper quantiles.
    A candidate is admissible when it leaves at least 10 tail samples, the
    tail spans at least a decade (``max >= 10 * w_c``), and the Pareto fit
    beats a shifted-exponential fit of the same tail in KS distance. Among
    admissible candidates the one minimizing ``max(ks_bulk, ks_tail)`` wins,
    smallest ``w_c`` on ties. Scores within ``TIE_RESOLUTION / sqrt(k)`` of the
    minimum count as ties, ``k`` being the tail size at the minimum: above the
    true crossover every candidate tail is Pareto and their scores differ only
    by sampling noise. With none admissible the bulk family is fitted to
    everything and a warning is attached.
    """
    if bulk not in (LOGNORMAL, GAMMA):
        raise FitError(PIECEWISE, f"bulk family must be {LOGNORMAL!r} or {GAMMA!r}")
    x = np.sort(_as_samples(samples))
    n = x.size
    if n < 100:
        raise FitError(PIECEWISE, f"need at least 100 samples, got {n}")
    if not x[0] > 0:
        raise FitError(PIECEWISE, "samples must be strictly positive")
    if quantiles is None:
        quantiles = DEFAULT_QUANTILES

    lx = np.log(x)
    cs = np.concatenate(([0.0], np.cumsum(x)))
    cs2 = np.concatenate(([0.0], np.cumsum(x * x)))
    cl = np.concatenate(([0.0], np.cumsum(lx)))
    cl2 = np.concatenate(([0.0], np.cumsum(lx * lx)))

    candidates = []
    short_tail = 0
    for w_c in _quantile_thresholds(x, quantiles):
        nb = int(np.searchsorted(x, w_c, side="left"))
        start = int(np.searchsorted(x, w_c, side="right"))
        tail = x[start:]
        if tail.size < MIN_TAIL or nb < 2:
            short_tail += 1
            continue
        if tail[-1] < 10.0 * w_c:
            continue
        alpha = _hill(tail, w_c)
        ks_tail = _ks_sorted(tail, _pareto_cdf(tail, alpha, w_c))
        rate = 1.0 / float(np.mean(tail - w_c))
        if not ks_tail < _ks_sorted(tail, -np.expm1(-(tail - w_c) * rate)):
            continue
        head = x[:nb]
        bulk_fit = _bulk_from_sums(bulk, nb, cs[nb], cs2[nb], cl[nb], cl2[nb])
        ks_bulk = _ks_sorted(head, bulk_fit.cdf(head) / bulk_fit.cdf(w_c))
        candidates.append((max(ks_bulk, ks_tail), w_c, nb, alpha, ks_bulk, ks_tail, bulk_fit, tail.size))

    if not candidates:
        fitter = fit_lognormal if bulk == LOGNORMAL else fit_gamma
        bulk_fit = fitter(x)
        reason = "no crossover leaves 10 tail samples" if short_tail == len(np.atleast_1d(quantiles)) \
            else "tail segment rejected: no admissible power-law tail"
        params = dict(bulk_fit.params, bulk_family=bulk, alpha=None, w_c=None, bulk_fraction=1.0)
        return FitResult(PIECEWISE, params, bulk_fit.ks, n, bulk_fit.warnings + [reason],
                         {"bulk": bulk_fit})

    top = min(candidates, key=lambda c: c[0])
    cutoff = top[0] + TIE_RESOLUTION / math.sqrt(top[7])
    best = min((c for c in candidates if c[0] <= cutoff), key=lambda c: c[1])
    score, w_c, nb, alpha, ks_bulk, ks_tail, bulk_fit, k = best
    bulk_fit.ks = ks_bulk
    tail_fit = FitResult(POWERLAW, {"alpha": alpha, "w_min": float(w_c), "tail_fraction": k / n}, ks_tail, k)
    p_bulk = nb / n
    params = dict(bulk_fit.params, bulk_family=bulk, alpha=alpha, w_c=float(w_c), bulk_fraction=p_bulk)
    combined = _ks_sorted(x, _piecewise_cdf(x, bulk_fit, alpha, w_c, p_bulk))
    return FitResult(PIECEWISE, params, combined, n, [], {"bulk": bulk_fit, "tail": tail_fit})


def _bulk_from_sums(family, m, s1, s2, sl, sl2):
    """Fit the bulk family from prefix sums of x, x**2, ln x, (ln x)**2."""
    if family == LOGNORMAL:
        mu = sl / m
        sigma = math.sqrt(max(sl2 / m - mu * mu, 0.0))
        return FitResult(LOGNORMAL, {"mu": mu, "sigma": sigma}, float("nan"), m)
    mean = s1 / m
    var = max(s2 / m - mean * mean, 0.0)
    if var <= 0:
        var = np.finfo(float).tiny
    k = _gamma_mle(mean, sl / m, var)
    return FitResult(GAMMA, {"n": k - 1.0, "T": mean / k, "shape": k}, float("nan"), m)


# --- effective dimension ----------------------------------------------------------


class Dimension(NamedTuple):
    D: float
    n: float


def effective_dimension(lam: float, formula: str = "full") -> Dimension:
    """Map a saving propensity to an effective gas dimension.

    ``"full"``: ``D = (1 + 2 lam) / (1 - 2 lam)``; ``"half"``: half of that.
    The Gamma order is ``n = D / 2``. Both are descriptive only; simulated
    Gamma exponents are not asserted against them.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam!r}")
    if formula not in ("full", "half"):
        raise ValueError(f"formula must be 'full' or 'half', got {formula!r}")
    if lam == 0.5:
        raise ZeroDivisionError("effective dimension is singular at lambda = 1/2")
    D = (1.0 + 2.0 * lam) / (1.0 - 2.0 * lam)
    if formula == "half":
        D /= 2.0
    return Dimension(D, D / 2.0)


def fit_family(samples, family: str) -> FitResult:
    """Dispatch by family name; ``auto`` is piecewise with a log-normal bulk."""
    fitters = {
        EXPONENTIAL: fit_exponential,
        GAMMA: fit_gamma,
        LOGNORMAL: fit_lognormal,
        POWERLAW: fit_powerlaw_tail,
        PIECEWISE: fit_piecewise,
        "auto": fit_piecewise,
    }
    if family not in fitters:
        raise FitError(family, f"unknown family; choose from {sorted(fitters)}")
    return fitters[family](samples)
