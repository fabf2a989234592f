"""Two-agent exchange rules.

Every rule maps a pair of wealths ``(wi, wj)`` plus the random draw(s) of
one trade to the post-trade pair. The raw ``_*`` kernels are numba-compiled
and shared with the simulation loop; the public ``exchange_*`` wrappers add
domain checking.

All rules are written so that

* the pair sum is conserved up to a few rounding errors,
* both outputs are non-negative for admissible inputs, and
* the reduction chain distributed -> uniform -> no-saving holds bit for bit
  (uniform saving *is* distributed saving with equal propensities, and the
  no-saving rule performs the same floating point operations as uniform
  saving at ``lam = 0``).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit


class DomainError(ValueError):
    """An exchange or model parameter lies outside its admissible range."""


class ExchangeOutcome(NamedTuple):
    wi_new: float
    wj_new: float


# --- raw kernels -------------------------------------------------------------
# The released pool is computed once and split as (share, pool - share), so
# the pair sum is conserved to the rounding of the shared intermediates and
# pool - share can never go negative (fl(r * pool) <= pool for r <= 1).


@njit(cache=True, nogil=True)
def _no_saving(wi, wj, r):
    pool = wi + wj
    share = r * pool
    return share, pool - share


@njit(cache=True, nogil=True)
def _distributed_saving(wi, wj, li, lj, r):
    pool = (1.0 - li) * wi + (1.0 - lj) * wj
    share = r * pool
    return li * wi + share, lj * wj + (pool - share)


@njit(cache=True, nogil=True)
def _uniform_saving(wi, wj, lam, r):
    return _distributed_saving(wi, wj, lam, lam, r)


@njit(cache=True, nogil=True)
def _bidirectional(wi, wj, r, q):
    give_i = r * wi
    give_j = q * wj
    return give_i + give_j, (wi - give_i) + (wj - give_j)


# --- checked public surface --------------------------------------------------


def _check_wealth(wi, wj):
    if not (wi >= 0.0 and wj >= 0.0):
        raise DomainError(f"wealth must be non-negative, got wi={wi!r}, wj={wj!r}")


def _check_unit(name, value, upper_open=False):
    ok = 0.0 <= value < 1.0 if upper_open else 0.0 <= value <= 1.0
    if not ok:
        interval = "[0, 1)" if upper_open else "[0, 1]"
        raise DomainError(f"{name} must lie in {interval}, got {value!r}")


def exchange_no_saving(wi: float, wj: float, r: float) -> ExchangeOutcome:
    """Pool both wealths and split the pool as ``r : 1 - r``."""
    _check_wealth(wi, wj)
    _check_unit("r", r)
    return ExchangeOutcome(*_no_saving(float(wi), float(wj), float(r)))


def exchange_uniform_saving(wi: float, wj: float, lam: float, r: float) -> ExchangeOutcome:
    """Both agents keep a fraction ``lam`` and trade the rest.

    ``lam = 1`` freezes the market (identity); ``lam = 0`` is the no-saving rule.
    """
    _check_wealth(wi, wj)
    _check_unit("lambda", lam)
    _check_unit("r", r)
    return ExchangeOutcome(*_uniform_saving(float(wi), float(wj), float(lam), float(r)))


def exchange_distributed_saving(
    wi: float, wj: float, li: float, lj: float, r: float
) -> ExchangeOutcome:
    """Each agent keeps its own fraction; the released pool is split by ``r``."""
    _check_wealth(wi, wj)
    _check_unit("li", li, upper_open=True)
    _check_unit("lj", lj, upper_open=True)
    _check_unit("r", r)
    return ExchangeOutcome(
        *_distributed_saving(float(wi), float(wj), float(li), float(lj), float(r))
    )


def exchange_bidirectional(wi: float, wj: float, r: float, q: float) -> ExchangeOutcome:
    """Agent i keeps ``r`` of its own wealth and receives ``q`` of j's."""
    _check_wealth(wi, wj)
    _check_unit("r", r)
    _check_unit("q", q)
    return ExchangeOutcome(*_bidirectional(float(wi), float(wj), float(r), float(q)))


# --- model description -------------------------------------------------------


class Variant(enum.Enum):
    NO_SAVING = "no_saving"
    UNIFORM_SAVING = "uniform_saving"
    DISTRIBUTED_SAVING = "distributed_saving"
    BIDIRECTIONAL = "bidirectional"


# integer tags used inside compiled loops
KERNEL_CODES = {
    Variant.NO_SAVING: 0,
    Variant.UNIFORM_SAVING: 1,
    Variant.DISTRIBUTED_SAVING: 2,
    Variant.BIDIRECTIONAL: 3,
}


@dataclass(frozen=True)
class LambdaLaw:
    """Distribution of per-agent saving propensities.

    ``kind`` is ``"delta"`` (every agent gets ``lo == hi``) or ``"uniform"``
    (``lambda_i ~ U[lo, hi)``). ``hi`` must stay below 1: an agent with
    ``lambda = 1`` never releases wealth.
    """

    kind: str
    lo: float
    hi: float

    def __post_init__(self):
        if self.kind not in ("delta", "uniform"):
            raise DomainError(f"unknown lambda law kind {self.kind!r}")
        if not (0.0 <= self.lo <= self.hi < 1.0):
            raise DomainError(
                f"lambda law bounds need 0 <= lo <= hi < 1, got lo={self.lo!r}, hi={self.hi!r}"
            )
        if self.kind == "delta" and self.lo != self.hi:
            raise DomainError("delta lambda law needs lo == hi")

    @classmethod
    def delta(cls, lam: float) -> "LambdaLaw":
        return cls("delta", lam, lam)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "LambdaLaw":
        return cls("uniform", lo, hi)

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        """Map uniform draws in [0, 1) onto propensities."""
        if self.kind == "delta":
            return np.full(np.shape(u), self.lo)
        lam = self.lo + (self.hi - self.lo) * np.asarray(u, dtype=float)
        # rounding can land exactly on hi; keep the half-open range
        return np.minimum(lam, np.nextafter(self.hi, 0.0)) if self.hi > self.lo else lam

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class ModelSpec:
    variant: Variant
    lam: float | None = None
    lambda_law: LambdaLaw | None = None

    def __post_init__(self):
        if self.variant is Variant.UNIFORM_SAVING:
            if self.lam is None:
                raise DomainError("uniform saving needs lambda")
            _check_unit("lambda", self.lam)
        elif self.lam is not None:
            raise DomainError(f"{self.variant.value} carries no lambda")
        if self.variant is Variant.DISTRIBUTED_SAVING:
            if not isinstance(self.lambda_law, LambdaLaw):
                raise DomainError("distributed saving needs a LambdaLaw")
        elif self.lambda_law is not None:
            raise DomainError(f"{self.variant.value} carries no lambda law")

    @classmethod
    def no_saving(cls) -> "ModelSpec":
        return cls(Variant.NO_SAVING)

    @classmethod
    def uniform_saving(cls, lam: float) -> "ModelSpec":
        return cls(Variant.UNIFORM_SAVING, lam=float(lam))

    @classmethod
    def distributed_saving(cls, law: LambdaLaw) -> "ModelSpec":
        return cls(Variant.DISTRIBUTED_SAVING, lambda_law=law)

    @classmethod
    def bidirectional(cls) -> "ModelSpec":
        return cls(Variant.BIDIRECTIONAL)

    @property
    def code(self) -> int:
        return KERNEL_CODES[self.variant]

    def to_dict(self) -> dict:
        out: dict = {"variant": self.variant.value}
        if self.lam is not None:
            out["lambda"] = self.lam
        if self.lambda_law is not None:
            out["lambda_law"] = self.lambda_law.to_dict()
        return out
