"""Monte Carlo driver for kinetic exchange markets.

One *exchange* picks a random pair of distinct agents and applies the
model's kernel. One *MC step* is ``N`` exchanges. A realization

1. initializes the population,
2. runs MC steps in checkpoint windows until the wealth histogram of two
   successive windows agrees to within ``ks_tolerance`` for
   ``consecutive_passes`` checkpoints in a row (or ``max_steps`` is hit),
3. pools the full wealth vector after each of ``sample_steps`` further MC steps.

Random numbers come from numpy's PCG64, seeded by
``SeedSequence(master_seed, spawn_key=(realization_index,))``; a realization
is therefore replayable bit for bit from its seed and index alone.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .kernels import _bidirectional, _distributed_saving, _no_saving, _uniform_saving
from .kernels import ModelSpec, Variant
from .stats import Histogram, Logarithmic, build_histogram, histogram_ks

log = logging.getLogger(__name__)

INITS = ("uniform_equal", "random_uniform")
# exchanges drawn per RNG batch; part of the replay contract
CHUNK = 1 << 16


class ConfigError(ValueError):
    """Invalid simulation setting; the message names the offending key."""


@dataclass(frozen=True)
class EquilibrationPolicy:
    checkpoint_interval: int = 100
    ks_tolerance: float = 0.01
    consecutive_passes: int = 3
    max_steps: int = 20_000

    def __post_init__(self):
        if self.checkpoint_interval < 1:
            raise ConfigError("equilibration.checkpoint_interval must be a positive integer")
        if not 0.0 < self.ks_tolerance < 1.0:
            raise ConfigError("equilibration.ks_tolerance must lie in (0, 1)")
        if self.consecutive_passes < 1:
            raise ConfigError("equilibration.consecutive_passes must be a positive integer")
        if self.max_steps < self.checkpoint_interval:
            raise ConfigError("equilibration.max_steps must be >= equilibration.checkpoint_interval")


@dataclass(frozen=True)
class SimulationConfig:
    n_agents: int
    total_wealth: float | None = None  # defaults to n_agents (unit mean wealth)
    init: str = "uniform_equal"
    equilibration: EquilibrationPolicy = field(default_factory=EquilibrationPolicy)
    sample_steps: int = 100
    realizations: int = 100
    master_seed: int = 0

    def __post_init__(self):
        if not isinstance(self.n_agents, (int, np.integer)) or self.n_agents < 2:
            raise ConfigError("n_agents must be an integer >= 2")
        if self.total_wealth is None:
            object.__setattr__(self, "total_wealth", float(self.n_agents))
        if not self.total_wealth > 0:
            raise ConfigError("total_wealth must be positive")
        if self.init not in INITS:
            raise ConfigError(f"init must be one of {INITS}, got {self.init!r}")
        if self.sample_steps < 1:
            raise ConfigError("sample_steps must be >= 1")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def mean_wealth(self) -> float:
        return self.total_wealth / self.n_agents

    def to_dict(self) -> dict:
        eq = self.equilibration
        return {
            "n_agents": int(self.n_agents),
            "total_wealth": self.total_wealth,
            "init": self.init,
            "equilibration": {
                "checkpoint_interval": eq.checkpoint_interval,
                "ks_tolerance": eq.ks_tolerance,
                "consecutive_passes": eq.consecutive_passes,
                "max_steps": eq.max_steps,
            },
            "sample_steps": self.sample_steps,
            "realizations": self.realizations,
            "seed": int(self.master_seed),
        }


class RandomStream:
    """Deterministic draws for one realization."""

    def __init__(self, master_seed: int, index: int = 0):
        self.master_seed = int(master_seed)
        self.index = int(index)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.index,))
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def uniform(self, size):
        return self.generator.random(size)

    def pairs(self, n: int, size: int):
        """Uniform pairs of distinct indices: ``j = i + offset (mod n)``, offset in [1, n)."""
        i = self.generator.integers(0, n, size)
        off = self.generator.integers(1, n, size)
        return i, (i + off) % n


@dataclass
class AgentPopulation:
    wealth: np.ndarray
    lambdas: np.ndarray | None
    total: float
    exchanges: int = 0

    def __post_init__(self):
        self.wealth = np.ascontiguousarray(self.wealth, dtype=float)
        if self.wealth.ndim != 1 or self.wealth.size < 2:
            raise ValueError("a population needs at least two agents")
        if np.any(self.wealth < 0):
            raise ValueError("wealth must be non-negative")
        if self.lambdas is not None:
            self.lambdas = np.ascontiguousarray(self.lambdas, dtype=float)
            if self.lambdas.shape != self.wealth.shape:
                raise ValueError("lambdas must match wealth in length")

    @property
    def n(self) -> int:
        return self.wealth.size

    def drift(self) -> float:
        """Relative deviation of the current sum from the conserved total."""
        return abs(float(self.wealth.sum()) - self.total) / self.total


def init_population(config: SimulationConfig, model: ModelSpec, rng: RandomStream) -> AgentPopulation:
    n, total = config.n_agents, config.total_wealth
    if config.init == "uniform_equal":
        wealth = np.full(n, total / n)
    else:
        raw = rng.uniform(n)
        wealth = raw * (total / raw.sum())
    lambdas = None
    if model.variant is Variant.DISTRIBUTED_SAVING:
        lambdas = model.lambda_law.from_unit(rng.uniform(n))
    return AgentPopulation(wealth, lambdas, float(total))


@njit(cache=True, nogil=True)
def _apply_exchanges(code, wealth, lambdas, lam, i, j, r, q):
    for k in range(i.size):
        a = i[k]
        b = j[k]
        wa = wealth[a]
        wb = wealth[b]
        if code == 0:
            na, nb = _no_saving(wa, wb, r[k])
        elif code == 1:
            na, nb = _uniform_saving(wa, wb, lam, r[k])
        elif code == 2:
            na, nb = _distributed_saving(wa, wb, lambdas[a], lambdas[b], r[k])
        else:
            na, nb = _bidirectional(wa, wb, r[k], q[k])
        wealth[a] = na
        wealth[b] = nb


_EMPTY = np.empty(0)


def sweep_exchanges(pop: AgentPopulation, model: ModelSpec, rng: RandomStream, count: int) -> AgentPopulation:
    """Apply ``count`` random pairwise exchanges to ``pop`` in place."""
    code = model.code
    lam = model.lam if model.lam is not None else 0.0
    lambdas = pop.lambdas if pop.lambdas is not None else _EMPTY
    if code == 2 and pop.lambdas is None:
        raise ValueError("distributed saving needs per-agent lambdas")
    done = 0
    while done < count:
        c = min(CHUNK, count - done)
        i, j = rng.pairs(pop.n, c)
        r = rng.uniform(c)
        q = rng.uniform(c) if code == 3 else r
        _apply_exchanges(code, pop.wealth, lambdas, lam, i, j, r, q)
        done += c
    pop.exchanges += count
    return pop


def mc_step(pop: AgentPopulation, model: ModelSpec, rng: RandomStream) -> AgentPopulation:
    return sweep_exchanges(pop, model, rng, pop.n)


def detect_equilibrium(prev_hist: Histogram, curr_hist: Histogram, policy: EquilibrationPolicy,
                       passes: int = 0):
    """Update the run of consecutive stable checkpoints.

    Returns ``(converged, passes)``. A checkpoint passes when the histogram
    KS distance to the previous one is at most ``ks_tolerance``; any failing
    checkpoint resets the run.
    """
    d = histogram_ks(prev_hist, curr_hist)
    passes = passes + 1 if d <= policy.ks_tolerance else 0
    return passes >= policy.consecutive_passes, passes


def detection_edges(config: SimulationConfig, n_bins: int = 64) -> np.ndarray:
    """Fixed log-spaced edges from 1e-3 of the mean up to (just above) W."""
    lo = 1e-3 * config.mean_wealth
    hi = float(np.nextafter(config.total_wealth, np.inf))
    return Logarithmic(n_bins, lo, hi).edges(np.array([lo]))


@dataclass
class RealizationResult:
    index: int
    samples: np.ndarray
    converged: bool
    equilibration_steps: int
    ks_history: list
    max_drift: float
    lambdas: np.ndarray | None = None

    def summary(self) -> dict:
        return {
            "index": self.index,
            "mean": float(self.samples.mean()),
            "variance": float(self.samples.var()),
            "converged": self.converged,
            "equilibration_steps": self.equilibration_steps,
            "final_ks": self.ks_history[-1] if self.ks_history else None,
            "max_drift": self.max_drift,
        }


def run_realization(config: SimulationConfig, model: ModelSpec, realization_index: int = 0) -> RealizationResult:
    policy = config.equilibration
    rng = RandomStream(config.master_seed, realization_index)
    pop = init_population(config, model, rng)
    edges = detection_edges(config)

    steps, passes, converged = 0, 0, False
    prev = None
    ks_history = []
    max_drift = 0.0
    while steps < policy.max_steps and not converged:
        width = min(policy.checkpoint_interval, policy.max_steps - steps)
        window = np.empty((width, pop.n))
        for t in range(width):
            mc_step(pop, model, rng)
            window[t] = pop.wealth
        steps += width
        max_drift = max(max_drift, pop.drift())
        hist = build_histogram(window, edges=edges)
        if prev is not None:
            ks_history.append(histogram_ks(prev, hist))
            converged, passes = detect_equilibrium(prev, hist, policy, passes)
        prev = hist
    if not converged:
        log.warning("realization %d did not equilibrate within %d MC steps", realization_index, steps)

    samples = np.empty((config.sample_steps, pop.n))
    for t in range(config.sample_steps):
        mc_step(pop, model, rng)
        samples[t] = pop.wealth
    max_drift = max(max_drift, pop.drift())
    return RealizationResult(
        realization_index, samples.ravel(), converged, steps, ks_history, max_drift,
        None if pop.lambdas is None else pop.lambdas.copy(),
    )


@dataclass
class EnsembleResult:
    samples: np.ndarray
    realizations: list

    @property
    def converged(self) -> bool:
        return all(r["converged"] for r in self.realizations)

    @property
    def max_drift(self) -> float:
        return max(r["max_drift"] for r in self.realizations)


def ensemble_run(config: SimulationConfig, model: ModelSpec, workers: int = 1) -> EnsembleResult:
    """Run all realizations and merge them in index order.

    Realizations share no state, so ``workers > 1`` runs them on a thread
    pool (the compiled exchange loop releases the GIL); the merged result is
    identical for any worker count.
    """
    indices = range(config.realizations)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda k: run_realization(config, model, k), indices))
    else:
        results = [run_realization(config, model, k) for k in indices]
    samples = np.concatenate([r.samples for r in results])
    return EnsembleResult(samples, [r.summary() for r in results])


def appendix_protocol(master_seed: int = 0) -> tuple[SimulationConfig, ModelSpec]:
    """N=200 no-saving market with a budget of 50 000 exchanges (250 MC steps).

    The first 50 MC steps are equilibration (two 25-step windows compared
    once); the remaining 200 MC steps are pooled.
    """
    policy = EquilibrationPolicy(checkpoint_interval=25, ks_tolerance=0.05,
                                 consecutive_passes=1, max_steps=50)
    config = SimulationConfig(n_agents=200, equilibration=policy, sample_steps=200,
                              realizations=1, master_seed=master_seed)
    return config, ModelSpec.no_saving()


def with_seed(config: SimulationConfig, seed: int) -> SimulationConfig:
    return replace(config, master_seed=seed)
