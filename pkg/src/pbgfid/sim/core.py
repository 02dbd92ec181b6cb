"""Seeded slot-level Monte Carlo simulation of the two-memory link.

Randomness comes from numpy's PCG64 generator seeded with
``np.random.default_rng(seed)``.  Every slot consumes exactly two uniforms
drawn as rows of ``rng.random((chunk, 2))``: column 0 decides generation,
column 1 decides purification success.  The compiled kernel and the
Python fallback read the same stream, so results do not depend on the
backend.
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

import numpy as np

from ..dtmc import FidelityDistribution, LinkState, Observables, StateSpace
from ..physics import DiscreteModel
from . import _fallback

try:
    from . import _kernel
except ImportError:  # extension not built
    _kernel = None

CHUNK = 1 << 16

_KERNELS = {"python": _fallback}
if _kernel is not None:
    _KERNELS["cython"] = _kernel

if os.environ.get("PBGFID_PURE_PYTHON") or _kernel is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def available_backends() -> list[str]:
    return sorted(_KERNELS)


def _kernel_for(backend: str | None):
    name = backend or BACKEND
    try:
        return _KERNELS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available, have {available_backends()}") from None


class PolicyKind(enum.Enum):
    """What happens when a pair is generated into a full memory."""

    PURIFY_BEYOND_GENERATION = 0
    REPLACE_OLDEST = 1

    @classmethod
    def parse(cls, text: str) -> PolicyKind:
        key = text.strip().lower().replace("_", "-")
        aliases = {
            "pbg": cls.PURIFY_BEYOND_GENERATION,
            "purify-beyond-generation": cls.PURIFY_BEYOND_GENERATION,
            "replace-oldest": cls.REPLACE_OLDEST,
            "nopur": cls.REPLACE_OLDEST,
            "no-pur": cls.REPLACE_OLDEST,
        }
        if key not in aliases:
            raise ValueError(f"unknown policy {text!r}")
        return aliases[key]


@dataclass(frozen=True)
class SimConfig:
    model: DiscreteModel
    policy: PolicyKind = PolicyKind.PURIFY_BEYOND_GENERATION
    total_slots: int = 2_100_000
    warmup_slots: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.total_slots < 1:
            raise ValueError(f"total_slots must be >= 1, got {self.total_slots}")
        if not 0 <= self.warmup_slots < self.total_slots:
            raise ValueError(
                f"warmup_slots must satisfy 0 <= warmup < total ({self.total_slots}), "
                f"got {self.warmup_slots}"
            )
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def recorded_slots(self) -> int:
        return self.total_slots - self.warmup_slots


@dataclass(eq=False)
class SimStats:
    """Occupancy and event counters over the recorded slots.

    ``older_counts[j]`` counts slots whose older (or only) pair had age ``j``;
    ``newer_counts[i]`` counts full-memory slots whose younger pair had age ``i``.
    """

    older_counts: np.ndarray
    newer_counts: np.ndarray
    single_slots: int = 0
    pair_slots: int = 0
    generations: int = 0
    attempts: int = 0
    successes: int = 0
    failures: int = 0
    final_state: LinkState | None = field(default=None)

    @classmethod
    def empty(cls, n_levels: int) -> SimStats:
        return cls(np.zeros(n_levels, np.int64), np.zeros(n_levels, np.int64))

    @property
    def recorded(self) -> int:
        return self.single_slots + self.pair_slots

    def counters(self) -> tuple:
        return (self.single_slots, self.pair_slots, self.generations, self.attempts,
                self.successes, self.failures)

    def __eq__(self, other):
        if not isinstance(other, SimStats):
            return NotImplemented
        return (
            np.array_equal(self.older_counts, other.older_counts)
            and np.array_equal(self.newer_counts, other.newer_counts)
            and self.counters() == other.counters()
            and self.final_state == other.final_state
        )

    def __add__(self, other: SimStats) -> SimStats:
        """Pool counters of independent runs; the final state is dropped."""
        return SimStats(
            self.older_counts + other.older_counts,
            self.newer_counts + other.newer_counts,
            *(a + b for a, b in zip(self.counters(), other.counters())),
        )


def _tables(model: DiscreteModel):
    return (
        np.ascontiguousarray(model.success_table, dtype=np.float64),
        np.ascontiguousarray(model.purified_age_table, dtype=np.int64),
    )


def simulate(cfg: SimConfig, backend: str | None = None) -> SimStats:
    """Run one trajectory from a single fresh pair, ``(-inf, 0)``.

    The first ``warmup_slots`` transitions are discarded; occupancy is then
    recorded after each remaining transition.
    """
    kern = _kernel_for(backend)
    model = cfg.model
    n = model.max_age
    ps, pa = _tables(model)
    rng = np.random.default_rng(cfg.seed)
    state = np.zeros(3, np.int64)
    stats = SimStats.empty(model.n_levels)
    counts = np.zeros(6, np.int64)
    policy = cfg.policy.value

    for record, total in ((False, cfg.warmup_slots), (True, cfg.recorded_slots)):
        left = total
        while left:
            take = min(CHUNK, left)
            u = rng.random((take, 2))
            kern.run_chain(state, u, model.gen_prob, ps, pa, n, policy, record,
                           stats.older_counts, stats.newer_counts, counts)
            left -= take

    (stats.single_slots, stats.pair_slots, stats.generations, stats.attempts,
     stats.successes, stats.failures) = (int(c) for c in counts)
    stats.final_state = LinkState(int(state[1]) if state[0] else None, int(state[2]))
    return stats


def _advance_args(state: LinkState):
    return (1, state.i, state.j) if state.is_pair else (0, 0, state.j)


def step(state: LinkState, model: DiscreteModel, policy: PolicyKind,
         rng: np.random.Generator) -> LinkState:
    """Advance one slot. Draws two uniforms from ``rng`` (generation, purification)."""
    u0, u1 = rng.random(2)
    is_pair, i, j = _advance_args(state)
    ps, pa = model.success_table, model.purified_age_table
    dp, di, dj, _ = _fallback.advance(is_pair, i, j, u0, u1, model.gen_prob, ps, pa,
                                      model.max_age, policy.value)
    return LinkState(int(di) if dp else None, int(dj))


def transition_counts(state: LinkState, model: DiscreteModel, policy: PolicyKind,
                      draws: int, seed: int = 0, backend: str | None = None) -> np.ndarray:
    """Histogram over destination state indices of ``draws`` independent single steps."""
    kern = _kernel_for(backend)
    ps, pa = _tables(model)
    rng = np.random.default_rng(seed)
    out = np.empty(draws, np.int64)
    is_pair, i, j = _advance_args(state)
    for lo in range(0, draws, CHUNK):
        u = rng.random((min(CHUNK, draws - lo), 2))
        kern.step_batch(is_pair, i, j, u, model.gen_prob, ps, pa, model.max_age,
                        policy.value, out[lo:lo + len(u)])
    return np.bincount(out, minlength=len(StateSpace(model.max_age)))


def _require_samples(stats: SimStats):
    if stats.recorded == 0:
        raise ValueError("simulation recorded no slots")


def empirical_distribution(stats: SimStats, model: DiscreteModel) -> FidelityDistribution:
    """Older-pair fidelity distribution from occupancy counts."""
    _require_samples(stats)
    return FidelityDistribution.from_age_pmf(model, stats.older_counts / stats.recorded)


def empirical_newer_distribution(stats: SimStats, model: DiscreteModel) -> FidelityDistribution:
    """Younger-pair fidelity distribution, conditioned on a full memory."""
    if stats.pair_slots == 0:
        raise ValueError("simulation never had a full memory")
    return FidelityDistribution.from_age_pmf(model, stats.newer_counts / stats.pair_slots)


def empirical_observables(stats: SimStats, model: DiscreteModel) -> Observables:
    _require_samples(stats)
    lv = model.level_table
    f1 = float(stats.newer_counts @ lv) / stats.pair_slots if stats.pair_slots else float("nan")
    f2 = float(stats.older_counts @ lv) / stats.recorded
    pairs = (stats.single_slots + 2 * stats.pair_slots) / stats.recorded
    return Observables(f1, f2, pairs)
