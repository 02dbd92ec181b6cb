"""Closed-form link physics: decoherence, purification and fidelity discretization.

A stored EPR pair decays towards fidelity 1/2 with time constant ``t_c``.
Time is slotted (one generation attempt per slot, ``dt = l / c``), so the
fidelity of a pair is fully described by its *age* in slots.  Purification
of two stored pairs yields a pair whose fidelity is mapped back onto the
age lattice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np

from .errors import ModelError

SPEED_OF_LIGHT = 3.0e8
SNAP_TOL = 1e-9

Rounding = Literal["ceil", "floor"]
AttenuationUnits = Literal["natural", "decibel"]


@dataclass(frozen=True)
class PhysicalConfig:
    """Raw link parameters.

    Parameters
    ----------
    link_length : float
        Fiber length in kilometers.
    attenuation : float
        Per-kilometer attenuation coefficient.
    attenuation_units : {"natural", "decibel"}
        ``natural`` gives ``p_g = exp(-attenuation * l)``, ``decibel`` gives
        ``p_g = 10 ** (-attenuation * l / 10)``.
    decoherence_time : float
        Memory decoherence time ``t_c`` in seconds.
    signal_speed : float
        Propagation speed in m/s used for the slot duration.
    initial_fidelity, threshold_fidelity : float
        Fidelity of a fresh pair and the lowest tracked fidelity.
    """

    link_length: float
    attenuation: float = 0.15
    attenuation_units: AttenuationUnits = "natural"
    decoherence_time: float = 1e-3
    signal_speed: float = SPEED_OF_LIGHT
    initial_fidelity: float = 1.0
    threshold_fidelity: float = 0.55

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ModelError(problems)

    def violations(self) -> list[str]:
        out = []
        for name in ("link_length", "attenuation", "decoherence_time", "signal_speed"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                out.append(f"{name} must be a finite positive number, got {value!r}")
        if self.attenuation_units not in ("natural", "decibel"):
            out.append(f"attenuation_units must be 'natural' or 'decibel', got {self.attenuation_units!r}")
        f0, feps = self.initial_fidelity, self.threshold_fidelity
        if not 0.5 < f0 <= 1.0:
            out.append(f"initial_fidelity must lie in (0.5, 1], got {f0!r}")
        if not 0.5 < feps:
            out.append(f"threshold_fidelity must exceed 0.5, got {feps!r}")
        elif not feps < f0:
            out.append(f"threshold_fidelity must be below initial_fidelity ({f0!r}), got {feps!r}")
        return out

    @property
    def slot_duration(self) -> float:
        """Seconds per generation attempt, ``l / c`` with ``l`` in meters."""
        return self.link_length * 1e3 / self.signal_speed

    @property
    def gen_prob(self) -> float:
        loss = self.attenuation * self.link_length
        if self.attenuation_units == "natural":
            return math.exp(-loss)
        return 10.0 ** (-loss / 10.0)


def _snap(x):
    """Snap values within SNAP_TOL of an integer onto it (scalar or array)."""
    r = np.rint(x)
    return np.where(np.abs(x - r) <= SNAP_TOL, r, x)


def _to_age(x, rounding: Rounding):
    x = _snap(x)
    if rounding == "ceil":
        return np.ceil(x)
    return np.floor(x)


def age_for_fidelity(f, f0: float, alpha: float, rounding: Rounding = "ceil"):
    """Map fidelity ``f`` to an integer age, clamped at 0 from below.

    Inverse of the discrete decay law, rounded with ``rounding``.
    """
    x = (-1.0 / alpha) * np.log((2.0 * np.asarray(f, dtype=float) - 1.0) / (2.0 * f0 - 1.0))
    age = np.maximum(_to_age(x, rounding), 0).astype(np.int64)
    return int(age) if age.ndim == 0 else age


def max_age(alpha: float, f0: float, feps: float) -> int:
    return int(np.ceil(_snap((-1.0 / alpha) * math.log((2 * feps - 1) / (2 * f0 - 1)))))


@dataclass(frozen=True, eq=False)
class DiscreteModel:
    """Parameters of the slotted age chain.

    Build with :func:`derive_discrete_model` or :meth:`from_params`; the
    latter lets ``gen_prob`` and ``alpha`` be set directly.

    ``rounding`` selects how a purified fidelity is mapped back to an age:
    ``"ceil"`` (default) rounds towards the older age, so the lattice
    fidelity lower-bounds the true purified one; ``"floor"`` rounds towards
    the younger age.
    """

    gen_prob: float
    alpha: float
    max_age: int
    initial_fidelity: float
    threshold_fidelity: float
    slot_duration: float = float("nan")
    rounding: Rounding = "ceil"
    level_table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (0.0 < self.gen_prob <= 1.0):
            raise ModelError(f"gen_prob must lie in (0, 1], got {self.gen_prob!r}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ModelError(f"alpha must be a finite positive number, got {self.alpha!r}")
        if self.max_age < 1:
            raise ModelError(
                f"max_age must be >= 1, got {self.max_age}; threshold fidelity too close to "
                "initial fidelity for this decoherence per slot"
            )
        if not 0.5 < self.initial_fidelity <= 1.0:
            raise ModelError(f"initial_fidelity must lie in (0.5, 1], got {self.initial_fidelity!r}")
        if self.rounding not in ("ceil", "floor"):
            raise ModelError(f"rounding must be 'ceil' or 'floor', got {self.rounding!r}")
        ages = np.arange(self.max_age + 1)
        table = 0.5 * (1.0 + (2.0 * self.initial_fidelity - 1.0) * np.exp(-self.alpha * ages))
        table.setflags(write=False)
        object.__setattr__(self, "level_table", table)

    @classmethod
    def from_params(
        cls,
        gen_prob: float,
        alpha: float,
        initial_fidelity: float = 1.0,
        threshold_fidelity: float = 0.55,
        rounding: Rounding = "ceil",
        slot_duration: float = float("nan"),
    ) -> DiscreteModel:
        if not 0.5 < threshold_fidelity < initial_fidelity <= 1.0:
            raise ModelError(
                "need 0.5 < threshold_fidelity < initial_fidelity <= 1, got "
                f"{threshold_fidelity!r}, {initial_fidelity!r}"
            )
        if not alpha > 0:
            raise ModelError(f"alpha must be positive, got {alpha!r}")
        n = max_age(alpha, initial_fidelity, threshold_fidelity)
        return cls(
            gen_prob=gen_prob,
            alpha=alpha,
            max_age=n,
            initial_fidelity=initial_fidelity,
            threshold_fidelity=threshold_fidelity,
            slot_duration=slot_duration,
            rounding=rounding,
        )

    @property
    def n_levels(self) -> int:
        return self.max_age + 1

    @cached_property
    def success_table(self) -> np.ndarray:
        """``p_s(level[i], level[j])`` for all age pairs, shape (N+1, N+1)."""
        f = self.level_table
        t = purification_success_prob(f[:, None], f[None, :])
        t.setflags(write=False)
        return t

    @cached_property
    def purified_age_table(self) -> np.ndarray:
        """Purified age for all age pairs, shape (N+1, N+1), int64."""
        f = self.level_table
        fp = purified_fidelity(f[:, None], f[None, :])
        t = age_for_fidelity(fp, self.initial_fidelity, self.alpha, self.rounding)
        t.setflags(write=False)
        return t


def derive_discrete_model(cfg: PhysicalConfig, rounding: Rounding = "ceil") -> DiscreteModel:
    """Slot duration, decoherence per slot, generation probability and max age of a link."""
    dt = cfg.slot_duration
    alpha = dt / cfg.decoherence_time
    pg = cfg.gen_prob
    if not 0.0 < pg < 1.0:
        raise ModelError(f"derived generation probability {pg!r} is not in (0, 1)")
    n = max_age(alpha, cfg.initial_fidelity, cfg.threshold_fidelity)
    if n < 1:
        raise ModelError(
            f"max age is {n}: threshold_fidelity {cfg.threshold_fidelity} is too close to "
            f"initial_fidelity {cfg.initial_fidelity} for alpha={alpha:g}"
        )
    return DiscreteModel(
        gen_prob=pg,
        alpha=alpha,
        max_age=n,
        initial_fidelity=cfg.initial_fidelity,
        threshold_fidelity=cfg.threshold_fidelity,
        slot_duration=dt,
        rounding=rounding,
    )


def continuous_fidelity_decay(f_start: float, elapsed: float, t_c: float) -> float:
    """Fidelity after ``elapsed`` seconds of decoherence starting from ``f_start``."""
    if not 0.5 <= f_start <= 1.0:
        raise ModelError(f"f_start must lie in [0.5, 1], got {f_start!r}")
    if elapsed < 0:
        raise ModelError(f"elapsed must be non-negative, got {elapsed!r}")
    return 0.5 * (1.0 + (2.0 * f_start - 1.0) * math.exp(-elapsed / t_c))


def fidelity_at_age(model: DiscreteModel, age: int) -> float:
    if not 0 <= age <= model.max_age:
        raise ModelError(f"age {age} outside 0..{model.max_age}")
    return 0.5 * (1.0 + (2.0 * model.initial_fidelity - 1.0) * math.exp(-model.alpha * age))


def _check_unit(name, x, lo_open):
    arr = np.asarray(x, dtype=float)
    bad = (arr <= 0.0) | (arr > 1.0) if lo_open else (arr < 0.0) | (arr > 1.0)
    if np.any(bad) or np.any(np.isnan(arr)):
        interval = "(0, 1]" if lo_open else "[0, 1]"
        raise ModelError(f"{name} must lie in {interval}, got {x!r}")


def purified_fidelity(f1, f2):
    """Fidelity of the pair kept after a successful purification. Broadcasts."""
    _check_unit("f1", f1, True)
    _check_unit("f2", f2, True)
    num = np.multiply(f1, f2)
    out = num / (num + np.multiply(np.subtract(1.0, f1), np.subtract(1.0, f2)))
    return float(out) if np.ndim(out) == 0 else out


def purification_success_prob(f1, f2):
    """Probability that purifying pairs of fidelity ``f1`` and ``f2`` succeeds. Broadcasts."""
    _check_unit("f1", f1, False)
    _check_unit("f2", f2, False)
    out = np.multiply(f1, f2) + np.multiply(np.subtract(1.0, f1), np.subtract(1.0, f2))
    return float(out) if np.ndim(out) == 0 else out


def purified_age(model: DiscreteModel, n1: int, n2: int) -> int:
    """Age on the lattice assigned to the pair obtained by purifying ages ``n1`` and ``n2``."""
    n = model.max_age
    if not (0 <= n1 <= n and 0 <= n2 <= n):
        raise ModelError(f"ages ({n1}, {n2}) outside 0..{n}")
    lv = model.level_table
    fp = purified_fidelity(lv[n1], lv[n2])
    return age_for_fidelity(fp, model.initial_fidelity, model.alpha, model.rounding)
