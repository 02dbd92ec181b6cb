"""Fit chain parameters to a reference older-pair CMF."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .dtmc import older_pair_distribution, steady_state_reduced
from .physics import DiscreteModel, PhysicalConfig, Rounding, derive_discrete_model


def analytic_cmf(model: DiscreteModel) -> np.ndarray:
    """Older-pair CMF in ascending fidelity order."""
    return older_pair_distribution(steady_state_reduced(model), model).cmf


def cmf_error(model: DiscreteModel, target_cmf) -> float:
    target = np.asarray(target_cmf, dtype=float)
    cmf = analytic_cmf(model)
    if cmf.shape != target.shape:
        raise ValueError(f"target has {target.size} levels, model has {cmf.size}")
    return float(np.max(np.abs(cmf - target)))


def mapping_errors(cfg: PhysicalConfig, target_cmf, rounding: Rounding = "ceil") -> dict[str, float]:
    """Max CMF error of each attenuation-unit mapping of ``cfg``."""
    out = {}
    for units in ("natural", "decibel"):
        model = derive_discrete_model(replace(cfg, attenuation_units=units), rounding)
        out[units] = cmf_error(model, target_cmf)
    return out


@dataclass(frozen=True)
class GenProbFit:
    gen_prob: float
    max_abs_error: float
    model: DiscreteModel


def fit_gen_prob(base: DiscreteModel, target_cmf, bounds=(1e-4, 1 - 1e-4)) -> GenProbFit:
    """Generation probability minimizing the squared CMF error, other parameters fixed."""
    target = np.asarray(target_cmf, dtype=float)

    def sse(pg):
        cmf = analytic_cmf(replace(base, gen_prob=pg))
        return float(np.sum((cmf - target) ** 2))

    # coarse scan first: the objective is not unimodal over the whole interval
    grid = np.linspace(bounds[0], bounds[1], 200)
    k = int(np.argmin([sse(g) for g in grid]))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(sse, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    model = replace(base, gen_prob=float(res.x))
    return GenProbFit(float(res.x), cmf_error(model, target), model)
