"""Command-line front end.

Subcommands::

    pbgfid solve     one model, both stationary solvers, steady-state averages
    pbgfid cmf       analytic and simulated older-pair CMF
    pbgfid simulate  one simulation run: distributions and averages
    pbgfid sweep     averages over a range of link lengths, PBG and baseline

Exit status: 0 success, 2 usage error, 3 invalid parameters, 4 solver or
simulation failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .dtmc import (
    build_transition_matrix,
    observables,
    older_pair_distribution,
    steady_state_full,
    steady_state_reduced,
)
from .errors import ModelError, SolverError
from .physics import SPEED_OF_LIGHT, DiscreteModel, PhysicalConfig, derive_discrete_model
from .sim import (
    PolicyKind,
    SimConfig,
    empirical_distribution,
    empirical_newer_distribution,
    empirical_observables,
    simulate,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID = 3
EXIT_FAILED = 4

COMMANDS = ("solve", "simulate", "sweep", "cmf")

SOLVE_FIELDS = [
    "distance_km", "p_g", "alpha", "N", "n_states", "mean_f1", "mean_f2", "mean_pairs",
    "max_solver_diff", "residual_full", "residual_reduced",
]
CMF_FIELDS = ["fidelity_level", "analytic_cmf", "empirical_cmf"]
SIMULATE_FIELDS = [
    "fidelity_level", "older_pmf", "older_cmf", "newer_pmf", "newer_cmf",
    "mean_f1", "mean_f2", "mean_pairs",
]
SWEEP_FIELDS = [
    "distance_km", "p_g", "alpha", "N",
    "f1_pur_analytic", "f2_pur_analytic", "pairs_pur_analytic",
    "f1_pur_sim", "f2_pur_sim", "pairs_pur_sim",
    "f1_nopur_sim", "f2_nopur_sim", "pairs_nopur_sim",
]
FIELDS = {"solve": SOLVE_FIELDS, "cmf": CMF_FIELDS, "simulate": SIMULATE_FIELDS, "sweep": SWEEP_FIELDS}


class ValidationError(Exception):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class RunSpec:
    command: str
    length_km: float = 15.0
    attenuation: float = 0.15
    attenuation_units: str = "natural"
    decoherence_time: float = 1e-3
    signal_speed: float = SPEED_OF_LIGHT
    f0: float = 1.0
    f_eps: float = 0.55
    gen_prob: float | None = None
    rounding: str = "ceil"
    from_km: float = 4.0
    to_km: float = 30.0
    step_km: float = 2.0
    slots: int = 2_000_000
    warmup: int = 100_000
    seed: int = 1
    policy: str = "pbg"
    format: str = "csv"
    output: str | None = None
    workers: int = 1

    def physical(self, length_km: float | None = None) -> PhysicalConfig:
        return PhysicalConfig(
            link_length=self.length_km if length_km is None else length_km,
            attenuation=self.attenuation,
            attenuation_units=self.attenuation_units,
            decoherence_time=self.decoherence_time,
            signal_speed=self.signal_speed,
            initial_fidelity=self.f0,
            threshold_fidelity=self.f_eps,
        )

    def model(self, length_km: float | None = None) -> DiscreteModel:
        model = derive_discrete_model(self.physical(length_km), self.rounding)
        if self.gen_prob is not None:
            model = replace(model, gen_prob=self.gen_prob)
        return model

    def distances(self) -> list[float]:
        count = int(math.floor((self.to_km - self.from_km) / self.step_km + 1e-9)) + 1
        return [round(self.from_km + k * self.step_km, 12) for k in range(count)]

    def sim_config(self, model: DiscreteModel, policy: PolicyKind, seed: int) -> SimConfig:
        return SimConfig(model, policy, self.slots + self.warmup, self.warmup, seed)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pbgfid",
        description="Fidelity distribution of stored EPR pairs under purification beyond generation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    phys = argparse.ArgumentParser(add_help=False)
    g = phys.add_argument_group("link")
    g.add_argument("--attenuation", type=float, default=0.15, help="per-km attenuation (default 0.15)")
    g.add_argument("--attenuation-units", choices=["natural", "decibel"], default="natural")
    g.add_argument("--decoherence-time", type=float, default=1e-3, help="seconds (default 1e-3)")
    g.add_argument("--signal-speed", type=float, default=SPEED_OF_LIGHT, help="m/s (default 3e8)")
    g.add_argument("--f0", type=float, default=1.0, help="fidelity of a fresh pair")
    g.add_argument("--f-eps", type=float, default=0.55, help="lowest tracked fidelity")
    g.add_argument("--gen-prob", type=float, default=None,
                   help="override the generation probability derived from attenuation")
    g.add_argument("--rounding", choices=["ceil", "floor"], default="ceil",
                   help="purified fidelity to age mapping (default ceil)")

    length = argparse.ArgumentParser(add_help=False)
    length.add_argument("--length-km", type=float, default=15.0)

    sim = argparse.ArgumentParser(add_help=False)
    g = sim.add_argument_group("simulation")
    g.add_argument("--slots", type=int, default=2_000_000, help="recorded slots per run")
    g.add_argument("--warmup", type=int, default=100_000, help="discarded initial slots")
    g.add_argument("--seed", type=int, default=1)

    out = argparse.ArgumentParser(add_help=False)
    g = out.add_argument_group("output")
    g.add_argument("--format", choices=["csv", "json"], default="csv")
    g.add_argument("--output", "-o", default=None, help="file path (default stdout)")

    sub.add_parser("solve", parents=[phys, length, out], help="stationary averages of one link")
    sub.add_parser("cmf", parents=[phys, length, sim, out], help="analytic vs simulated CMF")
    p = sub.add_parser("simulate", parents=[phys, length, sim, out], help="one simulation run")
    p.add_argument("--policy", choices=["pbg", "replace-oldest"], default="pbg")
    p = sub.add_parser("sweep", parents=[phys, sim, out], help="averages over link lengths")
    p.add_argument("--from-km", type=float, default=4.0)
    p.add_argument("--to-km", type=float, default=30.0)
    p.add_argument("--step-km", type=float, default=2.0)
    p.add_argument("--workers", type=int, default=1)
    return parser


def parse_args(argv: list[str] | None = None) -> RunSpec:
    """Build a validated :class:`RunSpec`.

    Raises ``SystemExit(2)`` on malformed arguments and :class:`ValidationError`
    listing every violated parameter constraint.
    """
    ns = _build_parser().parse_args(argv)
    kwargs = {k: v for k, v in vars(ns).items() if k in RunSpec.__dataclass_fields__}
    spec = RunSpec(**kwargs)
    problems = _validate(spec)
    if problems:
        raise ValidationError(problems)
    return spec


def _validate(spec: RunSpec) -> list[str]:
    problems = []
    if spec.command == "sweep":
        if not spec.step_km > 0:
            problems.append(f"--step-km must be positive, got {spec.step_km}")
        if not spec.from_km <= spec.to_km:
            problems.append(f"--from-km ({spec.from_km}) must not exceed --to-km ({spec.to_km})")
        if spec.workers < 1:
            problems.append(f"--workers must be >= 1, got {spec.workers}")
        lengths = [spec.from_km, spec.to_km]
    else:
        lengths = [spec.length_km]
    if spec.command != "solve":
        if spec.slots < 1:
            problems.append(f"--slots must be >= 1, got {spec.slots}")
        if spec.warmup < 0:
            problems.append(f"--warmup must be >= 0, got {spec.warmup}")
        if not 0 <= spec.seed < 2**64:
            problems.append(f"--seed must be an unsigned 64-bit integer, got {spec.seed}")
    if spec.gen_prob is not None and not 0 < spec.gen_prob < 1:
        problems.append(f"--gen-prob must lie in (0, 1), got {spec.gen_prob}")
    for length in lengths:
        try:
            spec.model(length)
        except ModelError as exc:
            problems.extend(p for p in exc.problems if p not in problems)
    return problems


def _child_seed(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def _solve_rows(spec: RunSpec) -> list[dict]:
    model = spec.model()
    q = build_transition_matrix(model)
    full = steady_state_full(q)
    reduced = steady_state_reduced(model)
    obs = observables(reduced, model)
    return [{
        "distance_km": spec.length_km,
        "p_g": model.gen_prob,
        "alpha": model.alpha,
        "N": model.max_age,
        "n_states": len(q.space),
        "mean_f1": obs.mean_f1,
        "mean_f2": obs.mean_f2,
        "mean_pairs": obs.mean_pairs,
        "max_solver_diff": float(np.max(np.abs(full.p - reduced.p))),
        "residual_full": full.residual(q),
        "residual_reduced": reduced.residual(q),
    }]


def _cmf_rows(spec: RunSpec) -> list[dict]:
    model = spec.model()
    analytic = older_pair_distribution(steady_state_reduced(model), model)
    stats = simulate(spec.sim_config(model, PolicyKind.PURIFY_BEYOND_GENERATION, spec.seed))
    empirical = empirical_distribution(stats, model)
    return [
        {"fidelity_level": f, "analytic_cmf": a, "empirical_cmf": e}
        for f, a, e in zip(analytic.levels, analytic.cmf, empirical.cmf)
    ]


def _simulate_rows(spec: RunSpec) -> list[dict]:
    model = spec.model()
    stats = simulate(spec.sim_config(model, PolicyKind.parse(spec.policy), spec.seed))
    older = empirical_distribution(stats, model)
    obs = empirical_observables(stats, model)
    if stats.pair_slots:
        newer = empirical_newer_distribution(stats, model)
        newer_pmf, newer_cmf = newer.pmf, newer.cmf
    else:
        newer_pmf = newer_cmf = np.zeros_like(older.pmf)
    return [
        {"fidelity_level": f, "older_pmf": op, "older_cmf": oc, "newer_pmf": np_, "newer_cmf": nc,
         "mean_f1": obs.mean_f1, "mean_f2": obs.mean_f2, "mean_pairs": obs.mean_pairs}
        for f, op, oc, np_, nc in zip(older.levels, older.pmf, older.cmf, newer_pmf, newer_cmf)
    ]


def sweep_point(spec: RunSpec, index: int, distance: float) -> dict:
    """One sweep row: analytic PBG averages plus simulated PBG and replace-oldest averages."""
    model = spec.model(distance)
    analytic = observables(steady_state_reduced(model), model)
    row = {"distance_km": distance, "p_g": model.gen_prob, "alpha": model.alpha, "N": model.max_age,
           "f1_pur_analytic": analytic.mean_f1, "f2_pur_analytic": analytic.mean_f2,
           "pairs_pur_analytic": analytic.mean_pairs}
    for tag, policy in (("pur", PolicyKind.PURIFY_BEYOND_GENERATION), ("nopur", PolicyKind.REPLACE_OLDEST)):
        stats = simulate(spec.sim_config(model, policy, _child_seed(spec.seed, index, policy.value)))
        obs = empirical_observables(stats, model)
        row[f"f1_{tag}_sim"] = obs.mean_f1
        row[f"f2_{tag}_sim"] = obs.mean_f2
        row[f"pairs_{tag}_sim"] = obs.mean_pairs
    return row


def _sweep_rows(spec: RunSpec) -> list[dict]:
    distances = spec.distances()
    if spec.workers == 1 or len(distances) == 1:
        return [sweep_point(spec, k, d) for k, d in enumerate(distances)]
    with ProcessPoolExecutor(max_workers=spec.workers) as pool:
        # map preserves input order regardless of completion order
        return list(pool.map(sweep_point, [spec] * len(distances), range(len(distances)), distances))


_RUNNERS = {"solve": _solve_rows, "cmf": _cmf_rows, "simulate": _simulate_rows, "sweep": _sweep_rows}


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".9g")


def _json_value(value):
    if isinstance(value, (int, np.integer)):
        return int(value)
    v = float(format(float(value), ".9g"))
    return v if math.isfinite(v) else None


def render(spec: RunSpec, rows: list[dict]) -> str:
    fields = FIELDS[spec.command]
    if spec.format == "json":
        doc = {
            "spec": asdict(spec),
            "rows": [{k: _json_value(r[k]) for k in fields} for r in rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    for r in rows:
        writer.writerow([_fmt(r[k]) for k in fields])
    return buf.getvalue()


def run(spec: RunSpec) -> tuple[int, str]:
    """Execute ``spec``; returns the exit status and the rendered table (empty on failure)."""
    try:
        rows = _RUNNERS[spec.command](spec)
    except (SolverError, ModelError, ValueError) as exc:
        print(f"pbgfid: {spec.command} failed: {exc}", file=sys.stderr)
        return EXIT_FAILED, ""
    return EXIT_OK, render(spec, rows)


def main(argv: list[str] | None = None) -> int:
    try:
        spec = parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    except ValidationError as exc:
        for problem in exc.problems:
            print(f"pbgfid: invalid parameter: {problem}", file=sys.stderr)
        return EXIT_INVALID
    status, text = run(spec)
    if status == EXIT_OK:
        if spec.output:
            with open(spec.output, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
