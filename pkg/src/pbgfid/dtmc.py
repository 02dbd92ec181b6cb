"""Age-pair Markov chain of a two-memory link under purification beyond generation.

States are ordered singles first, then pairs block by block::

    (-inf, 0) ... (-inf, N), (0, 0) ... (0, N), (1, 1) ... (1, N), ..., (N, N)

where ``(-inf, j)`` is a single stored pair of age ``j`` and ``(i, j)`` with
``i <= j`` holds two pairs, ``j`` being the older one.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError
from .physics import DiscreteModel

log = logging.getLogger(__name__)

# above this many states the full solver factorizes sparse instead of dense
DENSE_LIMIT = 4000


@dataclass(frozen=True, slots=True)
class LinkState:
    """Memory occupancy. ``i is None`` means a single stored pair of age ``j``."""

    i: int | None
    j: int

    def __post_init__(self):
        if self.j < 0 or (self.i is not None and not 0 <= self.i <= self.j):
            raise ValueError(f"invalid link state ({self.i}, {self.j})")

    @property
    def is_pair(self) -> bool:
        return self.i is not None

    def __str__(self):
        return f"(-inf,{self.j})" if self.i is None else f"({self.i},{self.j})"


def single(j: int) -> LinkState:
    return LinkState(None, j)


def pair(i: int, j: int) -> LinkState:
    return LinkState(i, j)


def num_states(n: int) -> int:
    return (n + 1) + (n + 1) * (n + 2) // 2


def state_index(n: int, i, j):
    """Dense index of a state; ``i < 0`` encodes a single pair. Vectorizes over ``i, j``."""
    i = np.asarray(i)
    j = np.asarray(j)
    pair_idx = (n + 1) + i * (n + 1) - i * (i - 1) // 2 + (j - i)
    out = np.where(i < 0, j, pair_idx)
    return int(out) if out.ndim == 0 else out


def block_start(n: int, m: int) -> int:
    """Index of the first state of pair block ``m``, i.e. of ``(m, m)``."""
    return (n + 1) + m * (n + 1) - m * (m - 1) // 2


class StateSpace:
    """Canonical enumeration of chain states with O(1) index lookup."""

    def __init__(self, max_age: int):
        if max_age < 1:
            raise ValueError(f"max_age must be >= 1, got {max_age}")
        self.max_age = n = max_age
        firsts = [-1] * (n + 1)
        seconds = list(range(n + 1))
        for i in range(n + 1):
            firsts.extend([i] * (n + 1 - i))
            seconds.extend(range(i, n + 1))
        self.first = np.array(firsts, dtype=np.int64)
        self.second = np.array(seconds, dtype=np.int64)
        self.first.setflags(write=False)
        self.second.setflags(write=False)

    def __len__(self):
        return len(self.first)

    def __iter__(self):
        for i, j in zip(self.first.tolist(), self.second.tolist()):
            yield LinkState(None if i < 0 else i, j)

    def __getitem__(self, k: int) -> LinkState:
        i = int(self.first[k])
        return LinkState(None if i < 0 else i, int(self.second[k]))

    def index(self, state: LinkState) -> int:
        n = self.max_age
        if state.j > n or (state.i is not None and state.i > n):
            raise KeyError(str(state))
        return state_index(n, -1 if state.i is None else state.i, state.j)

    @property
    def states(self) -> list[LinkState]:
        return list(self)

    @property
    def is_pair(self) -> np.ndarray:
        return self.first >= 0

    def single_slice(self) -> slice:
        return slice(0, self.max_age + 1)

    def block_slice(self, m: int) -> slice:
        start = block_start(self.max_age, m)
        return slice(start, start + self.max_age + 1 - m)


def enumerate_states(model: DiscreteModel) -> StateSpace:
    return StateSpace(model.max_age)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic transition matrix, stored in CSR form (at most 3 entries per row)."""

    matrix: sp.csr_matrix
    space: StateSpace
    model: DiscreteModel

    @property
    def shape(self):
        return self.matrix.shape

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def row(self, k: int) -> dict[int, float]:
        lo, hi = self.matrix.indptr[k], self.matrix.indptr[k + 1]
        return dict(zip(self.matrix.indices[lo:hi].tolist(), self.matrix.data[lo:hi].tolist()))


def build_transition_matrix(model: DiscreteModel, space: StateSpace | None = None) -> TransitionMatrix:
    """Forward (ageing, generation into a single memory) and purification transitions."""
    if space is None:
        space = enumerate_states(model)
    n = model.max_age
    pg = model.gen_prob
    ps_tab = model.success_table
    pa_tab = model.purified_age_table

    js = np.arange(n + 1)
    aged = np.minimum(js + 1, n)
    rows = [js, js]
    cols = [aged, state_index(n, 0, aged)]
    vals = [np.full(n + 1, 1.0 - pg), np.full(n + 1, pg)]

    pairs = space.is_pair
    src = np.flatnonzero(pairs)
    i = space.first[pairs]
    j = space.second[pairs]
    ps = ps_tab[i, j]
    rows += [src, src, src]
    cols += [
        state_index(n, np.minimum(i + 1, n), np.minimum(j + 1, n)),
        state_index(n, 0, pa_tab[i, j]),
        np.zeros_like(src),
    ]
    vals += [np.full(len(src), 1.0 - pg), pg * ps, pg * (1.0 - ps)]

    ns = len(space)
    q = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(ns, ns)
    ).tocsr()
    q.eliminate_zeros()
    return TransitionMatrix(q, space, model)


@dataclass(frozen=True, eq=False)
class Blocks:
    """Sub-matrices of the block-structured transition matrix.

    Attributes
    ----------
    forward : list of ndarray
        ``forward[m]`` is ``X_m`` of shape (N-m+1, N-m), m = 0..N-1: ageing
        of block ``m`` into block ``m+1``.
    gen_single : ndarray
        ``X_-inf`` of shape (N+1, N+1): generation while one pair is stored.
    fail : list of ndarray
        ``fail[m]`` is ``f_m`` of length N-m+1: failed purification from block ``m``.
    success : list of ndarray
        ``success[m]`` is ``D_m`` of shape (N-m+1, N+1): successful
        purification from block ``m`` into block 0.
    corner : float
        Self-loop of ``(N, N)``.
    """

    forward: list
    gen_single: np.ndarray
    fail: list
    success: list
    corner: float


def _shift_saturate(rows: int, cols: int) -> np.ndarray:
    """Identity on the first ``cols`` rows plus a saturating entry in the last row."""
    out = np.zeros((rows, cols))
    out[np.arange(cols), np.arange(cols)] = 1.0
    out[rows - 1, cols - 1] = 1.0
    return out


def assemble_blocks(model: DiscreteModel) -> Blocks:
    n = model.max_age
    pg = model.gen_prob
    ps_tab = model.success_table
    pa_tab = model.purified_age_table

    forward = [(1.0 - pg) * _shift_saturate(n - m + 1, n - m) for m in range(n)]
    # generation into a single memory: (-inf, j) -> (0, min(j+1, N)) with mass p_g
    gen_single = np.zeros((n + 1, n + 1))
    gen_single[:, 1:] = pg * _shift_saturate(n + 1, n)
    fail, success = [], []
    for m in range(n + 1):
        js = np.arange(m, n + 1)
        ps = ps_tab[m, js]
        fail.append(pg * (1.0 - ps))
        d = np.zeros((len(js), n + 1))
        d[np.arange(len(js)), pa_tab[m, js]] = pg * ps
        success.append(d)
    return Blocks(forward, gen_single, fail, success, 1.0 - pg)


def blocks_to_matrix(blocks: Blocks, n: int) -> np.ndarray:
    """Place the sub-matrices into the full dense transition matrix."""
    ns = num_states(n)
    q = np.zeros((ns, ns))
    singles = slice(0, n + 1)

    def blk(m):
        s = block_start(n, m)
        return slice(s, s + n + 1 - m)

    q[singles, 1 : n + 1] = blocks.forward[0]
    q[singles, blk(0)] = blocks.gen_single
    for m in range(n + 1):
        q[blk(m), 0] = blocks.fail[m]
        q[blk(m), blk(0)] += blocks.success[m]
        if m < n:
            q[blk(m), blk(m + 1)] = blocks.forward[m]
    q[blk(n), blk(n)] = blocks.corner
    return q


@dataclass(frozen=True, eq=False)
class SteadyState:
    """Stationary probability vector over a :class:`StateSpace`."""

    p: np.ndarray
    space: StateSpace
    method: str = ""

    @property
    def singles(self) -> np.ndarray:
        """Block ``p_-inf``: probabilities of ``(-inf, 0..N)``."""
        return self.p[self.space.single_slice()]

    def block(self, m: int) -> np.ndarray:
        """Block ``p_m``: probabilities of ``(m, m..N)``."""
        return self.p[self.space.block_slice(m)]

    def prob(self, state: LinkState) -> float:
        return float(self.p[self.space.index(state)])

    @property
    def full_prob(self) -> float:
        return float(self.p[self.space.is_pair].sum())

    def residual(self, q: TransitionMatrix) -> float:
        """``max |p^T Q - p^T|``."""
        return float(np.max(np.abs(q.matrix.T @ self.p - self.p)))


def _finish(p: np.ndarray, space: StateSpace, method: str) -> SteadyState:
    if not np.all(np.isfinite(p)):
        raise SolverError(f"{method}: non-finite stationary vector")
    if p.min() < -1e-12:
        raise SolverError(f"{method}: negative stationary probability {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    p.setflags(write=False)
    return SteadyState(p, space, method)


def steady_state_power(q: TransitionMatrix, tol: float = 1e-12, max_iter: int = 10**6) -> SteadyState:
    """Stationary vector by repeated left multiplication ``p <- p Q``."""
    qt = q.matrix.T.tocsr()
    p = np.full(q.shape[0], 1.0 / q.shape[0])
    for it in range(1, max_iter + 1):
        nxt = qt @ p
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - p)) < tol:
            log.debug("power iteration converged after %d steps", it)
            return _finish(nxt, q.space, "power")
        p = nxt
    raise SolverError(f"power iteration did not converge within {max_iter} iterations")


def _direct_solve(q: TransitionMatrix) -> np.ndarray:
    ns = q.shape[0]
    b = np.zeros(ns)
    b[0] = 1.0
    # balance equations (Q^T - I) p = 0 with the first replaced by sum(p) = 1
    if ns <= DENSE_LIMIT:
        a = q.toarray().T
        a[np.diag_indices(ns)] -= 1.0
        a[0, :] = 1.0
        return sla.solve(a, b, check_finite=False)
    a = (q.matrix.T - sp.identity(ns, format="csr")).tolil()
    a[0, :] = np.ones(ns)
    return spla.splu(a.tocsc()).solve(b)


def steady_state_full(q: TransitionMatrix, method: str = "direct") -> SteadyState:
    """Stationary vector of the full chain.

    ``method="direct"`` factorizes the balance equations (dense LU, or sparse
    LU above ``DENSE_LIMIT`` states) and falls back to power iteration if the
    factorization fails; ``method="power"`` goes straight to power iteration.
    """
    if method == "power":
        return steady_state_power(q)
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    try:
        with np.errstate(all="raise"):
            p = _direct_solve(q)
        ss = _finish(p, q.space, "direct")
        if ss.residual(q) <= 1e-9 and abs(ss.p.sum() - 1.0) <= 1e-10:
            return ss
        log.warning("direct solve residual %.3e too large, using power iteration", ss.residual(q))
    except (sla.LinAlgError, RuntimeError, FloatingPointError, SolverError) as exc:
        log.warning("direct solve failed (%s), using power iteration", exc)
    return steady_state_power(q)


def _push(v: np.ndarray, m: int, n: int, q: float) -> np.ndarray:
    """``X_0 X_1 ... X_{m-1} v`` for ``v`` indexed over block ``m``: repeat-last then scale."""
    return q**m * v[np.minimum(np.arange(n + 1), n - m)]


def _pull(p0: np.ndarray, m: int, n: int, q: float) -> np.ndarray:
    """``p0^T X_0 X_1 ... X_{m-1}``, the image of block 0 after ``m`` ageing steps."""
    out = q**m * p0[: n - m + 1].copy()
    out[n - m] = q**m * p0[n - m :].sum()
    return out


def steady_state_reduced(model: DiscreteModel, blocks: Blocks | None = None) -> SteadyState:
    """Stationary vector from an (N+1)-unknown system in ``p_0``.

    Every block ``p_m`` (m >= 1) and the single-pair block are linear images
    of ``p_0``; substituting them into the balance equations of block 0 and
    the normalization leaves ``p_0^T [Psi | beta] = [0 ... 0 | 1]``.
    """
    if blocks is None:
        blocks = assemble_blocks(model)
    n = model.max_age
    pg = model.gen_prob
    q = 1.0 - pg
    # weight of block m relative to its ageing image; also the single-pair profile rho
    rho = q ** np.arange(n + 1)
    rho[n] /= pg

    phi = blocks.fail[0].copy()
    for m in range(1, n + 1):
        phi += _push(blocks.fail[m], m, n, q) / (pg if m == n else 1.0)

    psi = np.eye(n + 1) - np.outer(phi, rho @ blocks.gen_single) - blocks.success[0]
    rows = np.arange(n + 1)
    for m in range(1, n + 1):
        psi -= rho[m] * blocks.success[m][np.minimum(rows, n - m)]
    beta = phi * rho.sum() + rho.sum()

    p0 = _solve_reduced(psi, beta)

    p = np.empty(num_states(n))
    p[: n + 1] = (p0 @ phi) * rho
    for m in range(n + 1):
        s = block_start(n, m)
        blk = _pull(p0, m, n, q)
        if m == n:
            blk = blk / pg
        p[s : s + n + 1 - m] = blk
    return _finish(p, StateSpace(n), "reduced")


def _solve_reduced(psi: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Solve ``p0^T [psi | beta] = [0 | 1]`` with ``psi`` singular by exactly one rank."""
    k = psi.shape[0]
    _, r, piv = sla.qr(psi, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    scale = d[0] if d[0] > 0 else 1.0
    if k > 1 and d[-2] <= 1e-13 * scale:
        raise SolverError(
            f"reduced system is rank deficient by more than one (pivots {d[-2]:.3e}, {d[-1]:.3e})"
        )
    drop = piv[-1]
    a = psi.copy()
    a[:, drop] = beta
    rhs = np.zeros(k)
    rhs[drop] = 1.0
    try:
        p0 = sla.solve(a.T, rhs, check_finite=False)
    except sla.LinAlgError as exc:
        raise SolverError(f"reduced system singular: {exc}") from exc
    full = np.column_stack([psi, beta])
    target = np.zeros(k + 1)
    target[-1] = 1.0
    res = np.max(np.abs(p0 @ full - target))
    if res > 1e-10 * max(1.0, np.abs(full).max()):
        raise SolverError(f"reduced system residual {res:.3e} too large")
    return p0


@dataclass(frozen=True)
class FidelityDistribution:
    """Probability mass over fidelity levels, in ascending fidelity order."""

    levels: np.ndarray
    pmf: np.ndarray
    cmf: np.ndarray

    @classmethod
    def from_age_pmf(cls, model: DiscreteModel, age_pmf: np.ndarray) -> FidelityDistribution:
        pmf = np.asarray(age_pmf, dtype=float)[::-1].copy()
        return cls(model.level_table[::-1].copy(), pmf, np.cumsum(pmf))

    def cmf_at(self, fidelity: float, tol: float = 1e-6) -> float:
        """Cumulative mass of all levels ``<= fidelity`` (levels within ``tol`` count)."""
        k = np.searchsorted(self.levels, fidelity + tol, side="right")
        return float(self.cmf[k - 1]) if k > 0 else 0.0

    def mean(self) -> float:
        return float(self.levels @ self.pmf)

    def sup_distance(self, other: FidelityDistribution) -> float:
        return float(np.max(np.abs(self.cmf - other.cmf)))


@dataclass(frozen=True)
class Observables:
    """Steady-state averages.

    ``mean_f1`` is the mean fidelity of the younger pair given both memories
    are full, ``mean_f2`` the mean fidelity of the older (or only) pair, and
    ``mean_pairs`` the expected number of stored pairs.
    """

    mean_f1: float
    mean_f2: float
    mean_pairs: float


def older_pair_distribution(ss: SteadyState, model: DiscreteModel) -> FidelityDistribution:
    ages = np.bincount(ss.space.second, weights=ss.p, minlength=model.n_levels)
    return FidelityDistribution.from_age_pmf(model, ages)


def newer_pair_distribution(ss: SteadyState, model: DiscreteModel) -> FidelityDistribution:
    mask = ss.space.is_pair
    full = ss.p[mask].sum()
    if not full > 0:
        raise SolverError("no probability mass on full-memory states")
    ages = np.bincount(ss.space.first[mask], weights=ss.p[mask], minlength=model.n_levels)
    return FidelityDistribution.from_age_pmf(model, ages / full)


def observables(ss: SteadyState, model: DiscreteModel) -> Observables:
    lv = model.level_table
    mask = ss.space.is_pair
    full = float(ss.p[mask].sum())
    f1 = float(ss.p[mask] @ lv[ss.space.first[mask]]) / full if full > 0 else float("nan")
    f2 = float(ss.p @ lv[ss.space.second])
    return Observables(f1, f2, 1.0 + full)
