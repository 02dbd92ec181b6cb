import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbgfid.dtmc import (
    StateSpace,
    build_transition_matrix,
    older_pair_distribution,
    pair,
    single,
    steady_state_reduced,
)
from pbgfid.physics import DiscreteModel, PhysicalConfig, derive_discrete_model
from pbgfid.sim import (
    BACKEND,
    PolicyKind,
    SimConfig,
    SimStats,
    available_backends,
    empirical_distribution,
    empirical_newer_distribution,
    empirical_observables,
    simulate,
    step,
    transition_counts,
)
from pbgfid.sim import _fallback

PBG = PolicyKind.PURIFY_BEYOND_GENERATION
RO = PolicyKind.REPLACE_OLDEST


@pytest.fixture(scope="module")
def m15():
    return derive_discrete_model(PhysicalConfig(15.0))


class FixedRng:
    """Stand-in generator returning preset uniforms."""

    def __init__(self, *pairs):
        self.pairs = list(pairs)

    def random(self, size):
        return np.array(self.pairs.pop(0))


# -- step --------------------------------------------------------------------

def test_single_saturates(m15):
    n = m15.max_age
    assert step(single(n), m15, PBG, FixedRng((0.99, 0.5))) == single(n)


def test_single_generation(m15):
    assert step(single(4), m15, PBG, FixedRng((0.0, 0.5))) == pair(0, 5)


def test_pair_success(m15):
    assert step(pair(10, 20), m15, PBG, FixedRng((0.0, 0.0))) == pair(0, 5)


def test_pair_failure(m15):
    assert step(pair(10, 20), m15, PBG, FixedRng((0.0, 0.999))) == single(0)


def test_pair_no_generation(m15):
    n = m15.max_age
    assert step(pair(10, 20), m15, PBG, FixedRng((0.99, 0.0))) == pair(11, 21)
    assert step(pair(n - 1, n), m15, PBG, FixedRng((0.99, 0.0))) == pair(n, n)


@pytest.mark.parametrize("u1", [0.0, 0.5, 0.999])
def test_replace_oldest_ignores_purification(m15, u1):
    assert step(pair(10, 20), m15, RO, FixedRng((0.0, u1))) == pair(0, 11)
    n = m15.max_age
    assert step(pair(n, n), m15, RO, FixedRng((0.0, u1))) == pair(0, n)


def test_policy_parse():
    assert PolicyKind.parse("pbg") is PBG
    assert PolicyKind.parse("replace-oldest") is RO
    with pytest.raises(ValueError):
        PolicyKind.parse("drop-all")


# -- config ------------------------------------------------------------------

def test_config_validation(m15):
    with pytest.raises(ValueError):
        SimConfig(m15, PBG, total_slots=10, warmup_slots=10)
    with pytest.raises(ValueError):
        SimConfig(m15, PBG, total_slots=0, warmup_slots=0)
    with pytest.raises(ValueError):
        SimConfig(m15, PBG, total_slots=10, warmup_slots=0, seed=-1)


def test_one_recorded_sample(m15):
    stats = simulate(SimConfig(m15, PBG, total_slots=1001, warmup_slots=1000, seed=3))
    assert stats.recorded == 1
    assert stats.older_counts.sum() == 1


def test_empty_stats_rejected(m15):
    with pytest.raises(ValueError):
        empirical_distribution(SimStats.empty(m15.n_levels), m15)
    with pytest.raises(ValueError):
        empirical_observables(SimStats.empty(m15.n_levels), m15)


# -- determinism and backends --------------------------------------------------

@pytest.mark.parametrize("policy", [PBG, RO])
def test_determinism(m15, policy):
    cfg = SimConfig(m15, policy, total_slots=150_000, warmup_slots=1000, seed=99)
    a, b = simulate(cfg), simulate(cfg)
    assert a == b
    c = simulate(SimConfig(m15, policy, total_slots=150_000, warmup_slots=1000, seed=100))
    assert a != c


@pytest.mark.parametrize("policy", [PBG, RO])
def test_backends_agree(m15, policy):
    if len(available_backends()) < 2:
        pytest.skip("compiled kernel not built")
    cfg = SimConfig(m15, policy, total_slots=140_000, warmup_slots=5000, seed=11)
    assert simulate(cfg, "cython") == simulate(cfg, "python")
    s = pair(3, 9)
    assert np.array_equal(transition_counts(s, m15, policy, 70_000, 5, "cython"),
                          transition_counts(s, m15, policy, 70_000, 5, "python"))


def test_backend_reported():
    assert BACKEND in available_backends()
    assert "python" in available_backends()


def test_stats_addition(m15):
    a = simulate(SimConfig(m15, PBG, 20_000, 0, seed=1))
    b = simulate(SimConfig(m15, PBG, 30_000, 0, seed=2))
    c = a + b
    assert c.recorded == 50_000
    assert np.array_equal(c.older_counts, a.older_counts + b.older_counts)


# -- trajectories ---------------------------------------------------------------

def test_forced_generation_replace_oldest():
    m = DiscreteModel.from_params(1.0, 0.05)
    for slots in (2, 3, 50):
        stats = simulate(SimConfig(m, RO, total_slots=slots, warmup_slots=0, seed=5))
        assert stats.final_state == pair(0, 1)
    stats = simulate(SimConfig(m, RO, total_slots=1000, warmup_slots=2, seed=5))
    assert stats.pair_slots == 998
    assert stats.older_counts[1] == 998
    assert stats.newer_counts[0] == 998
    assert stats.attempts == 0


@pytest.mark.parametrize("policy", [PBG, RO])
def test_counter_invariants(m15, policy):
    cfg = SimConfig(m15, policy, total_slots=300_000, warmup_slots=20_000, seed=8)
    s = simulate(cfg)
    assert s.recorded == cfg.recorded_slots
    assert s.older_counts.sum() == s.recorded
    assert s.newer_counts.sum() == s.pair_slots
    assert s.successes + s.failures == s.attempts
    assert s.older_counts.shape == (m15.n_levels,)
    if policy is RO:
        assert s.attempts == 0


@settings(max_examples=25, deadline=None)
@given(
    st.floats(0.01, 0.99),
    st.floats(0.01, 0.5),
    st.integers(0, 2**32),
    st.sampled_from([PBG, RO]),
)
def test_occupancy_and_age_bounds(pg, alpha, seed, policy):
    m = DiscreteModel.from_params(pg, alpha)
    rng = np.random.default_rng(seed)
    u = rng.random((3000, 2))
    ps, pa = m.success_table, m.purified_age_table
    is_pair, i, j = 0, 0, 0
    for a, b in u:
        is_pair, i, j, _ = _fallback.advance(is_pair, i, j, a, b, pg, ps, pa, m.max_age, policy.value)
        # one or two pairs held, ages ordered and in range
        assert 0 <= j <= m.max_age
        if is_pair:
            assert 0 <= i <= j
    stats = simulate(SimConfig(m, policy, total_slots=3000, warmup_slots=0, seed=seed))
    assert stats.single_slots + stats.pair_slots == 3000
    assert len(stats.older_counts) == m.n_levels


# -- statistics -----------------------------------------------------------------

def test_kernel_equivalence_subset(m15):
    q = build_transition_matrix(m15)
    space = q.space
    draws = 200_000
    for s in [single(0), single(47), pair(0, 0), pair(10, 20), pair(47, 47), pair(2, 40)]:
        counts = transition_counts(s, m15, PBG, draws, seed=20_000 + space.index(s))
        expect = np.zeros(len(space))
        for k, v in q.row(space.index(s)).items():
            expect[k] += v
        assert set(np.flatnonzero(counts)) <= set(np.flatnonzero(expect))
        freq = counts / draws
        se = np.sqrt(expect * (1 - expect) / draws)
        nz = expect > 0
        assert np.all(np.abs(freq[nz] - expect[nz]) <= 3 * se[nz] + 1e-12)


def test_empirical_cmf_converges(m15):
    analytic = older_pair_distribution(steady_state_reduced(m15), m15)
    stats = simulate(SimConfig(m15, PBG, 2_100_000, 100_000, seed=1))
    emp = empirical_distribution(stats, m15)
    assert abs(emp.pmf.sum() - 1) <= 1e-12
    assert emp.sup_distance(analytic) <= 0.01
    newer = empirical_newer_distribution(stats, m15)
    assert abs(newer.pmf.sum() - 1) <= 1e-12


def test_empirical_all_fresh(m15):
    stats = SimStats.empty(m15.n_levels)
    stats.older_counts[0] = 10
    stats.single_slots = 10
    d = empirical_distribution(stats, m15)
    assert np.all(d.cmf[:-1] == 0) and d.cmf[-1] == 1


@pytest.mark.parametrize("km", [4, 10, 20, 30])
def test_baseline_dominance(km):
    m = derive_discrete_model(PhysicalConfig(km))
    runs = {}
    for policy in (PBG, RO):
        vals = []
        for seed in range(4):
            s = simulate(SimConfig(m, policy, 250_000, 20_000, seed=seed))
            vals.append(empirical_observables(s, m).mean_pairs)
        runs[policy] = np.array(vals)
    diff = runs[RO].mean() - runs[PBG].mean()
    spread = np.sqrt(runs[RO].var(ddof=1) / 4 + runs[PBG].var(ddof=1) / 4)
    assert diff >= -3 * spread


def test_generation_draw_unbiased(m15):
    """z-scores of the generation frequency over many seeds look standard normal."""
    space = StateSpace(m15.max_age)
    pg, draws = m15.gen_prob, 100_000
    target = space.index(pair(0, 1))
    z = []
    for seed in range(60):
        c = transition_counts(single(0), m15, PBG, draws, seed)
        z.append((c[target] / draws - pg) / np.sqrt(pg * (1 - pg) / draws))
    z = np.array(z)
    assert abs(z.mean()) < 3 / np.sqrt(len(z))
    assert 0.7 < z.std() < 1.3
