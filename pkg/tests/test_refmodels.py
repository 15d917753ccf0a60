import itertools
import math
from collections import Counter

import numpy as np
import pytest

from spatialperm.refmodels import (
    PartitionState,
    SimplexPoint,
    cycle_lengths_of_word,
    exact_cycle_type_law,
    pd1_largest_parts,
    pd1_sample,
    transposition_step,
    transposition_type_occupation,
    two_sample_stats,
    uniform_cycles,
    write_parts_csv,
)


class _ForcedUniforms:
    def __init__(self, values):
        self.values = list(values)

    def random(self, size=None):
        if size is None:
            return self.values.pop(0)
        return np.array([self.values.pop(0) for _ in range(size)])


def test_pd1_forced_degenerate_draw():
    pt = pd1_sample(_ForcedUniforms([1.0]), tail_eps=0.1)
    assert pt.parts.tolist() == [1.0]
    assert pt.tail_mass == 0.0
    pt.check(tail_eps=0.1)


def test_pd1_forced_halving_draws():
    # halving fractions: parts 1/2, 1/4, 1/8 remain above a 0.2 cutoff
    pt = pd1_sample(_ForcedUniforms([0.5] * 10), tail_eps=0.2)
    assert pt.parts.tolist() == [0.5, 0.25, 0.125]
    assert pt.tail_mass == pytest.approx(0.125)
    pt.check(tail_eps=0.2)


def test_pd1_stopping_rule_is_tail_below_eps():
    pt = pd1_sample(_ForcedUniforms([0.5] * 10), tail_eps=0.1)
    assert pt.parts.tolist() == [0.5, 0.25, 0.125, 0.0625]
    assert pt.tail_mass == pytest.approx(0.0625)
    pt.check(tail_eps=0.1)


def test_pd1_invariants_on_random_samples(rng):
    for _ in range(2000):
        pt = pd1_sample(rng)
        pt.check(tail_eps=1e-9)


def test_pd1_largest_parts_matches_scalar(rng):
    vec = pd1_largest_parts(30_000, rng)
    scalar = np.array([float(np.max(pd1_sample(rng).parts)) for _ in range(30_000)])
    ts = two_sample_stats(vec, scalar)
    assert ts.ks_pvalue > 0.001
    assert np.all(vec > 0) and np.all(vec <= 1)


def test_pd1_mean_largest_matches_uniform_permutations(rng):
    vec = pd1_largest_parts(1_000_000, rng)
    assert vec.mean() == pytest.approx(0.6243, abs=0.003)
    big = np.array([uniform_cycles(100_000, rng)[0] for _ in range(4000)])
    assert abs(big.mean() - vec.mean()) < 0.01


def test_uniform_cycles_edge_cases(rng):
    assert uniform_cycles(1, rng).tolist() == [1.0]
    for _ in range(50):
        parts = uniform_cycles(17, rng)
        assert parts.sum() == pytest.approx(1.0)
        assert np.all(np.diff(parts) <= 0)


def test_uniform_cycles_exact_law_n3(rng):
    counts = Counter(tuple(np.round(uniform_cycles(3, rng), 6)) for _ in range(100_000))
    law = {
        (1.0,): 1 / 3,
        (round(2 / 3, 6), round(1 / 3, 6)): 1 / 2,
        (round(1 / 3, 6),) * 3: 1 / 6,
    }
    tv = 0.5 * sum(abs(counts.get(k, 0) / 100_000 - p) for k, p in law.items())
    assert tv < 0.01


def test_uniform_cycles_exact_law_n4_by_enumeration(rng):
    # oracle: cycle types of all 24 permutations of 4 elements
    law = Counter()
    for perm in itertools.permutations(range(4)):
        law[tuple(cycle_lengths_of_word(np.array(perm)).tolist())] += 1 / 24
    counts = Counter(tuple((uniform_cycles(4, rng) * 4).astype(int).tolist())
                     for _ in range(100_000))
    tv = 0.5 * sum(abs(counts.get(k, 0) / 100_000 - p) for k, p in law.items())
    assert tv < 0.01


def test_transposition_step_properties(rng):
    st = PartitionState.identity(8)
    for _ in range(300):
        new = transposition_step(st, rng)
        new.check()
        assert abs(len(new.cycle_lengths) - len(st.cycle_lengths)) == 1
        st = new


def test_transposition_two_elements(rng):
    st = PartitionState.identity(2)
    new = transposition_step(st, rng)
    assert new.cycle_lengths.tolist() == [2]


def test_exact_cycle_type_law_n8():
    law = exact_cycle_type_law(8)
    assert len(law) == 22
    assert sum(law.values()) == pytest.approx(1.0, abs=1e-12)
    assert law[(1,) * 8] == pytest.approx(1 / math.factorial(8))
    assert law[(8,)] == pytest.approx(1 / 8)


def _split_merge_type_kernel(N):
    """Exact one-step cycle-type kernel from the split-merge description:
    two uniform distinct indices; merge across cycles, split inside one
    (the transposition action realizes the uniform split)."""
    types = list(exact_cycle_type_law(N))
    idx = {t: i for i, t in enumerate(types)}
    P = np.zeros((len(types), len(types)))
    denom = N * (N - 1)
    for t in types:
        lengths = list(t)
        for ci, li in enumerate(lengths):
            # split: both indices inside cycle ci, at offset d in 1..li-1;
            # ordered index pairs for offset d: li choices of first index,
            # two orders, except d pairs up with li - d
            for d in range(1, li):
                pieces = sorted([d, li - d], reverse=True)
                new = sorted(lengths[:ci] + lengths[ci + 1:] + pieces, reverse=True)
                P[idx[t], idx[tuple(new)]] += li / denom
            # merge with every other cycle cj
            for cj, lj in enumerate(lengths):
                if cj == ci:
                    continue
                new = sorted(
                    [l for k, l in enumerate(lengths) if k not in (ci, cj)]
                    + [li + lj], reverse=True)
                P[idx[t], idx[tuple(new)]] += li * lj / denom
    return types, P


def _literal_type_kernel(N):
    """Exact kernel by enumerating all permutations and transpositions."""
    types = list(exact_cycle_type_law(N))
    idx = {t: i for i, t in enumerate(types)}
    accum = np.zeros((len(types), len(types)))
    norm = np.zeros(len(types))
    transpositions = list(itertools.combinations(range(N), 2))
    for perm in itertools.permutations(range(N)):
        word = np.array(perm)
        t0 = tuple(cycle_lengths_of_word(word).tolist())
        norm[idx[t0]] += 1
        for a, b in transpositions:
            w = word.copy()
            ia = int(np.nonzero(w == a)[0][0])
            ib = int(np.nonzero(w == b)[0][0])
            w[ia], w[ib] = b, a
            t1 = tuple(cycle_lengths_of_word(w).tolist())
            accum[idx[t0], idx[t1]] += 1.0 / len(transpositions)
    return types, accum / norm[:, None]


def test_split_merge_kernel_equals_literal_composition():
    types_a, Pa = _split_merge_type_kernel(6)
    types_b, Pb = _literal_type_kernel(6)
    assert types_a == types_b
    assert np.max(np.abs(Pa - Pb)) < 1e-12
    assert np.max(np.abs(Pa.sum(axis=1) - 1.0)) < 1e-12


def test_split_merge_kernel_fixes_uniform_law():
    types, P = _split_merge_type_kernel(6)
    pi = np.array([exact_cycle_type_law(6)[t] for t in types])
    assert np.max(np.abs(pi @ P - pi)) < 1e-14


def test_transposition_occupation_reaches_stationarity(rng):
    N, chains, steps = 8, 32, 10_000
    counts = transposition_type_occupation(N, chains, steps, rng)
    total = sum(counts.values())
    assert total == chains * steps
    law = exact_cycle_type_law(N)
    tv = 0.5 * sum(abs(counts.get(t, 0) / total - p) for t, p in law.items())
    tv += 0.5 * sum(c / total for t, c in counts.items() if t not in law)
    assert tv < 0.02


def test_two_sample_stats_edges(rng):
    xs = rng.normal(size=500)
    same = two_sample_stats(xs, xs)
    assert same.ks_statistic == 0.0
    disjoint = two_sample_stats([0.0], [1.0])
    assert disjoint.ks_statistic == 1.0
    with pytest.raises(ValueError):
        two_sample_stats([], [1.0])


def test_two_sample_stats_self_consistency(rng):
    hits = 0
    for _ in range(40):
        a = pd1_largest_parts(10_000, rng)
        b = pd1_largest_parts(10_000, rng)
        if two_sample_stats(a, b).ks_pvalue > 0.01:
            hits += 1
    assert hits >= 38  # >= 95% of replicated trials


def test_parts_csv(tmp_path):
    write_parts_csv(tmp_path / "x.csv", [(0, 1, 0.61)])
    assert (tmp_path / "x.csv").read_text().splitlines()[0] == "sample_id,rank,value"
