import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magging.groups import (
    Grouping,
    consecutive_blocks,
    known_groups,
    random_subsample,
)


class TestKnownGroups:
    def test_two_label_split(self):
        g = known_groups(np.array([0, 0, 1, 1]))
        assert [list(x) for x in g.groups] == [[0, 1], [2, 3]]
        assert g.strategy == "known"

    def test_label_sorted_partition(self):
        g = known_groups(np.array([2, 0, 2, 0, 1]))
        assert [list(x) for x in g.groups] == [[1, 3], [4], [0, 2]]

    def test_single_label(self):
        g = known_groups(np.array([7, 7, 7]))
        assert g.G == 1 and list(g.groups[0]) == [0, 1, 2]

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            known_groups(np.array([], dtype=int))


class TestConsecutiveBlocks:
    def test_remainder_in_last_group(self):
        g = consecutive_blocks(10, 3)
        assert [list(x) for x in g.groups] == [[0, 1, 2], [3, 4, 5], [6, 7, 8, 9]]

    def test_singletons(self):
        g = consecutive_blocks(4, 4)
        assert g.sizes == [1, 1, 1, 1]

    def test_single_group(self):
        g = consecutive_blocks(7, 1)
        assert list(g.groups[0]) == list(range(7))

    @pytest.mark.parametrize("n,G", [(5, 0), (5, 6)])
    def test_invalid_counts(self, n, G):
        with pytest.raises(ValueError):
            consecutive_blocks(n, G)

    @given(st.integers(min_value=1, max_value=200), st.data())
    @settings(max_examples=100, deadline=None)
    def test_concatenation_covers_everything(self, n, data):
        G = data.draw(st.integers(min_value=1, max_value=n))
        g = consecutive_blocks(n, G)
        assert np.array_equal(np.concatenate(g.groups), np.arange(n))
        m = n // G
        assert g.sizes[:-1] == [m] * (G - 1)
        assert g.sizes[-1] == n - (G - 1) * m


class TestRandomSubsample:
    def test_exhaustive_draw(self):
        g = random_subsample(6, 4, 6, seed=0)
        for grp in g.groups:
            assert list(grp) == list(range(6))

    def test_same_seed_identical(self):
        a = random_subsample(30, 5, 7, seed=11)
        b = random_subsample(30, 5, 7, seed=11)
        for ga, gb in zip(a.groups, b.groups):
            assert np.array_equal(ga, gb)

    def test_distinct_seeds_differ(self):
        a = random_subsample(30, 5, 7, seed=11)
        b = random_subsample(30, 5, 7, seed=12)
        assert any(not np.array_equal(ga, gb) for ga, gb in zip(a.groups, b.groups))

    def test_m_larger_than_n_raises(self):
        with pytest.raises(ValueError):
            random_subsample(5, 2, 6, seed=0)

    def test_inclusion_frequency(self):
        n, m, G = 10_000, 100, 50
        g = random_subsample(n, G, m, seed=5)
        counts = np.zeros(n)
        for grp in g.groups:
            assert np.unique(grp).size == m
            counts[grp] += 1
        freq = counts / G
        rate = m / n
        assert freq.mean() == pytest.approx(rate, abs=1e-15)
        se = np.sqrt(rate * (1 - rate) / G)
        within = np.abs(freq - rate) <= 3 * se
        assert within.mean() >= 0.98

    @given(
        st.integers(min_value=1, max_value=60),
        st.data(),
    )
    @settings(max_examples=50, deadline=None)
    def test_invariants(self, n, data):
        m = data.draw(st.integers(min_value=1, max_value=n))
        G = data.draw(st.integers(min_value=1, max_value=8))
        seed = data.draw(st.integers(min_value=0, max_value=2**31))
        g = random_subsample(n, G, m, seed=seed)
        assert g.G == G
        for grp in g.groups:
            assert np.unique(grp).size == m
            assert grp.min() >= 0 and grp.max() < n


class TestGroupingType:
    def test_rejects_empty_group(self):
        with pytest.raises(ValueError):
            Grouping(groups=[np.array([0]), np.array([], dtype=int)],
                     strategy="subsample", n=2)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            Grouping(groups=[np.array([0, 5])], strategy="subsample", n=3)

    def test_rejects_bad_blocks(self):
        with pytest.raises(ValueError):
            Grouping(groups=[np.array([1, 0])], strategy="blocks", n=2)

    def test_rejects_duplicates_in_subsample(self):
        with pytest.raises(ValueError):
            Grouping(groups=[np.array([1, 1])], strategy="subsample", n=3)

    def test_json_round_trip(self):
        g = random_subsample(20, 4, 5, seed=3)
        d = json.loads(g.to_json())
        assert set(d) == {"strategy", "n", "groups", "seed"}
        back = Grouping.from_json(g.to_json())
        assert back.strategy == g.strategy and back.n == g.n
        for ga, gb in zip(back.groups, g.groups):
            assert np.array_equal(ga, gb)

    def test_json_null_seed(self):
        g = consecutive_blocks(5, 2)
        d = g.to_json_dict()
        assert d["seed"] is None
        assert Grouping.from_json_dict(d).seed is None
