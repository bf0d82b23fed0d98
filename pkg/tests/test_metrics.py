import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import adjusted_mutual_info_score

from coreperiphery.metrics import (
    adjusted_mutual_information,
    contingency,
    entropy,
    expected_mutual_information,
    mutual_information,
    normalized_vi,
    variation_of_information,
)


def _mi_plain(a, b):
    """Mutual information in bits by direct probability tables."""
    n = len(a)
    pa, pb, pab = {}, {}, {}
    for x, y in zip(a, b):
        pa[x] = pa.get(x, 0) + 1
        pb[y] = pb.get(y, 0) + 1
        pab[x, y] = pab.get((x, y), 0) + 1
    return sum(c / n * math.log2(c * n / (pa[x] * pb[y])) for (x, y), c in pab.items())


def test_vi_hand_values():
    assert variation_of_information([0, 0, 1, 1], [0, 0, 1, 1]) == 0.0
    assert variation_of_information([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(2.0)
    assert variation_of_information([0, 0, 0, 0], [0, 0, 1, 1]) == pytest.approx(1.0)


def test_nvi_hand_values():
    assert normalized_vi([0, 1, 0, 1], [1, 0, 1, 0]) == 0.0
    assert normalized_vi([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(1.0)
    assert normalized_vi([0, 0, 0, 0], [0, 0, 1, 1]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        normalized_vi([0], [0])


def test_mismatched_sizes():
    with pytest.raises(ValueError):
        variation_of_information([0, 1], [0, 1, 1])
    with pytest.raises(ValueError):
        contingency([0, 1], [0])


def test_ami_conventions():
    assert adjusted_mutual_information([0, 0, 1, 1, 2], [5, 5, 3, 3, 1]) == pytest.approx(1.0)
    assert adjusted_mutual_information([0, 0, 0, 0], [0, 1, 0, 1]) == 0.0
    assert adjusted_mutual_information([0, 0, 0], [1, 1, 1]) == 1.0
    assert adjusted_mutual_information(list(range(5)), list(range(5))) == 1.0


def _emi_by_permutation(a, b):
    """Average MI over all relabelings of the second partition's node order."""
    b = list(b)
    total = 0.0
    perms = list(itertools.permutations(range(len(b))))
    for perm in perms:
        total += _mi_plain(a, [b[i] for i in perm])
    return total / len(perms)


@pytest.mark.parametrize("seed", range(4))
def test_expected_mi_permutation_oracle(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 3, size=6)
    b = rng.integers(0, 2, size=6)
    c = contingency(a, b)
    assert expected_mutual_information(c.rows, c.cols) == pytest.approx(_emi_by_permutation(a, b), abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_ami_matches_sklearn(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(5, 60)
    a = rng.integers(0, rng.integers(1, 6), size=n)
    b = rng.integers(0, rng.integers(1, 6), size=n)
    ref = adjusted_mutual_info_score(a, b, average_method="arithmetic")
    assert adjusted_mutual_information(a, b) == pytest.approx(ref, abs=1e-9)


def test_mi_and_entropy_against_plain():
    rng = np.random.default_rng(3)
    a = rng.integers(0, 4, size=50)
    b = rng.integers(0, 3, size=50)
    assert mutual_information(a, b) == pytest.approx(_mi_plain(a, b), abs=1e-12)
    assert entropy(a) == pytest.approx(_mi_plain(a, a), abs=1e-12)
    vi = entropy(a) + entropy(b) - 2 * _mi_plain(a, b)
    assert variation_of_information(a, b) == pytest.approx(vi, abs=1e-12)


def test_accepts_partition_objects():
    from coreperiphery.classic import CorePartition

    p = CorePartition(np.array([0, 0, 1]), 2)
    assert variation_of_information(p, [1, 1, 0]) == 0.0


partitions = st.integers(2, 25).flatmap(
    lambda n: st.tuples(*[st.lists(st.integers(0, 4), min_size=n, max_size=n) for _ in range(3)])
)


@settings(max_examples=300, deadline=None)
@given(partitions)
def test_metric_properties(triple):
    a, b, c = (np.array(x) for x in triple)
    vab = variation_of_information(a, b)
    assert vab == variation_of_information(b, a)
    assert vab >= 0
    assert variation_of_information(a, c) <= vab + variation_of_information(b, c) + 1e-12
    same = contingency(a, b)
    identical = np.count_nonzero(same.table) == same.table.shape[0] == same.table.shape[1]
    assert (vab == 0) == identical
    perm = np.random.default_rng(0).permutation(10)
    assert variation_of_information(perm[a], b) == vab
    assert normalized_vi(perm[a], perm[b]) == normalized_vi(a, b)
    assert adjusted_mutual_information(perm[a], b) == pytest.approx(adjusted_mutual_information(a, b), abs=1e-12)
