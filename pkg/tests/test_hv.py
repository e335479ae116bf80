import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whype.hv import (AssociativeMemory, PermutationSpec, bitflip_noise, group_by_label, hamming_distance,
                      hamming_similarity, inverse_permute, load_hypervectors, majority_bundle, permute,
                      permute_slots, random_hypervector, random_hypervectors, rotate, save_hypervectors,
                      similarity_scores, tie_break_vector)

bits = st.lists(st.integers(0, 1), min_size=1, max_size=64)


def loop_majority(vectors, tie):
    """Position-by-position oracle."""
    out = []
    for pos in range(len(vectors[0])):
        ones = sum(int(v[pos]) for v in vectors)
        if 2 * ones > len(vectors):
            out.append(1)
        elif 2 * ones < len(vectors):
            out.append(0)
        else:
            out.append(int(tie[pos]))
    return np.array(out, dtype=np.uint8)


@pytest.mark.parametrize("M", [1, 2, 3, 4, 5])
def test_majority_truth_table(M):
    # every column is one M-bit word, so all 2^M inputs are covered at once
    words = np.array(list(itertools.product([0, 1], repeat=M)), dtype=np.uint8).T
    tie = tie_break_vector(words.shape[1])
    assert np.array_equal(majority_bundle(words), loop_majority(list(words), tie))


def test_majority_examples():
    a = np.array([1, 1, 0, 0], np.uint8)
    b = np.array([1, 0, 1, 0], np.uint8)
    c = np.array([1, 0, 0, 1], np.uint8)
    assert majority_bundle([a, b, c]).tolist() == [1, 0, 0, 0]
    assert majority_bundle([a]).tolist() == a.tolist()
    assert majority_bundle([a, a]).tolist() == a.tolist()


def test_even_tie_rules():
    a = np.zeros(8, np.uint8)
    b = np.ones(8, np.uint8)
    assert majority_bundle([a, b], "zero").tolist() == [0] * 8
    assert majority_bundle([a, b], "one").tolist() == [1] * 8
    assert np.array_equal(majority_bundle([a, b]), tie_break_vector(8))
    with pytest.raises(ValueError):
        majority_bundle([a, b], "coin")


def test_majority_errors():
    with pytest.raises(ValueError):
        majority_bundle([])
    with pytest.raises(ValueError):
        majority_bundle([np.zeros(4), np.zeros(5)])


def test_majority_batched_matches_loop():
    rng = np.random.default_rng(3)
    x = rng.integers(0, 2, (6, 4, 32), dtype=np.uint8)
    out = majority_bundle(x)
    for i in range(6):
        assert np.array_equal(out[i], majority_bundle(list(x[i])))


@settings(max_examples=50)
@given(st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_majority_properties(M, seed):
    vs = random_hypervectors(M, 64, seed)
    out = majority_bundle(vs)
    assert np.array_equal(out, majority_bundle(vs[::-1]))
    if M % 2:
        # self-dual: complementing every operand complements the bundle
        assert np.array_equal(1 - out, majority_bundle(1 - vs))
        # with no ties, bundling commutes with rotation
        assert np.array_equal(rotate(out, 3), majority_bundle(rotate(vs, 3)))


@given(bits, st.integers(-200, 200), st.integers(-200, 200))
def test_rotation_group_laws(v, a, b):
    v = np.array(v, np.uint8)
    d = len(v)
    assert np.array_equal(rotate(rotate(v, a), -a), v)
    assert np.array_equal(rotate(rotate(v, a), b), rotate(v, a + b))
    assert np.array_equal(rotate(v, d), v)
    assert np.array_equal(rotate(v, a), rotate(v, a % d))


@given(bits, bits)
def test_rotation_preserves_distance(a, b):
    n = min(len(a), len(b))
    a, b = np.array(a[:n], np.uint8), np.array(b[:n], np.uint8)
    for k in (1, 5, n):
        assert hamming_distance(rotate(a, k), rotate(b, k)) == hamming_distance(a, b)


def test_permutation_spec():
    spec = PermutationSpec(3)
    assert [spec.rotation(t) for t in (1, 2, 3)] == [1, 2, 3]
    assert PermutationSpec(3, stride=4).rotation(2) == 8
    assert PermutationSpec(2, rotations=(7, 11)).rotation(2) == 11
    with pytest.raises(ValueError):
        spec.rotation(4)
    with pytest.raises(ValueError):
        spec.rotation(0)
    with pytest.raises(ValueError):
        PermutationSpec(0)
    with pytest.raises(ValueError):
        PermutationSpec(2, rotations=(1,))


def test_permute_inverse_and_slots():
    spec = PermutationSpec(4, stride=3)
    q = random_hypervectors(4, 32, 1)
    p = permute_slots(q, spec)
    for t in range(4):
        assert np.array_equal(p[t], permute(q[t], t + 1, spec))
        assert np.array_equal(inverse_permute(p[t], t + 1, spec), q[t])
    assert np.array_equal(permute_slots(q, None), q)
    with pytest.raises(ValueError):
        permute_slots(random_hypervectors(5, 32, 1), spec)


def test_permuted_copies_are_quasi_orthogonal():
    v = random_hypervector(512, 0)
    sims = [hamming_similarity(v, rotate(v, k)) for k in range(1, 8)]
    assert all(200 < s < 312 for s in sims)


def test_hamming():
    a = np.array([0, 1, 1, 0], np.uint8)
    b = np.array([1, 1, 0, 0], np.uint8)
    assert hamming_distance(a, b) == 2
    assert hamming_similarity(a, b) == 2
    assert hamming_distance(a, a) == 0
    with pytest.raises(ValueError):
        hamming_distance(a, b[:3])


@given(st.integers(0, 2**32 - 1))
def test_similarity_scores_match_pairwise(seed):
    P = random_hypervectors(5, 40, seed)
    q = random_hypervectors(3, 40, seed + 1)
    s = similarity_scores(P, q)
    for i in range(3):
        for k in range(5):
            assert s[i, k] == hamming_similarity(P[k], q[i])


def test_bitflip_noise():
    v = np.zeros(100_000, np.uint8)
    assert np.array_equal(bitflip_noise(v, 0.0, 1), v)
    assert bitflip_noise(v, 1.0, 1).all()
    rate = bitflip_noise(v, 0.2, 1).mean()
    assert abs(rate - 0.2) < 4 * np.sqrt(0.2 * 0.8 / v.size)
    with pytest.raises(ValueError):
        bitflip_noise(v, 1.5)


def test_random_vectors_deterministic():
    assert np.array_equal(random_hypervector(64, 9), random_hypervector(64, 9))
    with pytest.raises(ValueError):
        random_hypervector(0)


def test_memory_search_and_ties():
    mem = AssociativeMemory(d=4, capacity=3)
    mem.add("a", [1, 1, 0, 0])
    mem.add("b", [1, 1, 0, 0])
    mem.add("c", [0, 0, 1, 1])
    label, score, scores = mem.search(np.array([1, 1, 0, 0]))
    assert label == "a" and score == 4
    assert scores.tolist() == [4, 4, 0]
    with pytest.raises(ValueError, match="full"):
        mem.add("d", [0, 0, 0, 0])


def test_memory_validation():
    mem = AssociativeMemory(d=4)
    with pytest.raises(ValueError):
        mem.search(np.zeros(4, np.uint8))
    mem.add(1, [0, 1, 0, 1])
    with pytest.raises(ValueError):
        mem.add(1, [0, 1, 0, 0])
    with pytest.raises(ValueError):
        mem.add(2, [0, 1, 0])
    with pytest.raises(ValueError):
        mem.add(3, [0, 2, 0, 1])
    with pytest.raises(ValueError):
        mem.scores(np.zeros(5))
    dup = AssociativeMemory(d=4, allow_duplicate_labels=True)
    dup.add(1, [0, 1, 0, 1])
    dup.add(1, [1, 1, 0, 1])
    assert len(dup) == 2


def test_hypervector_file_roundtrip(tmp_path):
    labels = ["cat", "dog", "cat"]
    vecs = random_hypervectors(3, 16, 2)
    path = tmp_path / "hv.txt"
    save_hypervectors(path, labels, vecs)
    got_labels, got = load_hypervectors(path)
    assert got_labels == labels
    assert np.array_equal(got, vecs)
    groups = group_by_label(got_labels, got)
    assert groups["cat"].shape == (2, 16)


def test_hypervector_file_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("a,0101\nb,011\n")
    with pytest.raises(ValueError, match=":2:"):
        load_hypervectors(path)
    path.write_text("a,01x1\n")
    with pytest.raises(ValueError, match=":1:"):
        load_hypervectors(path)
    path.write_text("\n")
    with pytest.raises(ValueError):
        load_hypervectors(path)
    with pytest.raises(ValueError):
        save_hypervectors(path, ["a,b"], np.zeros((1, 4)))
