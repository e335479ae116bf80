import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whype.experiments import (AccuracyResult, EncodedClassSet, EpisodeConfig, SessionConfig,
                               SyntheticClassSet, _Search, ber_accuracy_sweep, build_support,
                               results_csv, run_continual, run_few_shot, support_prototypes,
                               traces_csv)
from whype.hv import AssociativeMemory, majority_bundle, save_hypervectors

SMALL = SyntheticClassSet(class_count=80, seed=3)


def small_cfg(**kw):
    base = dict(classes_per_episode=20, episodes=30, rx_count=4, capacity=8, shots=5)
    return EpisodeConfig(**{**base, **kw})


def test_synthetic_class_set_is_seeded_and_validated():
    a, b = SyntheticClassSet(class_count=10, seed=1), SyntheticClassSet(class_count=10, seed=1)
    assert np.array_equal(a.prototypes, b.prototypes)
    assert a.prototypes.shape == (10, 512) and a.prototypes.dtype == np.uint8
    assert not np.array_equal(a.prototypes, SyntheticClassSet(class_count=10, seed=2).prototypes)
    with pytest.raises(ValueError):
        SyntheticClassSet(intra_class_flip=1.5)
    with pytest.raises(ValueError):
        SyntheticClassSet(class_count=0)


def test_independent_prototypes_are_quasi_orthogonal():
    cs = SyntheticClassSet(class_count=40, base_overlap=0.0, generic_overlap=0.0, seed=0)
    p = cs.prototypes.astype(int)
    dist = (p[:, None] != p[None]).mean(-1)[np.triu_indices(40, 1)]
    assert abs(dist.mean() - 0.5) < 0.01


def test_sample_flip_rate():
    cs = SyntheticClassSet(class_count=5, intra_class_flip=0.1, seed=0)
    ex = cs.sample([0, 4], 200, np.random.default_rng(0))
    assert ex.shape == (2, 200, 512)
    rate = (ex != cs.prototypes[[0, 4]][:, None]).mean()
    assert abs(rate - 0.1) < 0.005


def test_support_prototypes():
    shots = np.random.default_rng(0).integers(0, 2, (4, 5, 64), dtype=np.uint8)
    assert np.array_equal(support_prototypes(shots), majority_bundle(shots))
    assert support_prototypes(shots, "per-shot").shape == (20, 64)
    with pytest.raises(ValueError):
        support_prototypes(shots, "mean")


def test_build_support_round_robin_and_capacity():
    mems = build_support(SMALL, range(10), rx_count=4, capacity=3, rng=0)
    assert [m.labels for m in mems] == [[0, 4, 8], [1, 5, 9], [2, 6], [3, 7]]
    with pytest.raises(ValueError, match="capacity"):
        build_support(SMALL, range(13), rx_count=4, capacity=3, rng=0)
    per_shot = build_support(SMALL, range(4), rx_count=2, capacity=10, mode="per-shot", shots=5, rng=0)
    assert per_shot[0].labels == [0] * 5 + [2] * 5
    with pytest.raises(ValueError):
        build_support(SMALL, range(4), rx_count=2, capacity=9, mode="per-shot", shots=5, rng=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.integers(1, 3), st.integers(1, 25))
def test_distributed_search_matches_per_receiver_memories(seed, rx_count, per_class, n_classes):
    # oracle: each receiver holds its own memory, answers with its best entry,
    # and the best receiver report wins with ties to the lowest receiver index
    rng = np.random.default_rng(seed)
    d = 32  # small d makes score ties frequent
    vecs = rng.integers(0, 2, (n_classes * per_class, d), dtype=np.uint8)
    labels = np.repeat(np.arange(n_classes) * 7, per_class)
    mems = [AssociativeMemory(d, 1000, allow_duplicate_labels=True) for _ in range(rx_count)]
    for k in range(n_classes):
        for s in range(per_class):
            mems[k % rx_count].add(labels[k * per_class + s], vecs[k * per_class + s])
    received = rng.integers(0, 2, (rx_count, d), dtype=np.uint8)
    best_label, best_score = None, -1
    for r, m in enumerate(mems):
        if len(m):
            label, score, _ = m.search(received[r])
            if score > best_score:
                best_label, best_score = label, score
    got, _ = _Search(vecs, labels, rx_count, per_class).query(received)
    assert got == best_label


def test_episode_config_validation():
    with pytest.raises(ValueError):
        EpisodeConfig(classes_per_episode=100, rx_count=2, capacity=10)
    with pytest.raises(ValueError):
        EpisodeConfig(mode="bundled")
    with pytest.raises(ValueError):
        EpisodeConfig(channel="wireless")
    with pytest.raises(ValueError):
        EpisodeConfig(channel="fiber")
    cfg = EpisodeConfig(channel="wireless", ber_per_rx=[0.1, 0.2], rx_count=2)
    assert cfg.receiver_bers().tolist() == [0.1, 0.2]
    assert EpisodeConfig(channel="wireless", ber_per_rx=0.1, rx_count=3).receiver_bers().tolist() == [0.1] * 3
    with pytest.raises(ValueError):
        EpisodeConfig(channel="wireless", ber_per_rx=[0.1, 0.2], rx_count=3).receiver_bers()


def test_even_bundle_and_class_shortage_raise():
    with pytest.raises(ValueError, match="odd"):
        run_few_shot(small_cfg(bundle=4), SMALL)
    with pytest.raises(ValueError):
        run_few_shot(small_cfg(classes_per_episode=20, rx_count=4, capacity=8), SyntheticClassSet(class_count=10))
    with pytest.raises(ValueError):
        run_few_shot(small_cfg(support="per-shot"), SMALL)


def test_few_shot_is_deterministic():
    noisy = dict(bundle=3, channel="wireless", ber_per_rx=0.3)
    a = run_few_shot(small_cfg(**noisy), SMALL, trace_episodes=30)
    b = run_few_shot(small_cfg(**noisy), SMALL, trace_episodes=30)
    assert isinstance(a, AccuracyResult)
    assert np.array_equal(a.per_episode, b.per_episode)
    assert a.traces == b.traces
    c = run_few_shot(small_cfg(**noisy, seed=1), SMALL, trace_episodes=30)
    assert a.traces != c.traces


def test_noiseless_single_query_is_near_perfect():
    res = run_few_shot(small_cfg(), SMALL)
    assert res.accuracy >= 0.95
    assert res.meta["bundle_size"] == 1


def test_permuted_recovers_every_slot_for_small_bundles():
    res = run_few_shot(small_cfg(bundle=3, mode="permuted"), SMALL)
    assert res.accuracy >= 0.95


def test_per_shot_support_runs():
    res = run_few_shot(small_cfg(support="per-shot", capacity=40), SMALL)
    assert 0 <= res.accuracy <= 1


def test_ber_sweep_endpoints():
    out = ber_accuracy_sweep(small_cfg(episodes=100), SMALL, [0.0, 0.5])
    assert out[0].accuracy >= 0.95
    # coin-flip copies: chance level is 1 / classes_per_episode
    assert out[1].accuracy <= 0.15
    assert out[1].meta["ber"] == 0.5
    with pytest.raises(ValueError):
        ber_accuracy_sweep(small_cfg(), SMALL, [0.6])


def test_traces_recorded():
    res = run_few_shot(small_cfg(bundle=3), SMALL, trace_episodes=2)
    assert len(res.traces) == 6
    text = traces_csv(res.traces)
    assert text.splitlines()[0] == "episode,slot,true_label,predicted,true_score,best_other_score"
    assert len(text.splitlines()) == 7


def test_continual_curve():
    cs = SyntheticClassSet(class_count=100, seed=0)
    cfg = SessionConfig(initial_classes=20, classes_per_session=20, shots=5, sessions=5, queries_per_session=40)
    curve = run_continual(cfg, cs, rx_count=4, capacity=32)
    assert [r["session"] for r in curve] == [1, 2, 3, 4, 5]
    assert [r["classes"] for r in curve] == [20, 40, 60, 80, 100]
    assert all(0 <= r["accuracy"] <= 1 for r in curve)
    assert run_continual(cfg, cs, rx_count=4, capacity=32) == curve
    # the pool runs out after session 5
    longer = run_continual(SessionConfig(20, 20, 5, 8, 10), cs, rx_count=4, capacity=32)
    assert len(longer) == 5
    with pytest.raises(ValueError):
        run_continual(cfg, cs, rx_count=1, capacity=10)
    with pytest.raises(ValueError):
        run_continual(cfg, cs, bundle=2)


def test_results_csv():
    text = results_csv([{"experiment": "few-shot", "bundle_size": np.int64(3), "mode": "permuted",
                         "channel": "ideal", "accuracy": np.float64(0.5), "stderr": 0.01}])
    assert text == "experiment,bundle_size,mode,channel,accuracy,stderr\nfew-shot,3,permuted,ideal,0.5,0.01\n"


def test_encoded_class_set(tmp_path):
    rng = np.random.default_rng(0)
    protos = rng.integers(0, 2, (6, 128), dtype=np.uint8)
    labels, vecs = [], []
    for c in range(6):
        for _ in range(4):
            labels.append(f"c{c}")
            vecs.append(protos[c] ^ (rng.random(128) < 0.05).astype(np.uint8))
    path = tmp_path / "enc.txt"
    save_hypervectors(path, labels, np.array(vecs))
    cs = EncodedClassSet.load(path)
    assert cs.class_count == 6 and cs.d == 128 and cs.shots_per_class == 4
    ex = cs.sample([1, 2], 3, np.random.default_rng(0))
    assert ex.shape == (2, 3, 128)
    assert len({row.tobytes() for row in ex[0]}) == 3  # distinct while available
    res = run_few_shot(EpisodeConfig(classes_per_episode=6, episodes=20, rx_count=2, capacity=8, shots=3), cs)
    assert res.accuracy >= 0.9
