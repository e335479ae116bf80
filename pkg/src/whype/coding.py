"""Source coding for over-the-air majority.

Each transmitter maps bit 0/1 to one of two phases from an 8-point (45 degree)
alphabet. Concurrent transmissions superpose at every receiver into ``2**M``
constellation points; the phases are chosen so that, at all receivers at once,
points whose transmit word has majority 0 are separable from those with
majority 1.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.special import erfc, log_ndtr, logsumexp

from .channel import ChannelMatrix

PHASE_STEP = 45
N_PHASES = 8
# Ordered pairs (phase index for '0', phase index for '1') with distinct phases,
# in lexicographic order so candidate index order == phase-tuple order.
PAIRS = np.array([(a, b) for a in range(N_PHASES) for b in range(N_PHASES) if a != b])
EXHAUSTIVE_MAX_M = 4
CHUNK = 4096
KEY_DECIMALS = 9  # log-BER keys are rounded so float noise cannot break ties


@dataclass(frozen=True)
class PhaseAssignment:
    """Per-transmitter ``(phase for '0', phase for '1')`` in degrees."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        if not pairs:
            raise ValueError("assignment needs at least one transmitter")
        for a, b in pairs:
            for ph in (a, b):
                if ph % PHASE_STEP or not 0 <= ph < 360:
                    raise ValueError(f"phase {ph} is not on the 45-degree grid [0, 315]")
        object.__setattr__(self, "pairs", pairs)

    @property
    def M(self) -> int:
        return len(self.pairs)

    @property
    def indices(self) -> np.ndarray:
        """``(M, 2)`` phase-alphabet indices."""
        return np.array(self.pairs) // PHASE_STEP

    @property
    def degenerate(self) -> bool:
        return any(a == b for a, b in self.pairs)

    @classmethod
    def from_indices(cls, idx) -> "PhaseAssignment":
        return cls(tuple((int(a) * PHASE_STEP, int(b) * PHASE_STEP) for a, b in np.asarray(idx)))

    def rotated(self, offset_deg: int) -> "PhaseAssignment":
        return PhaseAssignment(tuple(((a + offset_deg) % 360, (b + offset_deg) % 360) for a, b in self.pairs))

    def swapped(self) -> "PhaseAssignment":
        return PhaseAssignment(tuple((b, a) for a, b in self.pairs))

    def to_json(self) -> str:
        return json.dumps([list(p) for p in self.pairs]) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "PhaseAssignment":
        data = json.loads(Path(path).read_text())
        if not isinstance(data, list) or not all(isinstance(p, list) and len(p) == 2 for p in data):
            raise ValueError(f"{path}: expected a JSON list of [phase0, phase1] pairs")
        return cls(tuple(tuple(p) for p in data))


def transmit_words(M: int) -> np.ndarray:
    """All ``2**M`` words as rows of bits; row ``w`` spells ``w`` in binary,
    transmitter 1 being the most significant bit."""
    w = np.arange(2**M)
    return ((w[:, None] >> (M - 1 - np.arange(M))) & 1).astype(np.uint8)


def majority_labels(words: np.ndarray) -> np.ndarray:
    """Strict majority of each word (even-count ties map to 0)."""
    M = words.shape[1]
    return (2 * words.sum(axis=1) > M).astype(np.uint8)


def unit_contributions(ch: ChannelMatrix) -> np.ndarray:
    """``(N, M, 8)`` received contribution of each TX at each alphabet phase."""
    phases = np.exp(1j * np.deg2rad(np.arange(N_PHASES) * PHASE_STEP))
    return ch.gains[:, :, None] * math.sqrt(ch.tx_power_w) * phases


@dataclass
class ConstellationSet:
    points: np.ndarray  # (N, 2**M) complex
    words: np.ndarray  # (2**M, M)
    labels: np.ndarray  # (2**M,)

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def M(self) -> int:
        return self.words.shape[1]


def build_constellations(ch: ChannelMatrix, pa: PhaseAssignment) -> ConstellationSet:
    if pa.M != ch.M:
        raise ValueError(f"assignment has {pa.M} transmitters, channel has {ch.M}")
    words = transmit_words(ch.M)
    u = unit_contributions(ch)
    idx = pa.indices  # (M, 2)
    phase_of = idx[np.arange(ch.M), words]  # (W, M) phase index used per word and TX
    points = u[:, np.arange(ch.M), phase_of].sum(axis=-1)  # (N, W)
    return ConstellationSet(points, words, majority_labels(words))


@dataclass
class DecisionRegions:
    centroids: np.ndarray  # (N, 2) complex: column b is the centroid decoded as b
    consistent: np.ndarray  # (N,) bool
    mode: str
    constellation: ConstellationSet | None = field(default=None, repr=False)

    @property
    def d_c(self) -> np.ndarray:
        return np.abs(self.centroids[:, 1] - self.centroids[:, 0])

    def decode(self, rx: int, values: np.ndarray) -> np.ndarray:
        """Nearest-centroid decision; equidistant values decode to 0."""
        c0, c1 = self.centroids[rx]
        return (np.abs(values - c1) < np.abs(values - c0)).astype(np.uint8)

    def decode_all(self, values: np.ndarray) -> np.ndarray:
        """Decode ``values`` of shape ``(N, ...)`` row-wise."""
        c = self.centroids.reshape((self.centroids.shape[0], 2) + (1,) * (values.ndim - 1))
        return (np.abs(values - c[:, 1]) < np.abs(values - c[:, 0])).astype(np.uint8)


def _kmeans_centroids(points: np.ndarray, labels: np.ndarray, seed, restarts: int) -> np.ndarray:
    data = np.column_stack([points.real, points.imag])
    if np.ptp(data, axis=0).max() == 0:
        return np.array([points[0], points[0]])
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cents, assign = kmeans2(data, 2, minit="++", seed=rng)
        inertia = ((data - cents[assign]) ** 2).sum()
        if best is None or inertia < best[0]:
            best = (inertia, cents, assign)
    _, cents, assign = best
    # match clusters to labels by maximal agreement
    if (assign == labels).sum() < (assign != labels).sum():
        cents = cents[::-1]
    return cents[:, 0] + 1j * cents[:, 1]


def decision_regions(cs: ConstellationSet, mode: str = "supervised", seed=0, restarts: int = 10) -> DecisionRegions:
    """Two centroids per receiver.

    ``supervised`` takes the mean of each majority-label group; ``kmeans``
    runs 2-means (``restarts`` seeded restarts, lowest inertia wins) and
    matches clusters to labels by majority vote.
    """
    if cs.points.size == 0:
        raise ValueError("empty constellation")
    lab = cs.labels.astype(bool)
    cents = np.zeros((cs.N, 2), dtype=complex)
    for i in range(cs.N):
        pts = cs.points[i]
        if mode == "supervised":
            cents[i, 0] = pts[~lab].mean() if (~lab).any() else np.nan
            cents[i, 1] = pts[lab].mean() if lab.any() else np.nan
        elif mode == "kmeans":
            cents[i] = _kmeans_centroids(pts, cs.labels, seed, restarts)
        else:
            raise ValueError(f"unknown decision-region mode {mode!r}")
    regions = DecisionRegions(cents, np.zeros(cs.N, bool), mode, cs)
    with np.errstate(invalid="ignore"):
        regions.consistent = (regions.decode_all(cs.points) == cs.labels).all(axis=1)
    return regions


def ber_from_distance(d_c, noise_psd: float):
    """BPSK error rate with the cluster centroids taken as the two symbols."""
    if noise_psd <= 0:
        raise ValueError("noise_psd must be positive")
    return 0.5 * erfc(0.5 * np.asarray(d_c, float) / math.sqrt(noise_psd))


def log_ber_from_distance(d_c, noise_psd: float):
    """``log`` of :func:`ber_from_distance`, accurate far into the tail."""
    if noise_psd <= 0:
        raise ValueError("noise_psd must be positive")
    return log_ndtr(-np.asarray(d_c, float) / math.sqrt(2 * noise_psd))


def _exact_log_ber(points, centroids, labels, noise_psd):
    """Per-receiver log error rate averaged over the constellation points,
    each point treated as a symbol against the perpendicular-bisector
    boundary. ``points``: (..., W); ``centroids``: (..., 2)."""
    c0, c1 = centroids[..., :1], centroids[..., 1:]
    diff = c1 - c0
    dist = np.abs(diff)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = diff / dist
        signed = ((points - (c0 + c1) / 2) * np.conj(u)).real  # >0 on the '1' side
    signed = np.where(labels.astype(bool), signed, -signed)
    sigma = math.sqrt(noise_psd / 2)
    lp = log_ndtr(-signed / sigma)
    out = logsumexp(lp, axis=-1) - math.log(points.shape[-1])
    return np.where(dist[..., 0] > 0, out, math.log(0.5))


@dataclass
class BerReport:
    per_rx: np.ndarray
    assignment: PhaseAssignment | None = None
    consistent: np.ndarray | None = None
    d_c: np.ndarray | None = None
    method: str = "centroid"

    @property
    def average(self) -> float:
        return float(np.mean(self.per_rx))

    def to_csv(self, path=None) -> str:
        lines = ["rx,ber"] + [f"{i},{float(b)!r}" for i, b in enumerate(self.per_rx)] + [f"avg,{float(self.average)!r}"]
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "BerReport":
        vals = []
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            parts = raw.strip().split(",")
            if parts == ["rx", "ber"] or parts == [""] or parts[0] == "avg":
                continue
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected rx,ber")
            vals.append((int(parts[0]), float(parts[1])))
        if not vals:
            raise ValueError(f"{path}: no BER rows")
        vals.sort()
        return cls(np.array([v for _, v in vals]))


def ber_per_rx(dr: DecisionRegions, ch: ChannelMatrix, method: str = "centroid") -> BerReport:
    """Per-receiver BER from decision regions.

    ``centroid`` applies the BPSK erfc formula to the inter-centroid
    distance. ``exact`` averages the Gaussian error probability of every
    constellation point against the decision boundary (diagnostic; it can
    exceed 0.5 on inconsistent receivers).
    """
    if ch.noise_psd <= 0:
        raise ValueError("noise_psd must be positive")
    d_c = np.nan_to_num(dr.d_c)
    if method == "centroid":
        ber = ber_from_distance(d_c, ch.noise_psd)
    elif method == "exact":
        if dr.constellation is None:
            raise ValueError("exact BER needs the constellation behind the regions")
        cs = dr.constellation
        ber = np.exp(_exact_log_ber(cs.points, dr.centroids, cs.labels, ch.noise_psd))
    else:
        raise ValueError(f"unknown BER method {method!r}")
    return BerReport(ber, None, dr.consistent.copy(), d_c, method)


def evaluate(ch: ChannelMatrix, pa: PhaseAssignment, regions: str = "supervised",
             method: str = "centroid", seed=0) -> BerReport:
    dr = decision_regions(build_constellations(ch, pa), regions, seed=seed)
    report = ber_per_rx(dr, ch, method)
    report.assignment = pa
    return report


# -- optimizer --

def _batch_log_avg_ber(u, words, labels, cand, noise_psd, method):
    """Log of the average BER for candidate phase-index arrays ``cand``
    of shape (K, M, 2), using supervised centroids."""
    M = words.shape[1]
    phase_of = np.take_along_axis(cand, np.broadcast_to(words.T[None], (len(cand), M, words.shape[0])), axis=2)
    # points[n, k, w] = sum_j u[n, j, phase_of[k, j, w]]
    points = sum(u[:, j, phase_of[:, j, :]] for j in range(M))
    lab = labels.astype(bool)
    cents = np.stack([points[..., ~lab].mean(axis=-1), points[..., lab].mean(axis=-1)], axis=-1)
    if method == "centroid":
        lb = log_ber_from_distance(np.abs(cents[..., 1] - cents[..., 0]), noise_psd)
    else:
        lb = _exact_log_ber(points, cents, labels, noise_psd)
    return logsumexp(lb, axis=0) - math.log(u.shape[0])


def _decode_candidates(start: int, stop: int, M: int) -> np.ndarray:
    """Mixed-radix decode of exhaustive candidate indices into (K, M, 2)."""
    c = np.arange(start, stop)
    digits = np.empty((len(c), M), dtype=np.int64)
    for j in range(M - 1, -1, -1):
        digits[:, j] = c % len(PAIRS)
        c = c // len(PAIRS)
    return PAIRS[digits]


def _best_in_range(args):
    u, words, labels, noise_psd, method, start, stop = args
    M = words.shape[1]
    best = (math.inf, -1)
    for lo in range(start, stop, CHUNK):
        hi = min(lo + CHUNK, stop)
        vals = np.round(_batch_log_avg_ber(u, words, labels, _decode_candidates(lo, hi, M), noise_psd, method),
                        KEY_DECIMALS)
        k = int(np.argmin(vals))
        if (vals[k], lo + k) < best:
            best = (float(vals[k]), lo + k)
    return best


def _scalar_key(ch, idx, regions, method, seed):
    pa = PhaseAssignment.from_indices(idx)
    rep = evaluate(ch, pa, regions, method, seed)
    return math.log(rep.average) if rep.average > 0 else -math.inf


def _keys(ch, cands, regions, method, seed):
    if regions == "supervised":
        words = transmit_words(ch.M)
        keys = _batch_log_avg_ber(unit_contributions(ch), words, majority_labels(words), cands,
                                  ch.noise_psd, method)
    else:
        keys = np.array([_scalar_key(ch, c, regions, method, seed) for c in cands])
    return np.round(keys, KEY_DECIMALS)


def optimize_phases(ch: ChannelMatrix, method: str = "exhaustive", *, k: int = 1000, seed=0,
                    workers: int = 1, regions: str = "supervised", ber_method: str = "centroid",
                    max_rounds: int = 100) -> tuple[PhaseAssignment, BerReport]:
    """Pick the phase assignment with the lowest average BER over receivers.

    ``exhaustive`` scans every ordered pair of distinct phases per
    transmitter, ``(8*7)**M`` candidates (only for ``M <= 4``); ``random``
    evaluates ``k`` uniform candidates; ``greedy`` re-optimizes one
    transmitter at a time until a full pass changes nothing. Equal scores
    resolve to the lexicographically smallest phase tuple.
    """
    if ch.noise_psd <= 0:
        raise ValueError("noise_psd must be positive")
    M = ch.M
    if method == "exhaustive":
        if M > EXHAUSTIVE_MAX_M:
            raise ValueError(
                f"exhaustive search over (8*7)^{M} assignments is refused for M > {EXHAUSTIVE_MAX_M}; "
                "use method='greedy' or method='random'")
        total = len(PAIRS) ** M
        if regions == "supervised":
            words = transmit_words(M)
            u, labels = unit_contributions(ch), majority_labels(words)
            bounds = list(range(0, total, CHUNK)) + [total]
            jobs = [(u, words, labels, ch.noise_psd, ber_method, a, b) for a, b in zip(bounds, bounds[1:])]
            if workers > 1:
                with ProcessPoolExecutor(workers) as ex:
                    results = list(ex.map(_best_in_range, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
            else:
                results = [_best_in_range(j) for j in jobs]
            _, c = min(results)
        else:
            cands = _decode_candidates(0, total, M)
            keys = _keys(ch, cands, regions, ber_method, seed)
            c = int(np.argmin(keys))
        best = _decode_candidates(c, c + 1, M)[0]
    elif method == "random":
        if k < 1:
            raise ValueError("random search needs k >= 1")
        rng = np.random.default_rng(seed)
        cands = PAIRS[rng.integers(0, len(PAIRS), size=(k, M))]
        keys = _keys(ch, cands, regions, ber_method, seed)
        order = sorted(range(k), key=lambda i: (keys[i], cands[i].ravel().tolist()))
        best = cands[order[0]]
    elif method == "greedy":
        best = np.tile(PAIRS[3], (M, 1))  # (0, 180) everywhere
        for _ in range(max_rounds):
            changed = False
            for j in range(M):
                cands = np.repeat(best[None], len(PAIRS), axis=0)
                cands[:, j] = PAIRS
                keys = _keys(ch, cands, regions, ber_method, seed)
                choice = int(np.argmin(keys))
                if keys[choice] < _keys(ch, best[None], regions, ber_method, seed)[0]:
                    best = cands[choice]
                    changed = True
            if not changed:
                break
    else:
        raise ValueError(f"unknown optimization method {method!r}")
    pa = PhaseAssignment.from_indices(best)
    return pa, evaluate(ch, pa, regions, ber_method, seed)


def iter_assignments(M: int):
    """All non-degenerate assignments in lexicographic order."""
    for combo in itertools.product(range(len(PAIRS)), repeat=M):
        yield PhaseAssignment.from_indices(PAIRS[list(combo)])


def ber_vs_n_sweep(n_list, M: int = 3, seeds=(0,), *, method: str = "exhaustive", model=None,
                   noise_psd: float | None = None, jitter_mm: float = 1.0, workers: int = 1,
                   geometry_dims: dict | None = None) -> np.ndarray:
    """Average BER after re-optimizing phases for each receiver count.

    Returns an array of shape ``(len(seeds), len(n_list))``; each seed draws a
    jittered default layout, so averaging over axis 0 gives the trend curve.
    """
    from .channel import PackageGeometry, synth_channel

    out = np.zeros((len(seeds), len(n_list)))
    for a, seed in enumerate(seeds):
        for b, n in enumerate(n_list):
            if n < 1:
                raise ValueError("receiver counts must be >= 1")
            geom = PackageGeometry.default(M, n, jitter_mm=jitter_mm, seed=seed, **(geometry_dims or {}))
            ch, _ = synth_channel(geom, model, noise_psd=noise_psd)
            _, rep = optimize_phases(ch, method, seed=seed, workers=workers)
            out[a, b] = rep.average
    return out
