"""End-to-end over-the-air bundling of whole hypervectors.

``transmit_bundle`` runs the physical path bit position by bit position:
superposition of the (optionally permuted) query bits through the channel,
complex AWGN, and nearest-centroid decoding at every receiver.
``fast_bundle`` is the abstraction used by the large experiments: digital
majority followed by independent bit flips at each receiver's BER.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelMatrix
from .coding import (DecisionRegions, PhaseAssignment, build_constellations,
                     decision_regions)
from .hv import PermutationSpec, majority_bundle, permute_slots


@dataclass
class OtaLink:
    channel: ChannelMatrix
    assignment: PhaseAssignment
    regions: DecisionRegions
    noise_sigma: float
    perm: PermutationSpec | None = None

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.assignment.M != self.channel.M:
            raise ValueError("assignment and channel disagree on M")

    @classmethod
    def build(cls, channel: ChannelMatrix, assignment: PhaseAssignment, *, regions: str = "supervised",
              perm: PermutationSpec | None = None, noise_sigma: float | None = None) -> "OtaLink":
        """Link with regions derived from ``(channel, assignment)``.

        Noise defaults to ``sqrt(N0 / 2)`` per axis, which makes the decoding
        error of two antipodal clusters match the erfc formula.
        """
        dr = decision_regions(build_constellations(channel, assignment), regions)
        if noise_sigma is None:
            noise_sigma = math.sqrt(channel.noise_psd / 2)
        return cls(channel, assignment, dr, noise_sigma, perm)

    @property
    def M(self) -> int:
        return self.channel.M

    @property
    def N(self) -> int:
        return self.channel.N


def _word_index(bits: np.ndarray) -> np.ndarray:
    """Column-wise word index of an (M, d) bit matrix, TX 1 most significant."""
    M = bits.shape[0]
    weights = 1 << np.arange(M - 1, -1, -1)
    return (weights[:, None] * bits.astype(np.int64)).sum(axis=0)


def digital_reference(queries: np.ndarray, perm: PermutationSpec | None = None) -> np.ndarray:
    """Majority the receivers are meant to decode: strict majority of the
    (permuted) queries, ties to 0 as in the constellation labels."""
    q = permute_slots(np.asarray(queries, dtype=np.uint8), perm)
    return majority_bundle(q, tie_rule="zero")


def transmit_bundle(link: OtaLink, queries, seed=None) -> np.ndarray:
    """Received hypervectors, shape ``(N, d)``."""
    queries = np.asarray(queries, dtype=np.uint8)
    if queries.ndim != 2 or queries.shape[0] != link.M:
        raise ValueError(f"expected {link.M} queries of a common dimension, got shape {queries.shape}")
    q = permute_slots(queries, link.perm)
    cs = link.regions.constellation
    if cs is None:
        cs = build_constellations(link.channel, link.assignment)
    rx = cs.points[:, _word_index(q)]  # (N, d)
    if link.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal((2,) + rx.shape)
        rx = rx + link.noise_sigma * (noise[0] + 1j * noise[1])
    return link.regions.decode_all(rx)


def fast_bundle(queries, ber_per_rx, perm: PermutationSpec | None = None, seed=None,
                tie_rule: str = "vector") -> np.ndarray:
    """Digital majority, then i.i.d. flips at each receiver's BER. ``(N, d)``."""
    ber = np.atleast_1d(np.asarray(ber_per_rx, dtype=float))
    if ber.ndim != 1 or ((ber < 0) | (ber > 0.5) | ~np.isfinite(ber)).any():
        raise ValueError("BER values must lie in [0, 0.5]")
    q = permute_slots(np.asarray(queries, dtype=np.uint8), perm)
    bundle = majority_bundle(q, tie_rule=tie_rule)
    flips = np.random.default_rng(seed).random((len(ber), bundle.shape[0])) < ber[:, None]
    return bundle[None, :] ^ flips.astype(np.uint8)


def measure_empirical_ber(link: OtaLink, trials: int, d: int = 512, seed=0) -> np.ndarray:
    """Per-receiver fraction of decoded bits that disagree with the digital
    majority, over ``trials`` random query sets of dimension ``d``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    errors = np.zeros(link.N, dtype=np.int64)
    for _ in range(trials):
        queries = rng.integers(0, 2, (link.M, d), dtype=np.uint8)
        received = transmit_bundle(link, queries, rng)
        errors += (received != digital_reference(queries, link.perm)[None]).sum(axis=1)
    return errors / (trials * d)
