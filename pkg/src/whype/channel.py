"""In-package channel: geometry, synthetic gains, impulse responses, file I/O
and the time-domain metrics (delay spread, coherence bandwidth)."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

C0 = 299_792_458.0  # m/s
BOLTZMANN = 1.380649e-23


@dataclass
class PackageGeometry:
    """Antenna placement on the interposer, in millimetres.

    Package dimensions default to the evaluated interposer package
    (33 x 30 mm, 7.5 mm chiplets at 3.75 mm spacing).
    """

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    L1: float = 33.0
    L2: float = 30.0
    l1: float = 7.5
    s: float = 3.75
    h1: float = 0.1
    h2: float = 0.01
    carrier_freq: float = 60e9
    eff_permittivity: float = 1.0

    def __post_init__(self):
        self.tx_positions = np.atleast_2d(np.asarray(self.tx_positions, dtype=float))
        self.rx_positions = np.atleast_2d(np.asarray(self.rx_positions, dtype=float))
        for name, pos in (("tx", self.tx_positions), ("rx", self.rx_positions)):
            if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] == 0:
                raise ValueError(f"{name}_positions must be a non-empty (k, 2) array")
        if self.carrier_freq <= 0:
            raise ValueError("carrier_freq must be positive")
        if self.eff_permittivity < 1:
            raise ValueError("eff_permittivity must be >= 1")
        allpos = np.vstack([self.tx_positions, self.rx_positions])
        if ((allpos < 0) | (allpos[:, 0] > self.L1)[:, None] | (allpos[:, 1] > self.L2)[:, None]).any():
            raise ValueError(f"antenna outside the [0,{self.L1}]x[0,{self.L2}] package")
        if len(np.unique(allpos, axis=0)) != len(allpos):
            raise ValueError("antenna positions must be pairwise distinct")

    @property
    def M(self) -> int:
        return len(self.tx_positions)

    @property
    def N(self) -> int:
        return len(self.rx_positions)

    @property
    def wavelength_mm(self) -> float:
        return C0 / self.carrier_freq * 1e3

    @classmethod
    def default(cls, M: int, N: int, jitter_mm: float = 0.0, seed=None, **dims) -> "PackageGeometry":
        """TX antennas along the left edge, RX antennas on a square grid.

        ``jitter_mm`` perturbs every antenna uniformly in ``[-jitter, jitter]``
        per axis, which gives a family of distinct channels per seed.
        """
        if M < 1 or N < 1:
            raise ValueError("need at least one transmitter and one receiver")
        L1 = dims.get("L1", cls.L1)
        L2 = dims.get("L2", cls.L2)
        s = dims.get("s", cls.s)
        tx = np.column_stack([np.full(M, s / 2), L2 * (np.arange(M) + 0.5) / M])
        side = math.ceil(math.sqrt(N))
        x0, x1 = s + 0.25 * (L1 - s), L1 - s / 2
        xs = x0 + (x1 - x0) * (np.arange(side) + 0.5) / side
        ys = L2 * (np.arange(side) + 0.5) / side
        grid = np.array([(x, y) for y in ys for x in xs])[:N]
        if jitter_mm > 0:
            rng = np.random.default_rng(seed)
            tx = tx + rng.uniform(-jitter_mm, jitter_mm, tx.shape)
            grid = grid + rng.uniform(-jitter_mm, jitter_mm, grid.shape)
            tx = np.clip(tx, 0, [L1, L2])
            grid = np.clip(grid, 0, [L1, L2])
        return cls(tx, grid, **dims)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["tx_positions"] = self.tx_positions.tolist()
        out["rx_positions"] = self.rx_positions.tolist()
        return out

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "PackageGeometry":
        """Load a JSON geometry.

        Besides explicit ``tx_positions``/``rx_positions`` the file may give
        ``M``, ``N`` (and optionally ``jitter_mm``, ``seed``) to request the
        default layout.
        """
        cfg = json.loads(Path(path).read_text())
        if "tx_positions" in cfg:
            return cls(**cfg)
        M, N = cfg.pop("M"), cfg.pop("N")
        return cls.default(M, N, jitter_mm=cfg.pop("jitter_mm", 0.0), seed=cfg.pop("seed", None), **cfg)


@dataclass
class ChannelModel:
    """Parameters of the synthetic line-of-sight + image-source channel.

    ``path_loss_exp`` applies to amplitude: gain magnitude is
    ``(lambda / (4 pi d)) ** path_loss_exp``. ``reflections`` picks that many
    of the shortest sidewall image paths (at most 8: four first-order and
    four second-order images), each attenuated by ``reflection_loss`` per
    bounce.
    """

    path_loss_exp: float = 1.0
    reflections: int = 0
    reflection_loss: float = 0.5

    def __post_init__(self):
        if self.path_loss_exp <= 0:
            raise ValueError("path-loss exponent must be positive")
        if not 0 <= self.reflections <= 8:
            raise ValueError("reflections must be in [0, 8]")
        if not 0 <= self.reflection_loss <= 1:
            raise ValueError("reflection_loss must be in [0, 1]")


def thermal_noise_power(bandwidth_hz: float = 10e9, temperature_k: float = 300.0,
                        noise_figure_db: float = 10.0) -> float:
    """k*T*B*F in watts; the default noise level for synthetic channels."""
    return BOLTZMANN * temperature_k * bandwidth_hz * 10 ** (noise_figure_db / 10)


def dbm_to_watt(dbm: float) -> float:
    return 10 ** (dbm / 10) * 1e-3


@dataclass
class ChannelMatrix:
    """Complex carrier-frequency voltage gains, ``gains[rx, tx]``.

    ``noise_psd`` is the noise power N0 at the receiver in watts, on the same
    scale as ``|gain|^2 * tx_power``.
    """

    gains: np.ndarray
    freq_hz: float = 60e9
    tx_power_dbm: float = 0.0
    noise_psd: float = field(default_factory=thermal_noise_power)

    def __post_init__(self):
        self.gains = np.atleast_2d(np.asarray(self.gains, dtype=complex))
        if self.gains.ndim != 2:
            raise ValueError("gains must be an N x M matrix")
        if not np.isfinite(self.gains).all():
            raise ValueError("channel gains must be finite")
        if (np.abs(self.gains) > 1 + 1e-12).any():
            raise ValueError("passive channel gains must satisfy |g| <= 1")
        if not (math.isfinite(self.noise_psd) and math.isfinite(self.tx_power_dbm)):
            raise ValueError("noise_psd and tx_power_dbm must be finite")

    @property
    def N(self) -> int:
        return self.gains.shape[0]

    @property
    def M(self) -> int:
        return self.gains.shape[1]

    @property
    def tx_power_w(self) -> float:
        return dbm_to_watt(self.tx_power_dbm)


@dataclass
class ImpulseResponseSet:
    """Per-receiver discrete taps: ``delays[i]`` in ns, ``amps[i]`` complex."""

    delays: list
    amps: list

    def __post_init__(self):
        if len(self.delays) != len(self.amps):
            raise ValueError("delays and amps must list the same receivers")
        self.delays = [np.asarray(t, dtype=float) for t in self.delays]
        self.amps = [np.asarray(a, dtype=complex) for a in self.amps]
        for i, (t, a) in enumerate(zip(self.delays, self.amps)):
            if t.shape != a.shape or t.ndim != 1:
                raise ValueError(f"receiver {i}: delays and amplitudes differ in shape")
            if t.size and ((t < 0).any() or (np.diff(t) <= 0).any()):
                raise ValueError(f"receiver {i}: delays must be non-negative and strictly increasing")

    @property
    def N(self) -> int:
        return len(self.delays)


def _merge_taps(delays: np.ndarray, amps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    uniq, inv = np.unique(delays, return_inverse=True)
    merged = np.zeros(len(uniq), dtype=complex)
    np.add.at(merged, inv, amps)
    return uniq, merged


def _image_sources(p: np.ndarray, L1: float, L2: float) -> list[tuple[np.ndarray, int]]:
    xs = [(p[0], 0), (-p[0], 1), (2 * L1 - p[0], 1)]
    ys = [(p[1], 0), (-p[1], 1), (2 * L2 - p[1], 1)]
    return [(np.array([x, y]), ox + oy) for x, ox in xs for y, oy in ys if ox + oy > 0]


def link_taps(geom: PackageGeometry, model: ChannelModel, rx: int, tx: int) -> tuple[np.ndarray, np.ndarray]:
    """Delays (ns) and complex amplitudes of the paths from ``tx`` to ``rx``."""
    lam = geom.wavelength_mm
    scale = lam / (4 * math.pi)
    n_eff = math.sqrt(geom.eff_permittivity)
    src, dst = geom.tx_positions[tx], geom.rx_positions[rx]
    d_los = float(np.hypot(*(dst - src)))
    if d_los == 0:
        raise ValueError(f"tx {tx} and rx {rx} coincide (zero distance)")
    if d_los < scale:
        raise ValueError(f"tx {tx} and rx {rx} are {d_los:.3g} mm apart, inside the near field")
    paths = [(d_los, 0)]
    if model.reflections:
        images = sorted(
            ((float(np.hypot(*(dst - img))), order) for img, order in _image_sources(src, geom.L1, geom.L2)),
        )
        paths += images[: model.reflections]
    lengths = np.array([p[0] for p in paths])
    orders = np.array([p[1] for p in paths])
    amp = (scale / lengths) ** model.path_loss_exp * model.reflection_loss ** orders
    phase = -2 * math.pi * lengths * n_eff / lam
    delays_ns = lengths * 1e-3 * n_eff / C0 * 1e9
    return delays_ns, amp * np.exp(1j * phase)


def synth_channel(geom: PackageGeometry, model: ChannelModel | None = None, *,
                  noise_psd: float | None = None, tx_power_dbm: float = 0.0,
                  tx_weights=None) -> tuple[ChannelMatrix, ImpulseResponseSet]:
    """Synthesize carrier gains and impulse responses for ``geom``.

    The carrier gain of each link is the coherent sum of its taps, so the
    matrix and the impulse responses describe the same propagation paths.
    Impulse responses combine all transmitters, each excited with the complex
    weight in ``tx_weights`` (default: all ones).
    """
    model = model or ChannelModel()
    weights = np.ones(geom.M, complex) if tx_weights is None else np.asarray(tx_weights, complex)
    if weights.shape != (geom.M,):
        raise ValueError("tx_weights needs one entry per transmitter")
    gains = np.zeros((geom.N, geom.M), dtype=complex)
    delays, amps = [], []
    for i in range(geom.N):
        rx_d, rx_a = [], []
        for j in range(geom.M):
            t, a = link_taps(geom, model, i, j)
            gains[i, j] = a.sum()
            rx_d.append(t)
            rx_a.append(a * weights[j])
        t, a = _merge_taps(np.concatenate(rx_d), np.concatenate(rx_a))
        delays.append(t)
        amps.append(a)
    ch = ChannelMatrix(gains, geom.carrier_freq, tx_power_dbm,
                       thermal_noise_power() if noise_psd is None else noise_psd)
    return ch, ImpulseResponseSet(delays, amps)


def delay_spread(irs: ImpulseResponseSet, rx: int) -> float:
    """RMS delay spread (ns) of receiver ``rx``: the power-weighted standard
    deviation of the tap delays."""
    if not 0 <= rx < irs.N:
        raise IndexError(f"receiver {rx} out of range")
    tau, a = irs.delays[rx], irs.amps[rx]
    if tau.size == 0:
        raise ValueError(f"receiver {rx} has no taps")
    power = np.abs(a) ** 2
    total = power.sum()
    if total == 0:
        raise ValueError(f"receiver {rx} has zero received power")
    tau = tau - tau.min()  # shift-free, and exactly 0 for a lone tap
    mean = (tau * power).sum() / total
    return float(np.sqrt(((tau - mean) ** 2 * power).sum() / total))


def coherence_bandwidth(irs: ImpulseResponseSet) -> tuple[float, float]:
    """Worst-case delay spread (ns) over receivers and its coherence
    bandwidth in Hz (``inf`` for a zero spread)."""
    if irs.N == 0:
        raise ValueError("no receivers")
    worst = max(delay_spread(irs, i) for i in range(irs.N))
    return worst, (math.inf if worst == 0 else 1.0 / (worst * 1e-9))


def ota_throughput(M: int, coherence_bw_hz: float, line_rate_cap_hz: float | None = None) -> float:
    """Aggregate encoder-to-engine throughput in Gb/s at 1 b/s/Hz (BPSK)."""
    if M < 1:
        raise ValueError("M must be >= 1")
    rate = coherence_bw_hz if line_rate_cap_hz is None else min(coherence_bw_hz, line_rate_cap_hz)
    return M * rate / 1e9


# -- CSV files --

CHANNEL_HEADER = "N,M,freq_hz,tx_power_dbm,noise_psd"
CHANNEL_ROWS = "rx,tx,re,im"
IR_ROWS = "rx,tau_ns,re,im"


def channel_csv(ch: ChannelMatrix) -> str:
    lines = [CHANNEL_HEADER, f"{ch.N},{ch.M},{float(ch.freq_hz)!r},{float(ch.tx_power_dbm)!r},{float(ch.noise_psd)!r}", CHANNEL_ROWS]
    for i in range(ch.N):
        for j in range(ch.M):
            g = ch.gains[i, j]
            lines.append(f"{i},{j},{float(g.real)!r},{float(g.imag)!r}")
    return "\n".join(lines) + "\n"


def save_channel(ch: ChannelMatrix, path) -> None:
    Path(path).write_text(channel_csv(ch))


def _floats(parts, path, lineno, what):
    try:
        vals = [float(x) for x in parts]
    except ValueError:
        raise ValueError(f"{path}:{lineno}: malformed {what} row") from None
    if not all(math.isfinite(v) for v in vals):
        raise ValueError(f"{path}:{lineno}: non-finite value in {what} row")
    return vals


def _data_lines(path):
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, [p.strip() for p in line.split(",")]


def load_channel(path) -> ChannelMatrix:
    header = None
    gains = None
    seen = set()
    for lineno, parts in _data_lines(path):
        if ",".join(parts) in (CHANNEL_HEADER, CHANNEL_ROWS):
            continue
        if header is None:
            if len(parts) != 5:
                raise ValueError(f"{path}:{lineno}: header needs {CHANNEL_HEADER}")
            n, m, freq, pdbm, n0 = _floats(parts, path, lineno, "header")
            if n != int(n) or m != int(m) or n < 1 or m < 1:
                raise ValueError(f"{path}:{lineno}: N and M must be positive integers")
            header = (int(n), int(m), freq, pdbm, n0)
            gains = np.full((header[0], header[1]), np.nan, dtype=complex)
            continue
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected {CHANNEL_ROWS}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: rx/tx must be integers") from None
        re, im = _floats(parts[2:], path, lineno, "gain")
        if not (0 <= i < header[0] and 0 <= j < header[1]):
            raise ValueError(f"{path}:{lineno}: entry ({i},{j}) outside declared {header[0]}x{header[1]}")
        if (i, j) in seen:
            raise ValueError(f"{path}:{lineno}: duplicate entry ({i},{j})")
        seen.add((i, j))
        gains[i, j] = complex(re, im)
    if header is None:
        raise ValueError(f"{path}: missing header")
    if len(seen) != header[0] * header[1]:
        raise ValueError(f"{path}: {len(seen)} entries but header declares N={header[0]}, M={header[1]}")
    return ChannelMatrix(gains, header[2], header[3], header[4])


def save_impulse_responses(irs: ImpulseResponseSet, path) -> None:
    lines = [IR_ROWS]
    for i, (t, a) in enumerate(zip(irs.delays, irs.amps)):
        lines += [f"{i},{float(tau)!r},{float(amp.real)!r},{float(amp.imag)!r}" for tau, amp in zip(t, a)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_impulse_responses(path) -> ImpulseResponseSet:
    taps: dict[int, list] = {}
    for lineno, parts in _data_lines(path):
        if ",".join(parts) == IR_ROWS:
            continue
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected {IR_ROWS}")
        try:
            i = int(parts[0])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: rx must be an integer") from None
        tau, re, im = _floats(parts[1:], path, lineno, "tap")
        if i < 0 or tau < 0:
            raise ValueError(f"{path}:{lineno}: negative receiver index or delay")
        taps.setdefault(i, []).append((tau, complex(re, im)))
    if not taps:
        raise ValueError(f"{path}: no taps")
    n = max(taps) + 1
    missing = set(range(n)) - set(taps)
    if missing:
        raise ValueError(f"{path}: receivers {sorted(missing)} have no taps")
    delays, amps = [], []
    for i in range(n):
        rows = taps[i]
        delays.append([r[0] for r in rows])
        amps.append([r[1] for r in rows])
    return ImpulseResponseSet(delays, amps)
