"""Analytical area / energy / latency / throughput model of the wireless
interconnect versus a wired chiplet mesh with a central majority chiplet.

Energies are reported in pJ per end-to-end bundled-query delivery: collect
the M queries, compute their majority, distribute the bundle to N search
engines and run one search per engine.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

# 32 nm technology; areas in mm^2. Interconnect energies are pJ/bit unless
# the unit says otherwise; IMC energies are nJ per 512x64 MVM.
DEFAULT_TABLES = {
    "imc": {
        "crossbar": {"area_mm2": 0.09, "energy": 0.27, "unit": "nJ/op", "source": "PCM crossbar 512x64"},
        "pwm": {"area_mm2": 0.20, "energy": 8.79, "unit": "nJ/op", "source": "PWM peripherals"},
        "adc": {"area_mm2": 0.01, "energy": 6.23, "unit": "nJ/op", "source": "CCO-based ADC"},
    },
    "majority": {
        "gate": {"area_mm2": 0.32, "energy": 0.17, "unit": "pJ/bit", "source": "5-input majority gate, 512 wide"},
        "buffer": {"area_mm2": 0.009, "energy": 0.005, "unit": "pJ/op", "source": "I/O buffer, per access"},
    },
    "wired": {
        "router": {"area_mm2": 0.36, "energy": 0.03, "unit": "pJ/bit", "source": "4-stage router"},
        "link_onchip": {"area_mm2": 4e-4, "energy": 0.06, "unit": "pJ/bit", "source": "on-chip link"},
        "link_offchip": {"area_mm2": 0.25, "energy": 1.0, "unit": "pJ/bit", "source": "serial link, per pin, 16 Gb/s"},
    },
    "wireless": {
        "serdes": {"area_mm2": 0.04, "energy": 0.54, "unit": "pJ/bit", "source": "SerDes"},
        "converter": {"area_mm2": 0.03, "energy": 0.07, "unit": "pJ/bit", "source": "data converter"},
        "transmitter": {"area_mm2": 0.12, "energy": 1.5, "unit": "pJ/bit", "source": "60 GHz TX, 10 Gb/s"},
        "receiver": {"area_mm2": 0.12, "energy": 1.3, "unit": "pJ/bit", "source": "60 GHz RX, 10 Gb/s"},
        "antenna": {"area_mm2": 0.08, "energy": 0.0, "unit": "pJ/bit", "source": "on-chip antenna"},
    },
}
MAJORITY_REF_INPUTS = 5
MAJORITY_EXPONENT = 3.5


@dataclass(frozen=True)
class ComponentCost:
    name: str
    area_mm2: float
    energy: float
    unit: str
    source: str = ""

    def __post_init__(self):
        if self.area_mm2 < 0 or self.energy < 0:
            raise ValueError(f"{self.name}: negative cost")
        if not self.unit:
            raise ValueError(f"{self.name}: missing unit")


class CostTables:
    """Component costs keyed by group and name, loadable from JSON."""

    def __init__(self, tables: dict | None = None):
        merged = copy.deepcopy(DEFAULT_TABLES)
        for group, comps in (tables or {}).items():
            for name, vals in comps.items():
                merged.setdefault(group, {}).setdefault(name, {}).update(vals)
        self.tables = merged

    def __getitem__(self, key: tuple[str, str]) -> ComponentCost:
        group, name = key
        return ComponentCost(name, **self.tables[group][name])

    @classmethod
    def load(cls, path) -> "CostTables":
        return cls(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.tables, indent=2) + "\n")


@dataclass
class SystemConfig:
    M: int = 3
    N: int = 8
    d: int = 512
    wireless_rate_gbps: float = 10.0
    wired_link_gbps: float = 16.0
    router_cycles: int = 4
    clock_ghz: float = 1.0

    def __post_init__(self):
        if self.M < 0 or self.N < 1:
            raise ValueError("need M >= 0 encoders and N >= 1 search engines")
        for name in ("d", "wireless_rate_gbps", "wired_link_gbps", "router_cycles", "clock_ghz"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class CostRow:
    subsystem: str  # interconnect | majority | search
    component: str
    count: float
    area_mm2: float
    energy_pj: float


@dataclass
class CostReport:
    system: str
    rows: list[CostRow] = field(default_factory=list)
    latency_ns: float = 0.0
    throughput_gbps: float = 0.0

    def area(self, subsystem: str | None = None) -> float:
        return sum(r.area_mm2 for r in self.rows if subsystem in (None, r.subsystem))

    def energy(self, subsystem: str | None = None) -> float:
        return sum(r.energy_pj for r in self.rows if subsystem in (None, r.subsystem))

    def totals(self) -> dict:
        out = {}
        for sub in ("interconnect", "majority", "search"):
            out[sub] = {"area_mm2": self.area(sub), "energy_pj": self.energy(sub)}
        out["total"] = {"area_mm2": self.area(), "energy_pj": self.energy()}
        return out

    def to_csv(self) -> str:
        lines = ["system,subsystem,component,count,area_mm2,energy_pj"]
        lines += [f"{self.system},{r.subsystem},{r.component},{r.count:g},{float(r.area_mm2)!r},{float(r.energy_pj)!r}"
                  for r in self.rows]
        for sub, t in self.totals().items():
            lines.append(f"{self.system},{sub},TOTAL,,{float(t['area_mm2'])!r},{float(t['energy_pj'])!r}")
        lines.append(f"{self.system},latency_ns,,,{float(self.latency_ns)!r},")
        lines.append(f"{self.system},throughput_gbps,,,{float(self.throughput_gbps)!r},")
        return "\n".join(lines) + "\n"

    def pretty(self) -> str:
        lines = [f"[{self.system}]"]
        for r in self.rows:
            lines.append(f"  {r.subsystem:<12} {r.component:<14} x{r.count:<7g} {r.area_mm2:10.4f} mm2 {r.energy_pj:14.2f} pJ")
        for sub, t in self.totals().items():
            lines.append(f"  {sub:<12} {'TOTAL':<14} {'':8} {t['area_mm2']:10.4f} mm2 {t['energy_pj']:14.2f} pJ")
        lines.append(f"  latency {self.latency_ns:.2f} ns, throughput {self.throughput_gbps:.1f} Gb/s")
        return "\n".join(lines)


def imc_cost(engines: int, tables: CostTables | None = None) -> ComponentCost:
    """Total area (mm^2) and per-search energy (nJ) of ``engines`` IMC cores."""
    if engines < 1:
        raise ValueError("need at least one search engine")
    tables = tables or CostTables()
    parts = [tables["imc", k] for k in ("crossbar", "pwm", "adc")]
    return ComponentCost("imc", engines * sum(p.area_mm2 for p in parts),
                         engines * sum(p.energy for p in parts), "nJ/op", "IMC 512x64 MVM")


def _search_rows(cfg: SystemConfig, tables: CostTables) -> list[CostRow]:
    one = imc_cost(1, tables)
    return [CostRow("search", "imc", cfg.N, cfg.N * one.area_mm2, cfg.N * one.energy * 1e3)]


def majority_scale(M: int) -> float:
    """Gate-count scaling of an M-input majority relative to the 5-input datum."""
    return (M / MAJORITY_REF_INPUTS) ** MAJORITY_EXPONENT


def mesh_hops(M: int, N: int) -> float:
    """Average hop count between two chiplets of the mesh."""
    return 2 * math.sqrt(M + N) / 3


def hop_latency_ns(cfg: SystemConfig) -> float:
    return cfg.router_cycles / cfg.clock_ghz + cfg.d / cfg.wired_link_gbps


def wired_cost(cfg: SystemConfig, tables: CostTables | None = None) -> CostReport:
    """Wired mesh baseline.

    Accounting policy: every chiplet in the mesh (M encoders, N engines and
    the majority chiplet) carries one router and one off-chip link endpoint
    pair; the majority chiplet adds the M-input gate and an input and output
    buffer. Queries travel the average hop count to the majority chiplet and
    the bundle is unicast back to every engine.
    """
    tables = tables or CostTables()
    router, link = tables["wired", "router"], tables["wired", "link_offchip"]
    gate, buf = tables["majority", "gate"], tables["majority", "buffer"]
    chiplets = cfg.M + cfg.N + 1
    hops = mesh_hops(cfg.M, cfg.N)
    transfers = cfg.M + cfg.N  # hypervector deliveries, each over `hops` hops
    bits_hops = transfers * cfg.d * hops
    scale = majority_scale(cfg.M)
    rows = [
        CostRow("interconnect", "router", chiplets, chiplets * router.area_mm2, bits_hops * router.energy),
        CostRow("interconnect", "link_offchip", 2 * chiplets, 2 * chiplets * link.area_mm2, bits_hops * link.energy),
        CostRow("majority", "gate", 1, gate.area_mm2 * scale, cfg.d * gate.energy * scale),
        CostRow("majority", "buffer", 2, 2 * buf.area_mm2, (2 * cfg.M + 2) * buf.energy),
    ]
    rows += _search_rows(cfg, tables)
    return CostReport("wired", rows, hops * hop_latency_ns(cfg), 2 * cfg.wired_link_gbps)


def wireless_cost(cfg: SystemConfig, tables: CostTables | None = None) -> CostReport:
    """Wireless interconnect: every node has SerDes, converter and antenna;
    encoders add a transmitter, engines a receiver. Majority is computed by
    the channel, so it costs nothing."""
    tables = tables or CostTables()
    serdes, conv, ant = (tables["wireless", k] for k in ("serdes", "converter", "antenna"))
    tx, rx = tables["wireless", "transmitter"], tables["wireless", "receiver"]
    nodes = cfg.M + cfg.N
    # every TX sends d bits; every RX receives d bits
    endpoint_bits = nodes * cfg.d
    rows = [
        CostRow("interconnect", "serdes", nodes, nodes * serdes.area_mm2, endpoint_bits * serdes.energy),
        CostRow("interconnect", "converter", nodes, nodes * conv.area_mm2, endpoint_bits * conv.energy),
        CostRow("interconnect", "antenna", nodes, nodes * ant.area_mm2, endpoint_bits * ant.energy),
    ]
    if cfg.M:
        rows.append(CostRow("interconnect", "transmitter", cfg.M, cfg.M * tx.area_mm2, cfg.M * cfg.d * tx.energy))
    rows.append(CostRow("interconnect", "receiver", cfg.N, cfg.N * rx.area_mm2, cfg.N * cfg.d * rx.energy))
    rows += _search_rows(cfg, tables)
    latency = cfg.d / cfg.wireless_rate_gbps
    return CostReport("wireless", rows, latency, cfg.wireless_rate_gbps * cfg.M * cfg.N)


def compare(cfg: SystemConfig, tables: CostTables | None = None) -> dict:
    wired, wireless = wired_cost(cfg, tables), wireless_cost(cfg, tables)

    def ratio(a, b):
        return a / b if b else math.inf

    return {
        "wired": wired,
        "wireless": wireless,
        "ratios": {
            "interconnect_area": ratio(wired.area("interconnect"), wireless.area("interconnect")),
            "interconnect_energy": ratio(wired.energy("interconnect"), wireless.energy("interconnect")),
            "total_area": ratio(wired.area(), wireless.area()),
            "total_energy": ratio(wired.energy(), wireless.energy()),
            "latency": ratio(wired.latency_ns, wireless.latency_ns),
            "throughput": ratio(wireless.throughput_gbps, wired.throughput_gbps),
        },
    }


def sweep_rx(M: int, n_values, tables: CostTables | None = None, **cfg_kw) -> list[dict]:
    """Interconnect area/energy of both systems for each receiver count."""
    out = []
    for n in n_values:
        cmp = compare(SystemConfig(M=M, N=n, **cfg_kw), tables)
        w, wl = cmp["wired"], cmp["wireless"]
        out.append({
            "N": n,
            "wired_area_mm2": w.area("interconnect"),
            "wireless_area_mm2": wl.area("interconnect"),
            "wired_energy_pj": w.energy("interconnect"),
            "wireless_energy_pj": wl.energy("interconnect"),
            "wired_latency_ns": w.latency_ns,
            "wireless_latency_ns": wl.latency_ns,
        })
    return out
