"""Deterministic synthetic traffic scenarios with ground-truth labels.

The benign-mimicking class draws its per-flow packet sizes and timing
from the same distributions as benign traffic, so individual flows are
indistinguishable by construction; only its many-flows-per-source and
small-step sequential source ports separate it at the bundle level.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .flows import BiFlow
from .pcap import PacketRecord, Protocol, write_pcap  # noqa: F401  (re-export)

EPHEMERAL_RANGE = (32768, 61000)
_BASE_EPOCH = 1_600_000_000.0  # scenario clock origin, an arbitrary 2020 instant


class LabelError(ValueError):
    """A flow could not be matched to the scenario's label manifest."""


@dataclass
class TrafficClassSpec:
    """Behaviour of one traffic class inside a scenario."""

    label: str
    n_sources: int
    flows_per_source: tuple[int, int]  # inclusive uniform range
    data_exchanges: tuple[int, int] = (1, 5)  # request/response pairs per flow
    pkt_len_mean: float = 520.0
    pkt_len_std: float = 160.0
    iat_mean: float = 0.4
    port_pattern: str = "ephemeral"  # ephemeral | sequential | fixed
    port_step: int = 1
    fixed_port: int = 55555
    flow_shape: str = "exchange"  # exchange | scan
    protocol: str = "TCP"
    single_target: bool = False  # pin every flow of a source to one server
    scan_port_base: int = 1024

    def __post_init__(self) -> None:
        if self.n_sources < 1:
            raise ValueError(f"class {self.label!r} needs at least one source host")
        if self.flows_per_source[0] < 1:
            raise ValueError("flows_per_source lower bound must be >= 1")
        if self.port_pattern not in ("ephemeral", "sequential", "fixed"):
            raise ValueError(f"unknown port pattern {self.port_pattern!r}")
        if self.flow_shape not in ("exchange", "scan"):
            raise ValueError(f"unknown flow shape {self.flow_shape!r}")
        if self.protocol not in ("TCP", "UDP"):
            raise ValueError("protocol must be TCP or UDP")


@dataclass
class ScenarioSpec:
    seed: int
    duration: float
    classes: list[TrafficClassSpec]
    n_servers: int = 4

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.n_servers < 1:
            raise ValueError("need at least one server host")
        if not self.classes:
            raise ValueError("scenario has no traffic classes")


@dataclass(frozen=True)
class FlowLabel:
    initiator_ip: str
    initiator_port: int
    responder_ip: str
    responder_port: int
    protocol: str
    start_time: float
    label: str


@dataclass
class GeneratedTraffic:
    packets: list[PacketRecord]
    manifest: list[FlowLabel]


def _quantize(t: float) -> float:
    return round(t * 1_000_000) / 1_000_000


def _flow_key_of(
    ip: str, port: int, rip: str, rport: int, proto: str, start: float
) -> tuple:
    return (ip, port, rip, rport, proto, round(start * 1_000_000))


def _draw_length(rng: np.random.Generator, cls: TrafficClassSpec) -> int:
    raw = rng.normal(cls.pkt_len_mean, cls.pkt_len_std)
    return int(np.clip(round(raw), 60, 1500))


def _build_flow(
    rng: np.random.Generator,
    cls: TrafficClassSpec,
    src_ip: str,
    src_port: int,
    dst_ip: str,
    dst_port: int,
    start: float,
) -> list[PacketRecord]:
    if cls.flow_shape == "scan":
        steps = [(True, {"SYN"}), (False, {"RST", "ACK"})]
    elif cls.protocol == "UDP":
        n = int(rng.integers(cls.data_exchanges[0], cls.data_exchanges[1] + 1))
        steps = [(i % 2 == 0, None) for i in range(2 * n + 2)]
    else:
        n = int(rng.integers(cls.data_exchanges[0], cls.data_exchanges[1] + 1))
        steps = (
            [(True, {"SYN"}), (False, {"SYN", "ACK"}), (True, {"ACK"})]
            + [(True, {"PSH", "ACK"}), (False, {"ACK"})] * n
            + [(True, {"FIN", "ACK"}), (False, {"FIN", "ACK"}), (True, {"ACK"})]
        )
    packets = []
    t = start
    for i, (forward, flags) in enumerate(steps):
        if i > 0:
            t += rng.exponential(cls.iat_mean)
        ts = _quantize(t)
        length = _draw_length(rng, cls)
        if cls.protocol == "UDP":
            length = max(length, 28)
            proto = Protocol.UDP
            flagset: frozenset[str] = frozenset()
        else:
            proto = Protocol.TCP
            flagset = frozenset(flags or set())
        packets.append(
            PacketRecord(
                timestamp=ts,
                src_ip=src_ip if forward else dst_ip,
                dst_ip=dst_ip if forward else src_ip,
                src_port=src_port if forward else dst_port,
                dst_port=dst_port if forward else src_port,
                protocol=proto,
                ip_total_length=length,
                tcp_flags=flagset,
            )
        )
    return packets


def _source_ports(
    rng: np.random.Generator, cls: TrafficClassSpec, n_flows: int
) -> list[int]:
    if cls.port_pattern == "ephemeral":
        lo, hi = EPHEMERAL_RANGE
        return [int(p) for p in rng.choice(np.arange(lo, hi), n_flows, replace=False)]
    if cls.port_pattern == "sequential":
        base = int(rng.integers(20000, 40000))
        return [base + i * cls.port_step for i in range(n_flows)]
    return [cls.fixed_port] * n_flows


def generate(spec: ScenarioSpec) -> GeneratedTraffic:
    """Emit all scenario packets (timestamp-sorted) plus the label manifest."""
    rng = np.random.default_rng(spec.seed)
    servers = [f"192.168.10.{10 + i}" for i in range(spec.n_servers)]
    packets: list[PacketRecord] = []
    manifest: list[FlowLabel] = []

    for class_index, cls in enumerate(spec.classes):
        for source_index in range(cls.n_sources):
            src_ip = (
                f"10.{20 + class_index}.{source_index // 250}."
                f"{source_index % 250 + 1}"
            )
            n_flows = int(
                rng.integers(cls.flows_per_source[0], cls.flows_per_source[1] + 1)
            )
            sports = _source_ports(rng, cls, n_flows)
            starts = np.sort(rng.uniform(0.0, spec.duration, n_flows))
            pinned = servers[int(rng.integers(0, len(servers)))]
            for flow_index in range(n_flows):
                if cls.flow_shape == "scan":
                    dst_ip = pinned
                    dst_port = cls.scan_port_base + flow_index
                else:
                    dst_ip = (
                        pinned
                        if cls.single_target
                        else servers[int(rng.integers(0, len(servers)))]
                    )
                    dst_port = 80
                start = _quantize(_BASE_EPOCH + float(starts[flow_index]))
                flow_packets = _build_flow(
                    rng, cls, src_ip, sports[flow_index], dst_ip, dst_port, start
                )
                packets.extend(flow_packets)
                manifest.append(
                    FlowLabel(
                        initiator_ip=src_ip,
                        initiator_port=sports[flow_index],
                        responder_ip=dst_ip,
                        responder_port=dst_port,
                        protocol=cls.protocol,
                        start_time=start,
                        label=cls.label,
                    )
                )

    packets.sort(key=lambda p: p.timestamp)
    return GeneratedTraffic(packets=packets, manifest=manifest)


def match_labels(flows: list[BiFlow], manifest: list[FlowLabel]) -> list[str]:
    """Label each assembled flow from the manifest; unmatched flows raise."""
    lookup = {
        _flow_key_of(
            e.initiator_ip,
            e.initiator_port,
            e.responder_ip,
            e.responder_port,
            e.protocol,
            e.start_time,
        ): e.label
        for e in manifest
    }
    labels = []
    for flow in flows:
        key = _flow_key_of(
            flow.initiator[0],
            flow.initiator[1],
            flow.responder[0],
            flow.responder[1],
            flow.key.protocol.name,
            flow.start_time,
        )
        label = lookup.get(key)
        if label is None:
            raise LabelError(
                f"assembled flow {key} has no manifest entry; "
                "scenario and capture are out of sync"
            )
        labels.append(label)
    return labels


# ---------------------------------------------------------------------------
# scenario presets

_SCALES = {"desk": 1.0, "small": 0.15}


def _scaled_sources(n: int, scale: str) -> int:
    return max(1, round(n * _SCALES[scale]))


def mimicking_scenario(seed: int, scale: str = "desk") -> ScenarioSpec:
    """Benign plus a slow-DoS-like class that mimics benign flow statistics.

    Desk scale targets roughly 2,000 benign and 550 attack flows.
    """
    shared = dict(pkt_len_mean=520.0, pkt_len_std=160.0, iat_mean=0.4)
    return ScenarioSpec(
        seed=seed,
        duration=600.0,
        classes=[
            TrafficClassSpec(
                label="benign",
                n_sources=_scaled_sources(125, scale),
                flows_per_source=(8, 24),
                data_exchanges=(1, 5),
                **shared,
            ),
            TrafficClassSpec(
                label="slowloris",
                n_sources=_scaled_sources(10, scale),
                flows_per_source=(48, 64),
                data_exchanges=(1, 5),
                port_pattern="sequential",
                port_step=3,
                single_target=True,
                **shared,
            ),
        ],
    )


def full_scenario(seed: int, scale: str = "desk") -> ScenarioSpec:
    """Benign plus four attack classes for the multi-class experiments.

    Portscan and the flood are flow-distinguishable; the two slow-DoS
    classes reuse the benign distributions and differ only in bundling.
    """
    benign_like = dict(pkt_len_mean=520.0, pkt_len_std=160.0, iat_mean=0.4)
    return ScenarioSpec(
        seed=seed,
        duration=600.0,
        classes=[
            TrafficClassSpec(
                label="benign",
                n_sources=_scaled_sources(40, scale),
                flows_per_source=(10, 20),
                data_exchanges=(1, 5),
                **benign_like,
            ),
            TrafficClassSpec(
                label="portscan",
                n_sources=_scaled_sources(2, scale),
                flows_per_source=(100, 120),
                flow_shape="scan",
                pkt_len_mean=60.0,
                pkt_len_std=4.0,
                iat_mean=0.05,
                port_pattern="sequential",
                port_step=1,
                single_target=True,
            ),
            TrafficClassSpec(
                label="hulk",
                n_sources=_scaled_sources(4, scale),
                flows_per_source=(45, 60),
                data_exchanges=(8, 16),
                pkt_len_mean=900.0,
                pkt_len_std=120.0,
                iat_mean=0.02,
                port_pattern="ephemeral",
                single_target=True,
            ),
            TrafficClassSpec(
                label="slowloris",
                n_sources=_scaled_sources(5, scale),
                flows_per_source=(30, 40),
                data_exchanges=(1, 5),
                port_pattern="sequential",
                port_step=2,
                single_target=True,
                **benign_like,
            ),
            TrafficClassSpec(
                label="slowhttptest",
                n_sources=_scaled_sources(5, scale),
                flows_per_source=(28, 36),
                data_exchanges=(1, 5),
                port_pattern="sequential",
                port_step=4,
                single_target=True,
                **benign_like,
            ),
        ],
    )


def fig2_traffic(seed: int = 0) -> GeneratedTraffic:
    """Replay of the four-host bundling timeline: A starts 4 flows, B 2, D 1, C 1."""
    rng = np.random.default_rng(seed)
    hosts = {name: f"10.0.0.{i + 1}" for i, name in enumerate("ABCD")}
    pattern = [
        ("A", "B"),
        ("A", "B"),
        ("A", "C"),
        ("A", "D"),
        ("B", "C"),
        ("B", "C"),
        ("D", "B"),
        ("C", "A"),
    ]
    cls = TrafficClassSpec(
        label="benign",
        n_sources=1,
        flows_per_source=(1, 1),
        data_exchanges=(1, 1),
        iat_mean=0.2,
    )
    lo, hi = EPHEMERAL_RANGE
    sports = [int(p) for p in rng.choice(np.arange(lo, hi), len(pattern), False)]
    packets: list[PacketRecord] = []
    manifest: list[FlowLabel] = []
    for i, (src, dst) in enumerate(pattern):
        start = _quantize(_BASE_EPOCH + 0.5 * i)
        flow_packets = _build_flow(
            rng, cls, hosts[src], sports[i], hosts[dst], 80, start
        )
        packets.extend(flow_packets)
        manifest.append(
            FlowLabel(
                initiator_ip=hosts[src],
                initiator_port=sports[i],
                responder_ip=hosts[dst],
                responder_port=80,
                protocol="TCP",
                start_time=start,
                label="benign",
            )
        )
    packets.sort(key=lambda p: p.timestamp)
    return GeneratedTraffic(packets=packets, manifest=manifest)


SCENARIOS = ("mimicking", "full", "fig2")


def build_scenario(name: str, seed: int, scale: str = "desk") -> GeneratedTraffic:
    if scale not in _SCALES:
        raise ValueError(f"scale must be one of {sorted(_SCALES)}")
    if name == "mimicking":
        return generate(mimicking_scenario(seed, scale))
    if name == "full":
        return generate(full_scenario(seed, scale))
    if name == "fig2":
        return fig2_traffic(seed)
    raise ValueError(f"unknown scenario {name!r}; choose from {SCENARIOS}")


# ---------------------------------------------------------------------------
# manifest and spec files

_LABEL_COLUMNS = [
    "initiator_ip",
    "initiator_port",
    "responder_ip",
    "responder_port",
    "protocol",
    "start_time",
    "label",
]


def write_labels_csv(manifest: list[FlowLabel], path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(_LABEL_COLUMNS)
        for entry in manifest:
            writer.writerow(
                [
                    entry.initiator_ip,
                    str(entry.initiator_port),
                    entry.responder_ip,
                    str(entry.responder_port),
                    entry.protocol,
                    f"{entry.start_time:.6f}",
                    entry.label,
                ]
            )


def read_labels_csv(path: str | Path) -> list[FlowLabel]:
    manifest = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != _LABEL_COLUMNS:
            raise LabelError(f"{path}: unexpected label manifest header {header}")
        for record in reader:
            manifest.append(
                FlowLabel(
                    initiator_ip=record[0],
                    initiator_port=int(record[1]),
                    responder_ip=record[2],
                    responder_port=int(record[3]),
                    protocol=record[4],
                    start_time=float(record[5]),
                    label=record[6],
                )
            )
    return manifest


def load_scenario_spec(path: str | Path) -> ScenarioSpec:
    """Read a custom ScenarioSpec from a JSON file."""
    doc = json.loads(Path(path).read_text())
    try:
        classes = [
            TrafficClassSpec(
                **{
                    **entry,
                    "flows_per_source": tuple(entry["flows_per_source"]),
                    "data_exchanges": tuple(
                        entry.get("data_exchanges", (1, 5))
                    ),
                }
            )
            for entry in doc["classes"]
        ]
        return ScenarioSpec(
            seed=int(doc["seed"]),
            duration=float(doc["duration"]),
            n_servers=int(doc.get("n_servers", 4)),
            classes=classes,
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: invalid scenario spec ({exc})")
