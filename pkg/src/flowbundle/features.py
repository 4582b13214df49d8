"""Per-flow statistical features and the flow CSV schema.

Each direction contributes 17 statistics (34 total per flow); the two
bundle-level slots (num_flows, src_ports_delta) stay empty until the
aggregation step fills them.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .flows import BiFlow
from .pcap import PacketRecord

_DIRECTION_STATS = (
    "pkt_count",
    "byte_count",
    "pkt_len_mean",
    "pkt_len_std",
    "pkt_len_min",
    "pkt_len_max",
    "iat_mean",
    "iat_std",
    "iat_min",
    "iat_max",
    "time_from_first_mean",
    "flag_syn_count",
    "flag_ack_count",
    "flag_fin_count",
    "flag_rst_count",
    "flag_psh_count",
    "flag_urg_count",
)

FLOW_FEATURE_NAMES: list[str] = [
    f"{direction}_{stat}" for direction in ("fwd", "bwd") for stat in _DIRECTION_STATS
]
AGGREGATION_FEATURE_NAMES: list[str] = ["num_flows", "src_ports_delta"]
ALL_FEATURE_NAMES: list[str] = FLOW_FEATURE_NAMES + AGGREGATION_FEATURE_NAMES

_META_COLUMNS = [
    "initiator_ip",
    "initiator_port",
    "responder_ip",
    "responder_port",
    "protocol",
    "start_time",
]
CSV_COLUMNS: list[str] = _META_COLUMNS + FLOW_FEATURE_NAMES + [
    "num_flows",
    "src_ports_delta",
    "label",
]

_INT_FEATURES = frozenset(
    name
    for name in FLOW_FEATURE_NAMES
    if "count" in name
)


class SchemaError(ValueError):
    """Raised when a flow CSV does not match the expected schema."""


@dataclass
class FlowFeatureVector:
    """One flow's identity, its 34 statistics and the aggregation slots."""

    initiator_ip: str
    initiator_port: int
    responder_ip: str
    responder_port: int
    protocol: str
    start_time: float
    values: dict[str, float] = field(default_factory=dict)
    num_flows: int | None = None
    src_ports_delta: float | None = None
    label: str = "benign"

    def feature(self, name: str) -> float:
        if name == "num_flows":
            if self.num_flows is None:
                raise SchemaError("num_flows not populated; run aggregation first")
            return float(self.num_flows)
        if name == "src_ports_delta":
            if self.src_ports_delta is None:
                raise SchemaError(
                    "src_ports_delta not populated; run aggregation first"
                )
            return float(self.src_ports_delta)
        return self.values[name]


def _direction_stats(packets: list[PacketRecord]) -> dict[str, float]:
    stats: dict[str, float] = {name: 0.0 for name in _DIRECTION_STATS}
    if not packets:
        return stats
    lengths = np.array([p.ip_total_length for p in packets], dtype=float)
    times = np.array([p.timestamp for p in packets], dtype=float)

    stats["pkt_count"] = float(len(packets))
    stats["byte_count"] = float(lengths.sum())
    stats["pkt_len_mean"] = float(lengths.mean())
    stats["pkt_len_std"] = float(lengths.std())  # population std
    stats["pkt_len_min"] = float(lengths.min())
    stats["pkt_len_max"] = float(lengths.max())

    if len(packets) >= 2:
        iats = np.diff(times)
        stats["iat_mean"] = float(iats.mean())
        stats["iat_std"] = float(iats.std())
        stats["iat_min"] = float(iats.min())
        stats["iat_max"] = float(iats.max())
        # offsets of every successive packet from the direction's first
        stats["time_from_first_mean"] = float((times[1:] - times[0]).mean())

    for flag in ("syn", "ack", "fin", "rst", "psh", "urg"):
        name = flag.upper()
        stats[f"flag_{flag}_count"] = float(
            sum(1 for p in packets if name in p.tcp_flags)
        )
    return stats


def extract_features(flow: BiFlow, label: str = "benign") -> FlowFeatureVector:
    """Compute the 34 per-flow statistics; aggregation slots stay empty."""
    values: dict[str, float] = {}
    for direction, packets in (("fwd", flow.fwd_packets), ("bwd", flow.bwd_packets)):
        for stat, value in _direction_stats(packets).items():
            values[f"{direction}_{stat}"] = value
    return FlowFeatureVector(
        initiator_ip=flow.initiator[0],
        initiator_port=flow.initiator[1],
        responder_ip=flow.responder[0],
        responder_port=flow.responder[1],
        protocol=flow.key.protocol.name,
        start_time=flow.start_time,
        values=values,
        label=label,
    )


def feature_matrix(
    rows: list[FlowFeatureVector], feature_names: list[str]
) -> np.ndarray:
    """Stack the named features into an (n_rows, n_features) float matrix."""
    out = np.empty((len(rows), len(feature_names)), dtype=float)
    for i, row in enumerate(rows):
        for j, name in enumerate(feature_names):
            out[i, j] = row.feature(name)
    return out


def label_classes(
    rows: list[FlowFeatureVector], class_names: list[str] | None = None
) -> tuple[np.ndarray, list[str]]:
    """Encode row labels as class indices against a stable class list."""
    if class_names is None:
        seen = sorted({row.label for row in rows})
        # benign first so class 0 is the background class by convention
        class_names = [c for c in ("benign",) if c in seen] + [
            c for c in seen if c != "benign"
        ]
    index = {name: i for i, name in enumerate(class_names)}
    try:
        y = np.array([index[row.label] for row in rows], dtype=int)
    except KeyError as exc:
        raise SchemaError(f"label {exc.args[0]!r} not in class list {class_names}")
    return y, class_names


def _format_value(name: str, value: float | int | None) -> str:
    if value is None:
        return ""
    if name in _INT_FEATURES or name == "num_flows":
        return str(int(value))
    return f"{float(value):.6f}"


def write_features_csv(rows: list[FlowFeatureVector], path: str | Path) -> None:
    """Write flows using the documented column order, floats at 6 d.p."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            record = [
                row.initiator_ip,
                str(row.initiator_port),
                row.responder_ip,
                str(row.responder_port),
                row.protocol,
                f"{row.start_time:.6f}",
            ]
            record += [
                _format_value(name, row.values[name]) for name in FLOW_FEATURE_NAMES
            ]
            record.append(_format_value("num_flows", row.num_flows))
            record.append(_format_value("src_ports_delta", row.src_ports_delta))
            record.append(row.label)
            writer.writerow(record)


def read_features_csv(path: str | Path) -> list[FlowFeatureVector]:
    """Load a flow CSV written by write_features_csv; validates the header."""
    rows: list[FlowFeatureVector] = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header row")
        if header != CSV_COLUMNS:
            raise SchemaError(
                f"{path}: header mismatch; expected {len(CSV_COLUMNS)} documented "
                f"columns starting {CSV_COLUMNS[:3]}, got {header[:3]}"
            )
        for line_no, record in enumerate(reader, start=2):
            if len(record) != len(CSV_COLUMNS):
                raise SchemaError(
                    f"{path}:{line_no}: expected {len(CSV_COLUMNS)} fields, "
                    f"got {len(record)}"
                )
            values = {
                name: float(record[6 + i])
                for i, name in enumerate(FLOW_FEATURE_NAMES)
            }
            raw_num_flows = record[6 + len(FLOW_FEATURE_NAMES)]
            raw_delta = record[7 + len(FLOW_FEATURE_NAMES)]
            rows.append(
                FlowFeatureVector(
                    initiator_ip=record[0],
                    initiator_port=int(record[1]),
                    responder_ip=record[2],
                    responder_port=int(record[3]),
                    protocol=record[4],
                    start_time=float(record[5]),
                    values=values,
                    num_flows=int(raw_num_flows) if raw_num_flows else None,
                    src_ports_delta=float(raw_delta) if raw_delta else None,
                    label=record[-1],
                )
            )
    return rows


def relabel(rows: list[FlowFeatureVector], label: str) -> list[FlowFeatureVector]:
    return [dataclasses.replace(row, label=label) for row in rows]


def validate_vector(row: FlowFeatureVector) -> None:
    """Sanity checks used by tests: ordering and non-negativity invariants."""
    for direction in ("fwd", "bwd"):
        count = row.values[f"{direction}_pkt_count"]
        if count >= 1:
            lo = row.values[f"{direction}_pkt_len_min"]
            mid = row.values[f"{direction}_pkt_len_mean"]
            hi = row.values[f"{direction}_pkt_len_max"]
            if not (lo <= mid + 1e-9 and mid <= hi + 1e-9):
                raise AssertionError(f"{direction} packet length ordering broken")
        if count >= 2:
            lo = row.values[f"{direction}_iat_min"]
            mid = row.values[f"{direction}_iat_mean"]
            hi = row.values[f"{direction}_iat_max"]
            if not (lo <= mid + 1e-9 and mid <= hi + 1e-9):
                raise AssertionError(f"{direction} IAT ordering broken")
        if row.values[f"{direction}_pkt_len_std"] < 0:
            raise AssertionError("negative std")
        if count > 0 and row.values[f"{direction}_byte_count"] < 20 * count:
            raise AssertionError("byte count below IPv4 header minimum")
    for value in row.values.values():
        if math.isnan(value) or math.isinf(value):
            raise AssertionError("non-finite feature value")
