"""Classic pcap reading and writing for IPv4 TCP/UDP traffic.

Only the legacy pcap container is handled (magic 0xA1B2C3D4 and its
byte-swapped / nanosecond variants), not pcapng.  Frames that are not
IPv4 TCP/UDP (ARP, IPv6, VLAN-tagged, fragments, ...) are skipped and
counted rather than raised, so real captures parse cleanly.
"""

from __future__ import annotations

import enum
import socket
import struct
from dataclasses import dataclass, field
from pathlib import Path

TCP_FLAG_NAMES = ("SYN", "ACK", "FIN", "RST", "PSH", "URG")

_TCP_FLAG_BITS = {
    "FIN": 0x01,
    "SYN": 0x02,
    "RST": 0x04,
    "PSH": 0x08,
    "ACK": 0x10,
    "URG": 0x20,
}

LINKTYPE_ETHERNET = 1
LINKTYPE_RAW_IP = 101

# magic bytes -> (struct byte order, ticks per second of the sub-second field)
_MAGICS = {
    b"\xa1\xb2\xc3\xd4": (">", 1_000_000),
    b"\xd4\xc3\xb2\xa1": ("<", 1_000_000),
    b"\xa1\xb2\x3c\x4d": (">", 1_000_000_000),
    b"\x4d\x3c\xb2\xa1": ("<", 1_000_000_000),
}


class Protocol(enum.Enum):
    """Transport protocols carried through the pipeline."""

    TCP = 6
    UDP = 17


class PcapFormatError(ValueError):
    """Raised for unreadable pcap structure (bad magic, truncation, ...)."""


@dataclass(frozen=True)
class PacketRecord:
    """One parsed packet: capture timestamp, 5-tuple, size and TCP flags."""

    timestamp: float
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    protocol: Protocol
    ip_total_length: int
    tcp_flags: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")
        for port in (self.src_port, self.dst_port):
            if not 0 <= port <= 65535:
                raise ValueError(f"port {port} out of range")
        unknown = set(self.tcp_flags) - set(TCP_FLAG_NAMES)
        if unknown:
            raise ValueError(f"unknown TCP flags {sorted(unknown)}")
        # the flag set is empty exactly when the packet is UDP
        if self.protocol is Protocol.UDP and self.tcp_flags:
            raise ValueError("UDP packet cannot carry TCP flags")
        if self.protocol is Protocol.TCP and not self.tcp_flags:
            raise ValueError("TCP packet must carry at least one flag")
        min_len = 20 + (20 if self.protocol is Protocol.TCP else 8)
        if self.ip_total_length < min_len:
            raise ValueError(
                f"ip_total_length {self.ip_total_length} below {min_len} "
                f"minimum for {self.protocol.name}"
            )


@dataclass
class PcapRead:
    """Result of reading a capture: accepted packets plus skip accounting."""

    packets: list[PacketRecord]
    link_type: int
    skipped: int = 0
    skipped_by_reason: dict[str, int] = field(default_factory=dict)


def _skip(result: PcapRead, reason: str) -> None:
    result.skipped += 1
    result.skipped_by_reason[reason] = result.skipped_by_reason.get(reason, 0) + 1


def _parse_ipv4(ip_bytes: bytes, timestamp: float, result: PcapRead) -> None:
    if len(ip_bytes) < 20:
        _skip(result, "malformed")
        return
    version = ip_bytes[0] >> 4
    if version != 4:
        _skip(result, "non_ipv4")
        return
    ihl = (ip_bytes[0] & 0x0F) * 4
    if ihl < 20 or len(ip_bytes) < ihl:
        _skip(result, "malformed")
        return
    total_length = struct.unpack_from("!H", ip_bytes, 2)[0]
    frag = struct.unpack_from("!H", ip_bytes, 6)[0]
    if frag & 0x2000 or frag & 0x1FFF:  # MF set or non-zero offset
        _skip(result, "fragment")
        return
    proto = ip_bytes[9]
    if proto not in (Protocol.TCP.value, Protocol.UDP.value):
        _skip(result, "non_tcp_udp")
        return
    src_ip = socket.inet_ntoa(ip_bytes[12:16])
    dst_ip = socket.inet_ntoa(ip_bytes[16:20])
    transport = ip_bytes[ihl:]
    if proto == Protocol.TCP.value:
        if len(transport) < 20 or total_length < ihl + 20:
            _skip(result, "malformed")
            return
        src_port, dst_port = struct.unpack_from("!HH", transport, 0)
        flag_bits = transport[13]
        flags = frozenset(
            name for name, bit in _TCP_FLAG_BITS.items() if flag_bits & bit
        )
        if not flags:
            # null-flag TCP segments have no representation downstream
            _skip(result, "malformed")
            return
        record = PacketRecord(
            timestamp=timestamp,
            src_ip=src_ip,
            dst_ip=dst_ip,
            src_port=src_port,
            dst_port=dst_port,
            protocol=Protocol.TCP,
            ip_total_length=total_length,
            tcp_flags=flags,
        )
    else:
        if len(transport) < 8 or total_length < ihl + 8:
            _skip(result, "malformed")
            return
        src_port, dst_port = struct.unpack_from("!HH", transport, 0)
        record = PacketRecord(
            timestamp=timestamp,
            src_ip=src_ip,
            dst_ip=dst_ip,
            src_port=src_port,
            dst_port=dst_port,
            protocol=Protocol.UDP,
            ip_total_length=total_length,
        )
    result.packets.append(record)


def read_pcap(path: str | Path) -> PcapRead:
    """Parse a classic pcap file into PacketRecords, in file order.

    Non-IPv4 frames, fragments, VLAN-tagged frames and non-TCP/UDP
    packets are counted in ``skipped_by_reason``.  Structural problems
    (bad magic, truncated records, unsupported link type) raise
    PcapFormatError naming the byte offset.
    """
    data = Path(path).read_bytes()
    if len(data) < 24:
        raise PcapFormatError(
            f"{path}: file too short for pcap global header ({len(data)} bytes)"
        )
    magic = data[:4]
    if magic not in _MAGICS:
        raise PcapFormatError(f"{path}: bad magic {magic.hex()} at offset 0")
    order, ticks = _MAGICS[magic]
    _version_major, _version_minor, _tz, _sigfigs, _snaplen, link_type = struct.unpack(
        order + "HHiIII", data[4:24]
    )
    if link_type not in (LINKTYPE_ETHERNET, LINKTYPE_RAW_IP):
        raise PcapFormatError(f"{path}: unsupported link type {link_type}")

    result = PcapRead(packets=[], link_type=link_type)
    offset = 24
    rec_header = struct.Struct(order + "IIII")
    while offset < len(data):
        if offset + 16 > len(data):
            raise PcapFormatError(
                f"{path}: truncated record header at byte offset {offset}"
            )
        ts_sec, ts_frac, incl_len, _orig_len = rec_header.unpack_from(data, offset)
        frame_start = offset + 16
        if frame_start + incl_len > len(data):
            raise PcapFormatError(
                f"{path}: truncated packet data at byte offset {frame_start} "
                f"(need {incl_len} bytes)"
            )
        timestamp = (ts_sec * ticks + ts_frac) / ticks
        frame = data[frame_start : frame_start + incl_len]
        if link_type == LINKTYPE_ETHERNET:
            if len(frame) < 14:
                _skip(result, "malformed")
            else:
                ethertype = struct.unpack_from("!H", frame, 12)[0]
                if ethertype == 0x8100:
                    _skip(result, "vlan")
                elif ethertype != 0x0800:
                    _skip(result, "non_ipv4")
                else:
                    _parse_ipv4(frame[14:], timestamp, result)
        else:
            _parse_ipv4(frame, timestamp, result)
        offset = frame_start + incl_len
    return result


def _ip_checksum(header: bytes) -> int:
    total = 0
    for i in range(0, len(header), 2):
        total += (header[i] << 8) + header[i + 1]
    while total > 0xFFFF:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _mac_for(ip: str) -> bytes:
    # locally administered MAC derived from the IPv4 address
    return bytes([0x02, 0x00]) + socket.inet_aton(ip)


def _build_frame(rec: PacketRecord, ip_id: int) -> bytes:
    transport_min = 20 if rec.protocol is Protocol.TCP else 8
    payload_len = rec.ip_total_length - 20 - transport_min
    payload = bytes(payload_len)
    src = socket.inet_aton(rec.src_ip)
    dst = socket.inet_aton(rec.dst_ip)

    if rec.protocol is Protocol.TCP:
        flag_bits = 0
        for name in rec.tcp_flags:
            flag_bits |= _TCP_FLAG_BITS[name]
        transport = struct.pack(
            "!HHIIBBHHH",
            rec.src_port,
            rec.dst_port,
            0,
            0,
            5 << 4,
            flag_bits,
            65535,
            0,
            0,
        )
        pseudo = src + dst + struct.pack("!BBH", 0, 6, len(transport) + payload_len)
        csum_input = pseudo + transport + payload
        if len(csum_input) % 2:
            csum_input += b"\x00"
        checksum = _ip_checksum(csum_input)
        transport = transport[:16] + struct.pack("!H", checksum) + transport[18:]
    else:
        # zero UDP checksum means "not computed" and is legal for IPv4
        transport = struct.pack(
            "!HHHH", rec.src_port, rec.dst_port, 8 + payload_len, 0
        )

    header = struct.pack(
        "!BBHHHBBH4s4s",
        0x45,
        0,
        rec.ip_total_length,
        ip_id & 0xFFFF,
        0x4000,  # DF, never a fragment
        64,
        rec.protocol.value,
        0,
        src,
        dst,
    )
    header = header[:10] + struct.pack("!H", _ip_checksum(header)) + header[12:]
    eth = _mac_for(rec.dst_ip) + _mac_for(rec.src_ip) + struct.pack("!H", 0x0800)
    return eth + header + transport + payload


def write_pcap(packets: list[PacketRecord], path: str | Path) -> None:
    """Write packets as a classic microsecond pcap with Ethernet framing.

    Packets must already be in non-decreasing timestamp order; timestamps
    are stored at microsecond resolution, so feeding quantized timestamps
    round-trips exactly through read_pcap.
    """
    for prev, cur in zip(packets, packets[1:]):
        if cur.timestamp < prev.timestamp:
            raise ValueError("packets must be sorted by timestamp before writing")
    out = bytearray()
    out += struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, LINKTYPE_ETHERNET)
    for i, rec in enumerate(packets):
        frame = _build_frame(rec, ip_id=i)
        total_us = round(rec.timestamp * 1_000_000)
        ts_sec, ts_usec = divmod(total_us, 1_000_000)
        out += struct.pack("<IIII", ts_sec, ts_usec, len(frame), len(frame))
        out += frame
    Path(path).write_bytes(bytes(out))
