import numpy as np
import pytest

from flowbundle.pcap import PacketRecord, Protocol


def tcp_packet(
    ts,
    src="10.0.0.1",
    dst="10.0.0.2",
    sport=40000,
    dport=80,
    length=60,
    flags=("ACK",),
):
    return PacketRecord(
        timestamp=ts,
        src_ip=src,
        dst_ip=dst,
        src_port=sport,
        dst_port=dport,
        protocol=Protocol.TCP,
        ip_total_length=length,
        tcp_flags=frozenset(flags),
    )


def udp_packet(ts, src="10.0.0.1", dst="10.0.0.2", sport=40000, dport=53, length=64):
    return PacketRecord(
        timestamp=ts,
        src_ip=src,
        dst_ip=dst,
        src_port=sport,
        dst_port=dport,
        protocol=Protocol.UDP,
        ip_total_length=length,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
