import ipaddress

import pytest
from hypothesis import given, settings, strategies as st

from byodsim.net_model import (
    AccessPoint, ApKind, Band, CampusNetwork, Channel, ClientDevice, DhcpPool, IncompatibleTech,
    IpSupport, PoolExhausted, TopologyError, UnsupportedDevice, associate, dhcp_assign,
    eui64_interface_id, knust_network, mac_from_slaac, normalize_mac, slaac_assign,
)

import oracles

PREFIX = "2001:db8::/64"
PREFIX_HI = int(ipaddress.IPv6Address("2001:db8::")) >> 64

macs = st.integers(0, 2**48 - 1).map(lambda n: ":".join(f"{b:02x}" for b in n.to_bytes(6, "big")))


def dual(mac):
    return ClientDevice(mac=mac, ip_support=IpSupport.DUAL_STACK)


# --- SLAAC -------------------------------------------------------------------

@pytest.mark.parametrize("mac,expected", [
    # frozen from oracles.eui64_address
    ("00:1B:44:11:3A:B7", "2001:db8::21b:44ff:fe11:3ab7"),
    ("02:00:00:00:00:01", "2001:db8::ff:fe00:1"),
])
def test_slaac_known_addresses(mac, expected):
    assert slaac_assign(dual(mac), PREFIX) == ipaddress.IPv6Address(expected)
    assert int(ipaddress.IPv6Address(expected)) == oracles.eui64_address(mac, PREFIX_HI)


def test_slaac_rejects_v4_only_device():
    with pytest.raises(UnsupportedDevice):
        slaac_assign(ClientDevice(mac="00:1b:44:11:3a:b7"), PREFIX)


def test_slaac_needs_slash_64():
    with pytest.raises(ValueError):
        slaac_assign(dual("00:1b:44:11:3a:b7"), "2001:db8::/48")


@given(macs)
def test_slaac_matches_oracle_and_inverts(mac):
    addr = slaac_assign(dual(mac), PREFIX)
    assert int(addr) == oracles.eui64_address(mac, PREFIX_HI)
    assert addr == slaac_assign(dual(mac), PREFIX)
    assert mac_from_slaac(addr) == normalize_mac(mac)


@given(macs)
def test_interface_id_has_fffe_in_the_middle(mac):
    iid = eui64_interface_id(mac)
    assert (iid >> 24) & 0xFFFF == 0xFFFE


def test_mac_from_slaac_rejects_non_eui64():
    with pytest.raises(ValueError):
        mac_from_slaac("2001:db8::1")


# --- DHCP --------------------------------------------------------------------

def test_dhcp_copies_gateway_and_suffix():
    net = knust_network()
    a = dhcp_assign(net, ClientDevice(mac="00:11:22:33:44:55"), 0.0)
    assert str(a.gateway) == "10.9.0.5"
    assert a.dns_suffix == "knust.edu.gh"
    assert a.v4 in ipaddress.IPv4Network("10.9.0.0/16")
    assert a.v4 != a.gateway


def test_dhcp_renewal_keeps_address():
    net = knust_network()
    dev = ClientDevice(mac="00:11:22:33:44:55")
    first = dhcp_assign(net, dev, 0.0)
    again = dhcp_assign(net, dev, 100.0)
    assert again.v4 == first.v4
    assert again.lease_start == 100.0


def test_dhcp_skips_gateway():
    pool = DhcpPool("10.0.0.0/29", "10.0.0.1", "x")
    got = {pool.assign(f"00:00:00:00:00:{i:02x}", 0.0).v4 for i in range(5)}
    assert ipaddress.IPv4Address("10.0.0.1") not in got
    assert len(got) == 5


def test_pool_exhaustion():
    pool = DhcpPool("10.0.0.0/30", "10.0.0.3", "x")  # two usable hosts
    pool.assign("00:00:00:00:00:01", 0.0)
    pool.assign("00:00:00:00:00:02", 0.0)
    with pytest.raises(PoolExhausted):
        pool.assign("00:00:00:00:00:03", 10.0)


def test_lapsed_lease_is_reclaimed_when_pool_is_full():
    pool = DhcpPool("10.0.0.0/30", "10.0.0.3", "x", lease_seconds=60)
    a = pool.assign("00:00:00:00:00:01", 0.0)
    pool.assign("00:00:00:00:00:02", 30.0)
    c = pool.assign("00:00:00:00:00:03", 61.0)
    assert c.v4 == a.v4
    assert pool.lease_for("00:00:00:00:00:01") is None


def test_returning_device_gets_old_address_back():
    pool = DhcpPool("10.0.0.0/24", "10.0.0.1", "x", lease_seconds=60)
    a = pool.assign("00:00:00:00:00:01", 0.0)
    pool.assign("00:00:00:00:00:02", 0.0)
    assert pool.assign("00:00:00:00:00:01", 500.0).v4 == a.v4


def test_released_address_is_reused():
    pool = DhcpPool("10.0.0.0/30", "10.0.0.3", "x")
    a = pool.assign("00:00:00:00:00:01", 0.0)
    pool.assign("00:00:00:00:00:02", 0.0)
    pool.release("00:00:00:00:00:01")
    assert pool.assign("00:00:00:00:00:03", 1.0).v4 == a.v4


def test_dual_stack_lease_carries_slaac_address():
    net = knust_network(v6_prefix=PREFIX)
    dev = dual("00:1b:44:11:3a:b7")
    a = dhcp_assign(net, dev, 0.0)
    assert a.v6 == ipaddress.IPv6Address("2001:db8::21b:44ff:fe11:3ab7")
    assert dhcp_assign(net, ClientDevice(mac="00:1b:44:11:3a:b8"), 0.0).v6 is None


ops = st.lists(st.tuples(st.sampled_from(["assign", "release"]), st.integers(0, 9),
                         st.floats(0, 50, allow_nan=False)), max_size=60)


@settings(max_examples=200)
@given(ops)
def test_no_two_active_leases_share_an_address(seq):
    pool = DhcpPool("10.0.0.0/29", "10.0.0.1", "x", lease_seconds=20)
    now = 0.0
    for op, i, dt in seq:
        now += dt
        mac = f"00:00:00:00:00:{i:02x}"
        if op == "assign":
            try:
                lease = pool.assign(mac, now)
            except PoolExhausted:
                assert len(pool.active_leases(now)) == 6
                continue
            assert lease.v4 != pool.gateway and lease.v4 in pool.network
        else:
            pool.release(mac)
        active = pool.active_leases(now)
        addrs = [l.v4 for l in active.values()]
        assert len(addrs) == len(set(addrs))


# --- association / topology ---------------------------------------------------

def dual_ap():
    return AccessPoint("ap", ApKind.AUTONOMOUS, 1,
                       (Channel(Band.GHZ_2_4, 300), Channel(Band.GHZ_5, 300)), "s")


def test_n_device_takes_5ghz():
    assoc = associate(ClientDevice(mac="00:00:00:00:00:01", wifi_tech={"802.11n"}), dual_ap())
    assert assoc.channel.band is Band.GHZ_5


def test_b_device_takes_2_4ghz():
    assoc = associate(ClientDevice(mac="00:00:00:00:00:01", wifi_tech={"802.11b"}), dual_ap())
    assert assoc.channel.band is Band.GHZ_2_4


def test_a_device_on_2_4_only_ap_is_incompatible():
    ap = AccessPoint("ap", ApKind.AUTONOMOUS, 1, (Channel(Band.GHZ_2_4, 300),), "s")
    with pytest.raises(IncompatibleTech):
        associate(ClientDevice(mac="00:00:00:00:00:01", wifi_tech={"802.11a"}), ap)


def test_n_device_on_2_4_only_ap_falls_back():
    ap = AccessPoint("ap", ApKind.AUTONOMOUS, 1, (Channel(Band.GHZ_2_4, 300),), "s")
    assert associate(ClientDevice(mac="00:00:00:00:00:01"), ap).channel.band is Band.GHZ_2_4


@pytest.mark.parametrize("kwargs", [
    dict(kind=ApKind.LIGHTWEIGHT, tier=2, parent=None),
    dict(kind=ApKind.LIGHTWEIGHT, tier=1, parent="ap1"),
    dict(kind=ApKind.AUTONOMOUS, tier=3),
])
def test_ap_invariants(kwargs):
    with pytest.raises(TopologyError):
        AccessPoint("x", channels=(Channel(Band.GHZ_5, 300),), ssid="s", **kwargs)


def test_dual_channel_needs_both_bands():
    with pytest.raises(TopologyError):
        AccessPoint("x", ApKind.AUTONOMOUS, 1, (Channel(Band.GHZ_5, 300), Channel(Band.GHZ_5, 300)), "s")


def test_channel_rate_positive():
    with pytest.raises(TopologyError):
        Channel(Band.GHZ_5, 0)


def test_device_needs_wifi_tech():
    with pytest.raises(ValueError):
        ClientDevice(mac="00:00:00:00:00:01", wifi_tech=set())


def test_network_rejects_duplicate_ids_and_zero_wan():
    ap = dual_ap()
    pool = DhcpPool("10.0.0.0/24", "10.0.0.1", "x")
    with pytest.raises(TopologyError):
        CampusNetwork(100, [ap, ap], pool)
    with pytest.raises(TopologyError):
        CampusNetwork(0, [ap], pool)


def test_network_json_round_trip():
    net = knust_network(3, v6_prefix=PREFIX, host_isolation=True)
    doc = net.to_dict()
    assert doc["wan_mbps"] == 144.0
    assert doc["dhcp"]["gateway"] == "10.9.0.5"
    again = CampusNetwork.from_dict(doc)
    assert again.to_dict() == doc
    assert again.ap("ap2").parent == "ap1"
