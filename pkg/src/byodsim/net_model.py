"""Campus network topology, DHCP leasing and dual-stack addressing."""

from __future__ import annotations

import heapq
import ipaddress
import re
from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Iterable, Optional

__all__ = [
    "Band", "ApKind", "SecurityMode", "IpSupport",
    "Channel", "AccessPoint", "ClientDevice", "OsInfo", "AntivirusInfo", "Driver",
    "DhcpPool", "IpAssignment", "CampusNetwork", "Association",
    "PoolExhausted", "UnsupportedDevice", "IncompatibleTech", "TopologyError",
    "normalize_mac", "dhcp_assign", "slaac_assign", "eui64_interface_id",
    "mac_from_slaac", "associate", "knust_network",
]

DEFAULT_LEASE_SECONDS = 3600


class Band(str, Enum):
    GHZ_2_4 = "2.4GHz"
    GHZ_5 = "5GHz"


class ApKind(str, Enum):
    AUTONOMOUS = "Autonomous"
    LIGHTWEIGHT = "Lightweight"


class SecurityMode(str, Enum):
    OPEN = "Open"
    WEP = "WEP"
    WPA = "WPA"
    WPA2 = "WPA2"


class IpSupport(str, Enum):
    V4_ONLY = "V4Only"
    DUAL_STACK = "DualStack"


# 802.11n runs on either band; b/g are 2.4 GHz only, a is 5 GHz only.
TECH_BANDS = {
    "802.11b": {Band.GHZ_2_4},
    "802.11g": {Band.GHZ_2_4},
    "802.11a": {Band.GHZ_5},
    "802.11n": {Band.GHZ_2_4, Band.GHZ_5},
}


class TopologyError(ValueError):
    """A topology document or object violates a structural invariant."""


class PoolExhausted(RuntimeError):
    pass


class UnsupportedDevice(ValueError):
    pass


class IncompatibleTech(ValueError):
    pass


_MAC_RE = re.compile(r"^[0-9a-f]{2}([:-]?[0-9a-f]{2}){5}$")


def normalize_mac(mac: str) -> str:
    """Return ``mac`` as lowercase colon-separated hex (``00:1b:44:11:3a:b7``)."""
    m = mac.strip().lower()
    if not _MAC_RE.match(m):
        raise ValueError(f"not a 48-bit MAC address: {mac!r}")
    digits = m.replace(":", "").replace("-", "")
    return ":".join(digits[i:i + 2] for i in range(0, 12, 2))


@dataclass(frozen=True)
class Channel:
    band: Band
    raw_rate: float  # Mbps

    def __post_init__(self):
        object.__setattr__(self, "band", Band(self.band))
        if not self.raw_rate > 0:
            raise TopologyError(f"channel raw_rate must be > 0, got {self.raw_rate}")


@dataclass(frozen=True)
class AccessPoint:
    id: str
    kind: ApKind
    tier: int
    channels: tuple[Channel, ...]
    ssid: str
    security_mode: SecurityMode = SecurityMode.OPEN
    location: str = ""
    parent: Optional[str] = None  # AAP id or controller label, for lightweight APs

    def __post_init__(self):
        object.__setattr__(self, "kind", ApKind(self.kind))
        object.__setattr__(self, "security_mode", SecurityMode(self.security_mode))
        object.__setattr__(self, "channels", tuple(self.channels))
        if self.tier not in (1, 2):
            raise TopologyError(f"AP {self.id}: tier must be 1 or 2")
        if not self.channels:
            raise TopologyError(f"AP {self.id}: at least one channel required")
        if self.kind is ApKind.LIGHTWEIGHT and (self.tier != 2 or not self.parent):
            raise TopologyError(
                f"AP {self.id}: lightweight APs sit at tier 2 under a parent AAP or controller"
            )
        bands = [c.band for c in self.channels]
        if len(bands) == 2 and sorted(bands) != sorted([Band.GHZ_2_4, Band.GHZ_5]):
            raise TopologyError(f"AP {self.id}: dual-channel APs need one 2.4 GHz and one 5 GHz channel")
        if len(bands) > 2:
            raise TopologyError(f"AP {self.id}: at most two channels")

    @property
    def raw_capacity(self) -> float:
        return sum(c.raw_rate for c in self.channels)

    def channel(self, band: Band) -> Optional[Channel]:
        for c in self.channels:
            if c.band is band:
                return c
        return None


@dataclass(frozen=True)
class OsInfo:
    name: str
    version: str
    date: Optional[date] = None


@dataclass(frozen=True)
class AntivirusInfo:
    product: str
    version: str
    definitions_date: date


@dataclass(frozen=True)
class Driver:
    vendor: str
    version: str


@dataclass(frozen=True)
class ClientDevice:
    """MDM identity of a user-owned device. ``device_id`` defaults to the MAC."""

    mac: str
    name: str = ""
    model: str = ""
    serial_imei: str = ""
    manufacturer: str = ""
    manufacture_date: Optional[date] = None
    os: OsInfo = OsInfo("unknown", "")
    ip_support: IpSupport = IpSupport.V4_ONLY
    wifi_tech: frozenset[str] = frozenset({"802.11n"})
    antivirus: Optional[AntivirusInfo] = None
    drivers: tuple[Driver, ...] = ()
    device_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "mac", normalize_mac(self.mac))
        object.__setattr__(self, "ip_support", IpSupport(self.ip_support))
        object.__setattr__(self, "wifi_tech", frozenset(self.wifi_tech))
        object.__setattr__(self, "drivers", tuple(self.drivers))
        if not self.device_id:
            object.__setattr__(self, "device_id", self.mac)
        if not self.wifi_tech:
            raise ValueError("wifi_tech must be non-empty")
        unknown = self.wifi_tech - TECH_BANDS.keys()
        if unknown:
            raise ValueError(f"unknown wifi technologies: {sorted(unknown)}")

    @property
    def bands(self) -> set[Band]:
        out: set[Band] = set()
        for tech in self.wifi_tech:
            out |= TECH_BANDS[tech]
        return out


@dataclass(frozen=True)
class IpAssignment:
    v4: ipaddress.IPv4Address
    gateway: ipaddress.IPv4Address
    dns_suffix: str
    lease_start: float
    lease_seconds: float
    v6: Optional[ipaddress.IPv6Address] = None

    @property
    def expires_at(self) -> float:
        return self.lease_start + self.lease_seconds

    def active(self, now: float) -> bool:
        return now < self.expires_at


class DhcpPool:
    """IPv4 address pool with per-MAC leases.

    Addresses are the usable hosts of ``cidr`` minus the gateway. Allocation
    hands out the lowest free address; a device that comes back after its
    lease lapsed gets its old address again if nobody has taken it.
    Not thread-safe: callers serialize mutation.
    """

    def __init__(self, cidr: str, gateway: str, dns_suffix: str,
                 lease_seconds: float = DEFAULT_LEASE_SECONDS):
        self.network = ipaddress.IPv4Network(cidr, strict=False)
        self.gateway = ipaddress.IPv4Address(gateway)
        self.dns_suffix = dns_suffix
        if lease_seconds <= 0:
            raise TopologyError("lease duration must be positive")
        self.lease_seconds = lease_seconds
        self._leases: dict[str, IpAssignment] = {}   # mac -> latest lease
        self._holder: dict[ipaddress.IPv4Address, str] = {}  # address -> mac
        self._cursor = self._addresses()
        self._released: list[ipaddress.IPv4Address] = []  # heap of returned addresses

    def _addresses(self):
        for host in self.network.hosts():
            if host != self.gateway:
                yield host

    def lease_for(self, mac: str) -> Optional[IpAssignment]:
        return self._leases.get(normalize_mac(mac))

    def active_leases(self, now: float) -> dict[str, IpAssignment]:
        return {m: a for m, a in self._leases.items() if a.active(now)}

    def _pick(self, mac: str, now: float) -> ipaddress.IPv4Address:
        prev = self._leases.get(mac)
        if prev is not None and self._holder.get(prev.v4) == mac:
            return prev.v4
        # Returned and untouched addresses first (lowest wins), then reclaim lapsed leases.
        while self._released:
            addr = heapq.heappop(self._released)
            if addr not in self._holder:
                return addr
        for addr in self._cursor:
            if addr not in self._holder:
                return addr
        for addr, holder in sorted(self._holder.items()):
            if not self._leases[holder].active(now):
                return addr
        raise PoolExhausted(f"no free address in {self.network}")

    def assign(self, mac: str, now: float, v6: Optional[ipaddress.IPv6Address] = None) -> IpAssignment:
        mac = normalize_mac(mac)
        addr = self._pick(mac, now)
        old_holder = self._holder.get(addr)
        if old_holder is not None and old_holder != mac:
            del self._leases[old_holder]
        lease = IpAssignment(
            v4=addr, gateway=self.gateway, dns_suffix=self.dns_suffix,
            lease_start=now, lease_seconds=self.lease_seconds, v6=v6,
        )
        self._leases[mac] = lease
        self._holder[addr] = mac
        return lease

    def release(self, mac: str) -> None:
        lease = self._leases.pop(normalize_mac(mac), None)
        if lease is not None and self._holder.get(lease.v4) == normalize_mac(mac):
            del self._holder[lease.v4]
            heapq.heappush(self._released, lease.v4)


@dataclass
class CampusNetwork:
    wan_mbps: float
    aps: list[AccessPoint]
    dhcp: DhcpPool
    v6_prefix: Optional[ipaddress.IPv6Network] = None
    host_isolation: bool = False

    def __post_init__(self):
        if not self.wan_mbps > 0:
            raise TopologyError("wan link bandwidth must be > 0")
        ids = [ap.id for ap in self.aps]
        if len(ids) != len(set(ids)):
            raise TopologyError("access point ids must be unique")
        by_id = {ap.id: ap for ap in self.aps}
        for ap in self.aps:
            parent = by_id.get(ap.parent) if ap.parent else None
            if parent is not None and parent.kind is not ApKind.AUTONOMOUS:
                raise TopologyError(f"AP {ap.id}: parent {parent.id} is not autonomous")
        if self.v6_prefix is not None:
            self.v6_prefix = _v6_prefix(self.v6_prefix)

    def ap(self, ap_id: str) -> AccessPoint:
        for ap in self.aps:
            if ap.id == ap_id:
                return ap
        raise KeyError(ap_id)

    @classmethod
    def from_dict(cls, doc: dict) -> "CampusNetwork":
        dhcp = doc["dhcp"]
        aps = [
            AccessPoint(
                id=a["id"], kind=a["kind"], tier=int(a["tier"]),
                channels=tuple(Channel(c["band"], float(c["mbps"])) for c in a["channels"]),
                ssid=a["ssid"], security_mode=a.get("security", "Open"),
                location=a.get("location", ""), parent=a.get("parent"),
            )
            for a in doc.get("aps", [])
        ]
        pool = DhcpPool(dhcp["cidr"], dhcp["gateway"], dhcp["dns_suffix"],
                        dhcp.get("lease_s", DEFAULT_LEASE_SECONDS))
        v6 = doc.get("v6_prefix")
        return cls(
            wan_mbps=float(doc["wan_mbps"]), aps=aps, dhcp=pool,
            v6_prefix=ipaddress.IPv6Network(v6) if v6 else None,
            host_isolation=bool(doc.get("host_isolation", False)),
        )

    def to_dict(self) -> dict:
        aps = []
        for ap in self.aps:
            entry = {
                "id": ap.id, "kind": ap.kind.value, "tier": ap.tier,
                "channels": [{"band": c.band.value, "mbps": c.raw_rate} for c in ap.channels],
                "ssid": ap.ssid, "security": ap.security_mode.value, "location": ap.location,
            }
            if ap.parent:
                entry["parent"] = ap.parent
            aps.append(entry)
        return {
            "wan_mbps": self.wan_mbps,
            "dhcp": {
                "cidr": str(self.dhcp.network), "gateway": str(self.dhcp.gateway),
                "dns_suffix": self.dhcp.dns_suffix, "lease_s": self.dhcp.lease_seconds,
            },
            "v6_prefix": str(self.v6_prefix) if self.v6_prefix else None,
            "host_isolation": self.host_isolation,
            "aps": aps,
        }


def _v6_prefix(prefix) -> ipaddress.IPv6Network:
    net = ipaddress.IPv6Network(prefix, strict=False) if not isinstance(prefix, ipaddress.IPv6Network) else prefix
    if net.prefixlen != 64:
        raise ValueError(f"SLAAC needs a /64 prefix, got /{net.prefixlen}")
    return net


def eui64_interface_id(mac: str) -> int:
    """64-bit modified EUI-64 interface identifier for ``mac``."""
    octets = bytearray(bytes.fromhex(normalize_mac(mac).replace(":", "")))
    octets[0] ^= 0x02
    return int.from_bytes(bytes(octets[:3]) + b"\xff\xfe" + bytes(octets[3:]), "big")


def slaac_assign(device: ClientDevice, v6_prefix) -> ipaddress.IPv6Address:
    if device.ip_support is not IpSupport.DUAL_STACK:
        raise UnsupportedDevice(f"{device.device_id} is IPv4-only")
    net = _v6_prefix(v6_prefix)
    return ipaddress.IPv6Address(int(net.network_address) | eui64_interface_id(device.mac))


def mac_from_slaac(addr) -> str:
    """Invert the EUI-64 expansion of a SLAAC address back to the MAC."""
    iid = (int(ipaddress.IPv6Address(addr)) & ((1 << 64) - 1)).to_bytes(8, "big")
    if iid[3:5] != b"\xff\xfe":
        raise ValueError(f"{addr} does not carry an EUI-64 interface identifier")
    raw = bytearray(iid[:3] + iid[5:])
    raw[0] ^= 0x02
    return ":".join(f"{b:02x}" for b in raw)


def dhcp_assign(network: CampusNetwork, device: ClientDevice, now: float) -> IpAssignment:
    """Lease an IPv4 address (plus a SLAAC v6 address on dual-stack networks)."""
    v6 = None
    if network.v6_prefix is not None and device.ip_support is IpSupport.DUAL_STACK:
        v6 = slaac_assign(device, network.v6_prefix)
    return network.dhcp.assign(device.mac, now, v6=v6)


@dataclass(frozen=True)
class Association:
    device_id: str
    ap_id: str
    channel: Channel


def associate(device: ClientDevice, ap: AccessPoint) -> Association:
    five = ap.channel(Band.GHZ_5)
    if five is not None and device.wifi_tech & {"802.11a", "802.11n"}:
        return Association(device.device_id, ap.id, five)
    two = ap.channel(Band.GHZ_2_4)
    if two is not None and Band.GHZ_2_4 in device.bands:
        return Association(device.device_id, ap.id, two)
    raise IncompatibleTech(
        f"{device.device_id} ({sorted(device.wifi_tech)}) shares no band with AP {ap.id}"
    )


def knust_network(n_aps: int = 1, *, raw_rate: float = 300.0, host_isolation: bool = False,
                  security: SecurityMode = SecurityMode.OPEN, v6_prefix: Optional[str] = None,
                  lease_seconds: float = DEFAULT_LEASE_SECONDS) -> CampusNetwork:
    """The observed WIFI-KNUST layout: 144 Mbps WAN, 10.9.0.5 gateway, dual-channel APs.

    The first AP is autonomous (tier 1); the rest are lightweight APs under it.
    """
    aps: list[AccessPoint] = []
    for i in range(n_aps):
        lightweight = i > 0
        aps.append(AccessPoint(
            id=f"ap{i + 1}",
            kind=ApKind.LIGHTWEIGHT if lightweight else ApKind.AUTONOMOUS,
            tier=2 if lightweight else 1,
            channels=(Channel(Band.GHZ_2_4, raw_rate), Channel(Band.GHZ_5, raw_rate)),
            ssid="WIFI-KNUST", security_mode=security,
            location=f"venue-{i + 1}", parent="ap1" if lightweight else None,
        ))
    return CampusNetwork(
        wan_mbps=144.0, aps=aps,
        dhcp=DhcpPool("10.9.0.0/16", "10.9.0.5", "knust.edu.gh", lease_seconds),
        v6_prefix=ipaddress.IPv6Network(v6_prefix) if v6_prefix else None,
        host_isolation=host_isolation,
    )


def iter_macs(start: int = 0x02_00_00_00_00_00) -> Iterable[str]:
    """Locally administered MACs in sequence; handy for synthetic fleets."""
    n = start
    while True:
        yield ":".join(f"{b:02x}" for b in n.to_bytes(6, "big"))
        n += 1
