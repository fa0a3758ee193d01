"""Zone-based firewall: DMZs, access network, Internet and management paths."""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence, Union

__all__ = [
    "ZoneName", "Service", "FwAction", "Member", "Zone", "Endpoint", "AclRule", "Ruleset",
    "NoDefaultRule", "Violation", "permits", "validate_topology", "default_ruleset",
    "default_zones", "ANY",
]

ANY = "any"


class ZoneName(str, Enum):
    PUBLIC_DMZ = "PublicDMZ"
    PRIVATE_DMZ = "PrivateDMZ"
    ACCESS_NET = "AccessNet"
    INTERNET = "Internet"
    MANAGEMENT = "Management"


class Service(str, Enum):
    HTTP = "HTTP"
    HTTPS = "HTTPS"
    DNS = "DNS"
    SQL = "SQL"
    MAIL = "Mail"
    VOIP = "VoIP"
    MGMT = "Mgmt"
    ANY = "Any"


CONCRETE_SERVICES = tuple(s for s in Service if s is not Service.ANY)


class FwAction(str, Enum):
    ALLOW = "Allow"
    DENY = "Deny"


class NoDefaultRule(ValueError):
    pass


IpNet = Union[ipaddress.IPv4Network, ipaddress.IPv6Network]


@dataclass(frozen=True)
class Member:
    address: str
    server_kind: Optional[str] = None  # None means an ordinary host

    @property
    def is_server(self) -> bool:
        return self.server_kind is not None


@dataclass(frozen=True)
class Zone:
    name: ZoneName
    members: tuple[Member, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "name", ZoneName(self.name))
        object.__setattr__(self, "members", tuple(self.members))


@dataclass(frozen=True)
class Endpoint:
    zone: ZoneName
    address: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "zone", ZoneName(self.zone))


def _parse_selector(sel) -> Union[str, ZoneName, IpNet]:
    if isinstance(sel, (ZoneName, ipaddress.IPv4Network, ipaddress.IPv6Network)):
        return sel
    s = str(sel).strip()
    if s.lower() == ANY:
        return ANY
    try:
        return ZoneName(s)
    except ValueError:
        return ipaddress.ip_network(s, strict=False)


def _selector_str(sel) -> str:
    return sel.value if isinstance(sel, ZoneName) else str(sel)


@dataclass(frozen=True)
class AclRule:
    src: Union[str, ZoneName, IpNet]
    dst: Union[str, ZoneName, IpNet]
    service: Service
    action: FwAction

    def __post_init__(self):
        object.__setattr__(self, "src", _parse_selector(self.src))
        object.__setattr__(self, "dst", _parse_selector(self.dst))
        object.__setattr__(self, "service", Service(self.service))
        object.__setattr__(self, "action", FwAction(self.action))

    @property
    def is_catch_all(self) -> bool:
        return self.src == ANY and self.dst == ANY and self.service is Service.ANY

    def to_dict(self) -> dict:
        return {"src": _selector_str(self.src), "dst": _selector_str(self.dst),
                "service": self.service.value, "action": self.action.value}


def _side_matches(sel, ep: Endpoint) -> bool:
    if sel == ANY:
        return True
    if isinstance(sel, ZoneName):
        return ep.zone is sel
    if ep.address is None:
        return False
    addr = ipaddress.ip_address(ep.address)
    return addr.version == sel.version and addr in sel


class Ruleset:
    """Ordered ACL with first-match semantics. The list index is the rule order.

    Rules are bucketed by service at construction so evaluation only scans
    the candidates that could apply to the requested service.
    """

    def __init__(self, rules: Iterable[AclRule]):
        self.rules: tuple[AclRule, ...] = tuple(rules)
        self._by_service = {
            svc: tuple(i for i, r in enumerate(self.rules) if r.service in (svc, Service.ANY))
            for svc in CONCRETE_SERVICES
        }

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)

    @property
    def has_default(self) -> bool:
        return bool(self.rules) and self.rules[-1].is_catch_all

    def first_match(self, src: Endpoint, dst: Endpoint, service: Service) -> int:
        if not self.has_default:
            raise NoDefaultRule("ruleset must end with an any/any/Any rule")
        service = Service(service)
        if service is Service.ANY:
            raise ValueError("evaluate a concrete service, not Any")
        for i in self._by_service[service]:
            r = self.rules[i]
            if _side_matches(r.src, src) and _side_matches(r.dst, dst):
                return i
        raise AssertionError("unreachable: catch-all rule always matches")

    def to_json(self) -> str:
        return json.dumps([r.to_dict() for r in self.rules], indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Ruleset":
        return cls(AclRule(**d) for d in json.loads(text))


def permits(ruleset: Ruleset | Sequence[AclRule], src: Endpoint, dst: Endpoint,
            service: Service) -> FwAction:
    if not isinstance(ruleset, Ruleset):
        ruleset = Ruleset(ruleset)
    return ruleset.rules[ruleset.first_match(src, dst, service)].action


def default_ruleset() -> Ruleset:
    """Public DMZ open to everyone for web and DNS; private DMZ for insiders only."""
    Z = ZoneName
    return Ruleset([
        AclRule(ANY, Z.PUBLIC_DMZ, Service.HTTP, FwAction.ALLOW),
        AclRule(ANY, Z.PUBLIC_DMZ, Service.HTTPS, FwAction.ALLOW),
        AclRule(ANY, Z.PUBLIC_DMZ, Service.DNS, FwAction.ALLOW),
        AclRule(Z.MANAGEMENT, ANY, Service.ANY, FwAction.ALLOW),
        AclRule(ANY, ANY, Service.MGMT, FwAction.DENY),
        AclRule(Z.ACCESS_NET, Z.PRIVATE_DMZ, Service.ANY, FwAction.ALLOW),
        AclRule(Z.ACCESS_NET, Z.INTERNET, Service.ANY, FwAction.ALLOW),
        AclRule(ANY, ANY, Service.ANY, FwAction.DENY),
    ])


def default_zones() -> list[Zone]:
    Z = ZoneName
    return [
        Zone(Z.PUBLIC_DMZ, (Member("172.16.1.10", "web"), Member("172.16.1.53", "dns"))),
        Zone(Z.PRIVATE_DMZ, (Member("172.16.2.10", "mail"), Member("172.16.2.20", "database"),
                             Member("172.16.2.30", "voip"), Member("172.16.2.40", "portal"),
                             Member("172.16.2.67", "dhcp"))),
        Zone(Z.ACCESS_NET, (Member("10.9.0.10"), Member("10.9.0.11"))),
        Zone(Z.INTERNET, (Member("198.51.100.7"),)),
        Zone(Z.MANAGEMENT, (Member("172.16.9.5"),)),
    ]


@dataclass(frozen=True)
class Violation:
    kind: str          # NonServerInDmz | MgmtBackdoor | MissingDefaultDeny
    subject: str
    rule_index: Optional[int] = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "subject": self.subject}
        if self.rule_index is not None:
            d["rule_index"] = self.rule_index
        return d


_DMZS = (ZoneName.PUBLIC_DMZ, ZoneName.PRIVATE_DMZ)


def validate_topology(zones: Sequence[Zone], ruleset: Ruleset | Sequence[AclRule] | None = None
                      ) -> list[Violation]:
    """Report hosts inside DMZs, Mgmt reachable from outside Management, and a missing default deny."""
    if ruleset is None:
        ruleset = default_ruleset()
    elif not isinstance(ruleset, Ruleset):
        ruleset = Ruleset(ruleset)
    out: list[Violation] = []

    for z in zones:
        if z.name in _DMZS:
            for m in z.members:
                if not m.is_server:
                    out.append(Violation("NonServerInDmz", f"{z.name.value}:{m.address}"))

    backdoors: dict[int, str] = {}
    for i, r in enumerate(ruleset.rules):
        if r.action is FwAction.ALLOW and r.service is Service.MGMT and r.src is not ZoneName.MANAGEMENT:
            backdoors.setdefault(i, f"{_selector_str(r.src)}->{_selector_str(r.dst)}")
    if ruleset.has_default:
        # rules that let Mgmt through by way of Service.Any
        endpoints = {z.name: [Endpoint(z.name, m.address) for m in z.members] or [Endpoint(z.name)]
                     for z in zones}
        for zname in ZoneName:
            endpoints.setdefault(zname, [Endpoint(zname)])
        for src_zone, srcs in endpoints.items():
            if src_zone is ZoneName.MANAGEMENT:
                continue
            for src in srcs:
                for dsts in endpoints.values():
                    for dst in dsts:
                        i = ruleset.first_match(src, dst, Service.MGMT)
                        if ruleset.rules[i].action is FwAction.ALLOW:
                            backdoors.setdefault(i, f"{src_zone.value}->{dst.zone.value}")
    for i in sorted(backdoors):
        out.append(Violation("MgmtBackdoor", backdoors[i], i))

    if not (ruleset.has_default and ruleset.rules[-1].action is FwAction.DENY):
        out.append(Violation("MissingDefaultDeny", "ruleset"))
    return out


def _member_from_dict(m: dict) -> Member:
    role = m.get("role", "Server" if m.get("kind") else "Host")
    if role not in ("Server", "Host"):
        raise ValueError(f"member role must be Server or Host, got {role!r}")
    return Member(m["address"], (m.get("kind") or "server") if role == "Server" else None)


def zones_from_json(text: str) -> list[Zone]:
    """Zones document: ``[{name, members: [{address, role, kind}]}]``."""
    return [Zone(d["name"], tuple(_member_from_dict(m) for m in d.get("members", [])))
            for d in json.loads(text)]


def zones_to_json(zones: Sequence[Zone]) -> str:
    return json.dumps([
        {"name": z.name.value,
         "members": [{"address": m.address, "role": "Server" if m.is_server else "Host",
                      **({"kind": m.server_kind} if m.is_server else {})} for m in z.members]}
        for z in zones
    ], indent=2)
