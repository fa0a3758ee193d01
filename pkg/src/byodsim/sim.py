"""Deterministic discrete-event simulation of a campus BYOD WLAN.

Clients connect, lease an address, pass (or fail) NAC posture checks, log in
through the captive portal when the policy has one, and then browse once per
``browse_interval`` simulated seconds. Everything random comes from one
``numpy`` generator seeded from the scenario. Events at the same instant
(to the nanosecond) run expiries and departures before arrivals and browsing,
then by insertion sequence, so a run is a pure function of its scenario.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from datetime import timedelta
from enum import Enum
from typing import Optional

import numpy as np

from .access_control import (
    SIM_EPOCH, CertVerdict, Certificate, PostureRules, Registry, nac_gate,
)
from .audit import AccessLevel, AuditLog, EventKind, SuspicionFlag, SuspicionKind, Traffic, What, detect_suspicion
from .capacity import DegradationFactors, effective_ap_throughput
from .net_model import (
    AntivirusInfo, CampusNetwork, ClientDevice, Driver, IncompatibleTech, IpSupport, OsInfo,
    SecurityMode, associate, dhcp_assign, knust_network,
)
from .policy import AccessRequest, Action, PolicyConfig, Protocol, apply_cap, evaluate_request, resolve_policy
from .portal import (
    AuthFailed, CertificateRejected, Directory, DirectoryUnavailable, Gateway, InterceptKind, RedirectMode,
)

__all__ = [
    "Venue", "Probe", "Outcome", "ClientMix", "Scenario", "Metrics", "SimResult", "Simulation",
    "InvalidScenario", "run", "probe_outsider_join", "probe_eavesdrop", "probe_discovery",
    "probe_cert_clone", "CertCloneResult", "VENUE_BANDS", "DEFAULT_POSTURE_RULES",
]


class InvalidScenario(ValueError):
    pass


class Venue(str, Enum):
    CLASSROOM = "Classroom"
    LECTURE_HALL = "LectureHall"
    PUBLIC_VENUE = "PublicVenue"


VENUE_BANDS = {
    Venue.CLASSROOM: (10, 500),
    Venue.LECTURE_HALL: (20, 1000),
    Venue.PUBLIC_VENUE: (100, 2000),
}


class Probe(str, Enum):
    OUTSIDER_JOIN = "OutsiderJoin"
    EAVESDROP = "Eavesdrop"
    DISCOVERY = "Discovery"
    CERT_CLONE = "CertClone"


class Outcome(str, Enum):
    SUCCEEDED = "Succeeded"
    PREVENTED = "Prevented"


POSTURE_KINDS = ("compliant", "outdated_av", "no_av", "discontinued_os", "banned_driver")

DEFAULT_POSTURE_RULES = PostureRules(
    max_av_definition_age=30,
    discontinued_os=frozenset({("Windows XP", "SP3"), ("Android", "2.3")}),
    banned_drivers=frozenset({("AcmeNet", "0.9-compromised")}),
)

DEFAULT_DOMAINS = ("knust.edu.gh", "wikipedia.org", "example.com", "youtube.com", "scholar.google.com")
DEFAULT_PROTOCOLS = {"HTTP": 0.35, "HTTPS": 0.55, "FTP": 0.05, "P2P": 0.05}


@dataclass(frozen=True)
class ClientMix:
    wifi_tech: dict = field(default_factory=lambda: {"802.11n": 1.0})
    posture: dict = field(default_factory=lambda: {"compliant": 1.0})
    dual_stack: float = 0.0

    def __post_init__(self):
        for name, dist in (("wifi_tech", self.wifi_tech), ("posture", self.posture)):
            if not dist or any(v < 0 for v in dist.values()) or sum(dist.values()) <= 0:
                raise InvalidScenario(f"client_mix.{name} must be a non-empty distribution")
        bad = set(self.posture) - set(POSTURE_KINDS)
        if bad:
            raise InvalidScenario(f"unknown posture kinds {sorted(bad)}")
        if not 0 <= self.dual_stack <= 1:
            raise InvalidScenario("client_mix.dual_stack must be a fraction")

    def to_dict(self) -> dict:
        return {"wifi_tech": dict(self.wifi_tech), "posture": dict(self.posture),
                "dual_stack": self.dual_stack}


@dataclass
class Scenario:
    venue: Venue = Venue.CLASSROOM
    n_clients: int = 50
    policy: PolicyConfig | str = "v5"
    factors: DegradationFactors = DegradationFactors()
    duration: float = 600.0
    seed: int = 0
    client_mix: ClientMix = ClientMix()
    probes: frozenset = frozenset()
    network: Optional[CampusNetwork] = None
    browse_interval: float = 10.0
    redirect_mode: RedirectMode = RedirectMode.DNS_HIJACK
    login_fail_rate: float = 0.0
    directory_outage_rate: float = 0.0
    stay_seconds: Optional[float] = None
    cert_validity: float = 30 * 86400.0
    cert_per_request: bool = False  # verify the certificate on every request, not only at login
    posture_rules: PostureRules = DEFAULT_POSTURE_RULES
    domains: tuple = DEFAULT_DOMAINS
    protocols: dict = field(default_factory=lambda: dict(DEFAULT_PROTOCOLS))
    metadata: dict = field(default_factory=lambda: {"availability": "24 hours / 7 days"})

    def __post_init__(self):
        try:
            self.venue = Venue(self.venue)
            self.policy = resolve_policy(self.policy)
            self.redirect_mode = RedirectMode(self.redirect_mode)
            self.probes = frozenset(Probe(p) for p in self.probes)
            self.protocols = {Protocol(k).value: float(v) for k, v in self.protocols.items()}
        except (KeyError, ValueError) as e:
            raise InvalidScenario(str(e)) from e

    def validate(self) -> None:
        lo, hi = VENUE_BANDS[self.venue]
        if not lo <= self.n_clients <= hi:
            raise InvalidScenario(f"{self.venue.value} holds {lo}..{hi} clients, got {self.n_clients}")
        if self.duration < 0:
            raise InvalidScenario("duration must be >= 0")
        if self.browse_interval <= 0:
            raise InvalidScenario("browse_interval must be > 0")
        if not (0 <= self.seed < 2 ** 64):
            raise InvalidScenario("seed must be a 64-bit unsigned integer")
        for name in ("login_fail_rate", "directory_outage_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidScenario(f"{name} must be a probability")
        if not self.domains:
            raise InvalidScenario("domains must be non-empty")
        if not self.protocols or sum(self.protocols.values()) <= 0:
            raise InvalidScenario("protocols must be a non-empty distribution")

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        doc = dict(doc)
        kw = {}
        simple = ("venue", "n_clients", "policy", "duration", "seed", "browse_interval", "redirect_mode",
                  "login_fail_rate", "directory_outage_rate", "stay_seconds", "cert_validity", "cert_per_request", "metadata")
        for k in simple:
            if k in doc:
                kw[k] = doc.pop(k)
        if "factors" in doc:
            kw["factors"] = DegradationFactors.from_dict(doc.pop("factors"))
        if "client_mix" in doc:
            kw["client_mix"] = ClientMix(**doc.pop("client_mix"))
        if "probes" in doc:
            kw["probes"] = frozenset(doc.pop("probes"))
        if doc.get("network") is not None:
            kw["network"] = CampusNetwork.from_dict(doc.pop("network"))
        doc.pop("network", None)
        if "domains" in doc:
            kw["domains"] = tuple(doc.pop("domains"))
        if "protocols" in doc:
            kw["protocols"] = doc.pop("protocols")
        if "posture_rules" in doc:
            pr = doc.pop("posture_rules")
            kw["posture_rules"] = PostureRules(
                max_av_definition_age=pr.get("max_av_definition_age", 30),
                discontinued_os=frozenset(tuple(x) for x in pr.get("discontinued_os", [])),
                banned_drivers=frozenset(tuple(x) for x in pr.get("banned_drivers", [])),
            )
        if doc:
            raise InvalidScenario(f"unknown scenario fields: {sorted(doc)}")
        try:
            return cls(**kw)
        except (TypeError, ValueError) as e:
            raise InvalidScenario(str(e)) from e


@dataclass
class Metrics:
    per_client_throughput: dict = field(default_factory=lambda: {"mean": None, "min": None, "max": None})
    login_success: int = 0
    login_fail: int = 0
    relogin_events: int = 0
    blocked_devices: int = 0
    redirects: int = 0
    policy_denies: int = 0
    probe_outcomes: dict = field(default_factory=dict)
    probe_details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_client_throughput": dict(self.per_client_throughput),
            "login_success": self.login_success,
            "login_fail": self.login_fail,
            "relogin_events": self.relogin_events,
            "blocked_devices": self.blocked_devices,
            "redirects": self.redirects,
            "policy_denies": self.policy_denies,
            "probe_outcomes": {k: v for k, v in sorted(self.probe_outcomes.items())},
            "probe_details": {k: v for k, v in sorted(self.probe_details.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class SimResult:
    metrics: Metrics
    audit: AuditLog


@dataclass
class _Client:
    idx: int
    device: ClientDevice
    owner: str
    password: str
    ap_id: Optional[str] = None
    ip: Optional[str] = None
    cert: Optional[Certificate] = None
    connected: bool = False
    logins: int = 0
    offset: float = 0.0
    browse_k: int = 0
    bytes_up: int = 0
    bytes_down: int = 0


_ARRIVE, _BROWSE, _EXPIRE, _LEAVE = "arrive", "browse", "expire", "leave"
# tie-break for simultaneous events: tear-down first
_PRIORITY = {_EXPIRE: 0, _LEAVE: 1, _ARRIVE: 2, _BROWSE: 3}
REQUEST_BYTES = 512


class Simulation:
    """One scenario run. Use :meth:`run`, or :meth:`step` to inspect intermediate state."""

    def __init__(self, scenario: Scenario, audit: Optional[AuditLog] = None):
        scenario.validate()
        self.scenario = sc = scenario
        self.rng = np.random.default_rng(sc.seed)
        self.policy: PolicyConfig = sc.policy
        self.network = sc.network if sc.network is not None else knust_network(
            security=self.policy.security_mode)
        self.audit = audit if audit is not None else AuditLog()
        self.metrics = Metrics()
        self.now = 0.0
        self._queue: list = []
        self._seq = 0
        self._samples = 0
        self._tp_sum = 0.0
        self._tp_min = float("inf")
        self._tp_max = float("-inf")
        self._ap_load = {ap.id: 0 for ap in self.network.aps}

        self.directory = Directory(iterations=1)
        self.registry = Registry(key=bytes(self.rng.integers(0, 256, 32, dtype=np.uint8)),
                                 audit=self.audit, rules=sc.posture_rules)
        self.gateway = Gateway(self.policy, redirect_mode=sc.redirect_mode, audit=self.audit) \
            if self.policy.portal_enabled else None
        self.clients = [self._make_client(i) for i in range(sc.n_clients)]
        for c in self.clients:
            self._schedule(0.0, _ARRIVE, c.idx)

    # --- setup --------------------------------------------------------------

    def _choice(self, dist: dict):
        keys = list(dist)
        p = np.array([dist[k] for k in keys], dtype=float)
        return keys[int(self.rng.choice(len(keys), p=p / p.sum()))]

    def _make_client(self, i: int) -> _Client:
        mix = self.scenario.client_mix
        tech = self._choice(mix.wifi_tech)
        posture = self._choice(mix.posture)
        dual = bool(self.rng.random() < mix.dual_stack)
        imei = "".join(str(d) for d in self.rng.integers(0, 10, 15))
        today = SIM_EPOCH.date()
        av = AntivirusInfo("ClamAV", "0.99", today)
        os_info = OsInfo("Windows 10", "1511")
        drivers = (Driver("Intel", "18.12"),)
        if posture == "outdated_av":
            av = AntivirusInfo("ClamAV", "0.98", today - timedelta(days=400))
        elif posture == "no_av":
            av = None
        elif posture == "discontinued_os":
            os_info = OsInfo("Windows XP", "SP3")
        elif posture == "banned_driver":
            drivers = (Driver("AcmeNet", "0.9-compromised"),)
        mac = ":".join(f"{b:02x}" for b in (0x02_00_00_00_00_00 + i + 1).to_bytes(6, "big"))
        device = ClientDevice(
            mac=mac, name=f"client-{i:04d}", model="generic", serial_imei=imei,
            os=os_info, ip_support=IpSupport.DUAL_STACK if dual else IpSupport.V4_ONLY,
            wifi_tech=frozenset({tech}), antivirus=av, drivers=drivers,
        )
        owner = f"S{i:05d}"
        password = f"pw-{i:05d}"
        salt = bytes(self.rng.integers(0, 256, 16, dtype=np.uint8))
        self.directory.add(owner, password, reference=f"REF{i:05d}", salt=salt)
        self.registry.owners.add(owner)
        return _Client(idx=i, device=device, owner=owner, password=password,
                       offset=float(self.rng.uniform(0.0, self.scenario.browse_interval)))

    # --- event queue --------------------------------------------------------

    def _schedule(self, t: float, kind: str, idx: int) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (round(t, 9), _PRIORITY[kind], self._seq, t, kind, idx))

    def pending(self) -> bool:
        return bool(self._queue) and self._queue[0][3] < self.scenario.duration

    def step(self) -> bool:
        """Process one event. Returns False once the horizon is reached."""
        if not self.pending():
            return False
        *_, t, kind, idx = heapq.heappop(self._queue)
        self.now = t
        getattr(self, f"_on_{kind}")(t, idx)
        return True

    def run(self) -> SimResult:
        while self.step():
            pass
        self._finish()
        return SimResult(self.metrics, self.audit)

    # --- throughput ---------------------------------------------------------

    def _ap_shares(self) -> dict[str, float]:
        """Uncapped per-client Mbps on each loaded AP, after WAN sharing."""
        loads = {ap: n for ap, n in self._ap_load.items() if n > 0}
        if not loads:
            return {}
        eff = {ap: effective_ap_throughput(self.network.ap(ap), self.scenario.factors) for ap in loads}
        scale = min(1.0, self.network.wan_mbps / sum(eff.values()))
        return {ap: eff[ap] * scale / loads[ap] for ap in loads}

    def throughput_snapshot(self) -> dict[int, float]:
        """Per-client Mbps for every connected client at the current instant."""
        shares = self._ap_shares()
        return {c.idx: apply_cap(self.policy, shares[c.ap_id]) for c in self.clients if c.connected}

    def _client_throughput(self, c: _Client) -> float:
        return apply_cap(self.policy, self._ap_shares()[c.ap_id])

    # --- handlers -----------------------------------------------------------

    def _what(self, c: _Client) -> What:
        return What(c.device.device_id, c.device.mac, c.ip)

    def _pick_ap(self, c: _Client):
        best = None
        for ap in self.network.aps:
            try:
                assoc = associate(c.device, ap)
            except IncompatibleTech:
                continue
            if best is None or self._ap_load[ap.id] < self._ap_load[best.ap_id]:
                best = assoc
        return best

    def _on_arrive(self, t: float, idx: int) -> None:
        c = self.clients[idx]
        nac = self.policy.nac_enabled
        assoc = self._pick_ap(c)
        if assoc is None:
            self.audit.append(EventKind.CONNECT, t, what=self._what(c),
                              detail={"error": "IncompatibleTech"})
            return
        c.ap_id = assoc.ap_id
        c.connected = True
        self._ap_load[c.ap_id] += 1
        record = self.registry.lookup(c.device.mac)
        detail = {"band": assoc.channel.band.value}
        if nac:
            detail["registered"] = record is not None
        self.audit.append(EventKind.CONNECT, t, what=self._what(c), where=c.ap_id, detail=detail)

        lease = dhcp_assign(self.network, c.device, t)
        c.ip = str(lease.v4)
        lease_detail = {"gateway": str(lease.gateway), "dns_suffix": lease.dns_suffix}
        if lease.v6 is not None:
            lease_detail["v6"] = str(lease.v6)
        self.audit.append(EventKind.DHCP_LEASE, t, what=self._what(c), where=c.ap_id, detail=lease_detail)

        if nac:
            # onboarding: guest-portal registration, then the MDM app reports device data
            record = self.registry.register_device(c.owner, c.device, t)
            record.record_ip(c.ip, t)
            result = self.registry.assess(record, t)
            if result.cleared:
                c.cert = self.registry.issue(record, self.scenario.cert_validity, t)
            else:
                self.metrics.blocked_devices += 1

        self._schedule(t + c.offset, _BROWSE, idx)
        if self.scenario.stay_seconds is not None:
            self._schedule(t + self.scenario.stay_seconds, _LEAVE, idx)

    def _next_browse(self, c: _Client) -> None:
        c.browse_k += 1
        self._schedule(c.offset + c.browse_k * self.scenario.browse_interval, _BROWSE, c.idx)

    def _request(self, c: _Client, t: float) -> AccessRequest:
        sc = self.scenario
        domain = sc.domains[int(self.rng.integers(len(sc.domains)))]
        proto = self._choice(sc.protocols)
        return AccessRequest(src_ip=c.ip, dst_domain=domain, protocol=proto, timestamp=t)

    def _portal_login(self, c: _Client, t: float, req: AccessRequest) -> bool:
        gw = self.gateway
        # the first packet a browser sends in each mode: a lookup, a GET, or the raw request
        first = {RedirectMode.DNS_HIJACK: Protocol.DNS,
                 RedirectMode.HTTP_REDIRECT: Protocol.HTTP}.get(gw.redirect_mode, req.protocol)
        seen = gw.intercept(AccessRequest(c.ip, req.dst_domain, first, t))
        if seen.kind is InterceptKind.PASS_THROUGH:
            return True
        self.metrics.redirects += 1
        self.audit.append(EventKind.REDIRECT, t, who=None, what=self._what(c), where=c.ap_id,
                          detail={"via": seen.kind.value, "target": seen.address or seen.location or gw.portal_ip})
        verdict = None
        if self.policy.nac_enabled and c.cert is not None:
            verdict = self.registry.verify(c.cert, c.device.mac, c.device.serial_imei, t,
                                           ip=c.ip, where=c.ap_id)
        password = c.password
        if self.scenario.login_fail_rate and self.rng.random() < self.scenario.login_fail_rate:
            password = password + "-typo"
        self.directory.up = not (self.scenario.directory_outage_rate
                                 and self.rng.random() < self.scenario.directory_outage_rate)
        try:
            session = gw.login(self.directory, c.owner, password, device_ip=c.ip,
                               device_mac=c.device.mac, now=t, cert_verdict=verdict)
        except (AuthFailed, DirectoryUnavailable, CertificateRejected):
            self.metrics.login_fail += 1
            return False
        finally:
            self.directory.up = True
        self.metrics.login_success += 1
        if c.logins:
            self.metrics.relogin_events += 1
        c.logins += 1
        self._schedule(session.expires_at, _EXPIRE, c.idx)
        return True

    def _on_browse(self, t: float, idx: int) -> None:
        c = self.clients[idx]
        if not c.connected:
            return
        if self.policy.nac_enabled:
            record = self.registry.lookup(c.device.mac)
            if record is None or nac_gate(record) is AccessLevel.NETWORK_ONLY:
                # confined to DHCP/DNS-to-portal until remediated; stop generating traffic
                self.audit.append(EventKind.POLICY_DENY, t, who=c.owner, what=self._what(c), where=c.ap_id,
                                  access_level=AccessLevel.NETWORK_ONLY,
                                  detail={"reason": "PostureBlocked"})
                self.metrics.policy_denies += 1
                return
            if self.scenario.cert_per_request:
                verdict = self.registry.verify(c.cert, c.device.mac, c.device.serial_imei, t,
                                               ip=c.ip, where=c.ap_id)
                if verdict is not CertVerdict.VALID:
                    self.audit.append(EventKind.POLICY_DENY, t, who=c.owner, what=self._what(c),
                                      where=c.ap_id, detail={"reason": "CertificateRejected",
                                                             "verdict": verdict.value})
                    self.metrics.policy_denies += 1
                    self._next_browse(c)
                    return
        req = self._request(c, t)
        if self.gateway is not None and not self._portal_login(c, t, req):
            self._next_browse(c)
            return
        if self.policy.isolated:
            verdict_reason = "Isolated"
            self.metrics.policy_denies += 1
            self.audit.append(EventKind.POLICY_DENY, t, who=self._who(c), what=self._what(c),
                              where=c.ap_id, detail={"reason": verdict_reason, "domain": req.dst_domain})
        else:
            verdict = evaluate_request(self.policy, req)
            if verdict.action is Action.ALLOW:
                mbps = self._client_throughput(c)
                self._sample(mbps)
                c.bytes_up += REQUEST_BYTES
                c.bytes_down += int(mbps * self.scenario.browse_interval * 125_000)
            elif verdict.action is Action.REDIRECT:
                self.metrics.redirects += 1
                self.audit.append(EventKind.REDIRECT, t, who=self._who(c), what=self._what(c), where=c.ap_id,
                                  detail={"via": "Blacklist", "domain": req.dst_domain, "target": verdict.target})
            else:
                self.metrics.policy_denies += 1
                self.audit.append(EventKind.POLICY_DENY, t, who=self._who(c), what=self._what(c), where=c.ap_id,
                                  detail={"reason": verdict.reason, "protocol": req.protocol.value,
                                          "domain": req.dst_domain})
        self._next_browse(c)

    def _who(self, c: _Client) -> Optional[str]:
        if self.gateway is not None or self.policy.nac_enabled:
            return c.owner
        return None  # open network: the user is never identified

    def _on_expire(self, t: float, idx: int) -> None:
        if self.gateway is not None:
            self.gateway.expire_sessions(t)

    def _disconnect(self, c: _Client, t: float, reason: str) -> None:
        if self.gateway is not None and c.ip is not None:
            self.gateway.on_disconnect(c.ip, t)
        c.connected = False
        self._ap_load[c.ap_id] -= 1
        self.audit.append(EventKind.DISCONNECT, t, who=self._who(c), what=self._what(c), where=c.ap_id,
                          traffic=Traffic(c.bytes_up, c.bytes_down), detail={"reason": reason})

    def _on_leave(self, t: float, idx: int) -> None:
        c = self.clients[idx]
        if c.connected:
            self._disconnect(c, t, "left")

    def _sample(self, mbps: float) -> None:
        self._samples += 1
        self._tp_sum += mbps
        self._tp_min = min(self._tp_min, mbps)
        self._tp_max = max(self._tp_max, mbps)

    def _finish(self) -> None:
        sc = self.scenario
        if self._samples:
            mean = self._tp_sum / self._samples
            # guard against summation drift pushing the mean outside [min, max]
            mean = min(max(mean, self._tp_min), self._tp_max)
            self.metrics.per_client_throughput = {"mean": mean, "min": self._tp_min, "max": self._tp_max}
        if sc.duration <= 0:
            return
        for c in self.clients:
            if c.connected:
                self._disconnect(c, sc.duration, "end_of_run")
        self.now = sc.duration
        self._run_probes()

    def _run_probes(self) -> None:
        sc = self.scenario
        m = self.metrics
        n = sc.n_clients
        for probe in sorted(sc.probes, key=lambda p: p.value):
            if probe is Probe.OUTSIDER_JOIN:
                m.probe_outcomes[probe.value] = probe_outsider_join(
                    self.policy, self.network, now=self.now, registry=self.registry,
                    gateway=self.gateway).value
            elif probe is Probe.EAVESDROP:
                m.probe_outcomes[probe.value] = probe_eavesdrop(self.policy.security_mode, n).value
            elif probe is Probe.DISCOVERY:
                peers = probe_discovery(self.network.host_isolation, n)
                m.probe_details["Discovery.discoverable_peers"] = peers
                m.probe_outcomes[probe.value] = (Outcome.SUCCEEDED if peers else Outcome.PREVENTED).value
            elif probe is Probe.CERT_CLONE:
                res = _cert_clone_in_sim(self)
                m.probe_outcomes[probe.value] = res.outcome.value
                m.probe_details["CertClone.verdict"] = res.verdict.value
                m.probe_details["CertClone.flagged"] = bool(res.flags)


def run(scenario: Scenario | dict, audit: Optional[AuditLog] = None) -> SimResult:
    if isinstance(scenario, dict):
        scenario = Scenario.from_dict(scenario)
    return Simulation(scenario, audit=audit).run()


# --- risk probes -------------------------------------------------------------

_OUTSIDER = ClientDevice(mac="02:ba:d0:00:00:01", name="outsider", serial_imei="000000000000000",
                         wifi_tech=frozenset({"802.11b", "802.11g", "802.11n"}))


def probe_outsider_join(policy: PolicyConfig, network: Optional[CampusNetwork] = None, *,
                        now: float = 0.0, registry: Optional[Registry] = None,
                        gateway: Optional[Gateway] = None) -> Outcome:
    """An unregistered device joins, takes a DHCP lease and tries to browse without logging in."""
    network = network if network is not None else knust_network()
    lease = dhcp_assign(network, _OUTSIDER, now)  # DHCP always answers
    ip = str(lease.v4)
    if policy.isolated:
        return Outcome.PREVENTED
    if policy.nac_enabled:
        record = registry.lookup(_OUTSIDER.mac) if registry is not None else None
        if record is None or nac_gate(record) is AccessLevel.NETWORK_ONLY:
            return Outcome.PREVENTED
    if policy.portal_enabled:
        gw = gateway if gateway is not None else Gateway(policy)
        for proto in (Protocol.DNS, Protocol.HTTP, Protocol.HTTPS):
            if gw.intercept(AccessRequest(ip, "example.com", proto, now)).kind is not InterceptKind.PASS_THROUGH:
                return Outcome.PREVENTED
    for proto in (Protocol.HTTP, Protocol.HTTPS):
        if evaluate_request(policy, AccessRequest(ip, "example.com", proto, now)).action is Action.ALLOW:
            return Outcome.SUCCEEDED
    return Outcome.PREVENTED


def probe_eavesdrop(security_mode: SecurityMode, n_clients: int = 2) -> Outcome:
    """Frames on an Open SSID are modelled as plaintext; every other mode as opaque."""
    if n_clients < 2:
        return Outcome.PREVENTED
    return Outcome.SUCCEEDED if SecurityMode(security_mode) is SecurityMode.OPEN else Outcome.PREVENTED


def probe_discovery(host_isolation: bool, n_peers: int) -> int:
    if n_peers < 1:
        raise ValueError("need at least one host")
    return 0 if host_isolation else n_peers - 1


@dataclass(frozen=True)
class CertCloneResult:
    outcome: Outcome
    verdict: CertVerdict
    flags: tuple[SuspicionFlag, ...]


def probe_cert_clone(registry: Registry, device_a: ClientDevice, cert: Certificate,
                     device_b: ClientDevice, now: float, *, window: float = 60.0) -> CertCloneResult:
    """A presents its certificate, then B presents the same certificate a second later.

    ``outcome`` is Succeeded only if B's presentation verified as Valid.
    ``registry.audit`` must be set for the clone to be flagged.
    """
    registry.verify(cert, device_a.mac, device_a.serial_imei, now)
    verdict = registry.verify(cert, device_b.mac, device_b.serial_imei, now + 1.0)
    flags: tuple[SuspicionFlag, ...] = ()
    if registry.audit is not None:
        flags = tuple(f for f in detect_suspicion(registry.audit, window=window)
                      if f.kind is SuspicionKind.CERT_CLONE_ATTEMPT and f.subject == cert.device_fingerprint)
    outcome = Outcome.SUCCEEDED if verdict is CertVerdict.VALID else Outcome.PREVENTED
    return CertCloneResult(outcome, verdict, flags)


def _cert_clone_in_sim(sim: Simulation) -> CertCloneResult:
    """Run the clone probe against the run's own registry, onboarding a victim if needed."""
    reg = sim.registry
    victim = next((c for c in sim.clients if c.cert is not None), None)
    now = sim.now
    if victim is None:
        dev = ClientDevice(mac="02:c0:ff:ee:00:01", name="probe-victim", serial_imei="356938035643809",
                           antivirus=AntivirusInfo("ClamAV", "0.99", SIM_EPOCH.date()))
        reg.owners.add("probe-owner")
        record = reg.register_device("probe-owner", dev, now)
        reg.assess(record, now)
        cert = reg.issue(record, sim.scenario.cert_validity, now)
        victim_dev = dev
    else:
        cert, victim_dev = victim.cert, victim.device
    clone = ClientDevice(mac="02:c1:0e:00:00:01", name="cloner", serial_imei="490154203237518")
    return probe_cert_clone(reg, victim_dev, cert, clone, now)
