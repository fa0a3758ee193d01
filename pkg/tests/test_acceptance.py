"""Acceptance gate: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python3 tests/test_acceptance.py``.
"""

import contextlib
import io
import json
import time
from datetime import timedelta

import numpy as np
import pytest

from byodsim.access_control import (
    SIM_EPOCH, CertVerdict, DeviceRecord, DeviceStatus, PostureRules, assess_posture,
    issue_certificate, nac_gate, verify_certificate, verify_serialized,
)
from byodsim.audit import AccessLevel, AuditLog, SuspicionKind
from byodsim.capacity import per_client_throughput
from byodsim.cli import main as cli_main
from byodsim.net_model import (
    AccessPoint, AntivirusInfo, ApKind, Band, Channel, ClientDevice, Driver, OsInfo, SecurityMode,
)
from byodsim.policy import AccessRequest, Action, PolicyConfig, evaluate_request, preset, preset_bundle, resolve_policy
from byodsim.portal import AuthFailed, Directory, Gateway, SessionState
from byodsim.segmentation import CONCRETE_SERVICES, Endpoint, FwAction, ZoneName, default_ruleset, permits
from byodsim.sim import Outcome, Scenario, probe_cert_clone, probe_discovery, probe_eavesdrop, probe_outsider_join, run

import oracles


def report(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    print(line)
    return line


@pytest.fixture
def say(capsys):
    def _say(n, ok, detail):
        with capsys.disabled():
            report(n, ok, detail)
        assert ok, detail
    return _say


DUAL = AccessPoint("ap1", ApKind.AUTONOMOUS, 1, (Channel(Band.GHZ_2_4, 300), Channel(Band.GHZ_5, 300)), "WIFI-KNUST")


# 1 ------------------------------------------------------------------------------

def check_capacity():
    t0 = time.perf_counter()
    band = {n: per_client_throughput(DUAL, n) for n in range(42, 62)}
    at50 = per_client_throughput(DUAL, 50)
    elapsed = time.perf_counter() - t0
    ok = all(2 <= v <= 3 for v in band.values()) and abs(at50 - 2.475) <= 1e-9 and elapsed < 1
    return ok, (f"n=42..61 in [{min(band.values()):.4f}, {max(band.values()):.4f}] Mbps, "
                f"n=50 -> {at50!r} Mbps, {elapsed * 1000:.1f} ms")


# 2 ------------------------------------------------------------------------------

def check_session_cycle():
    # Classroom is the smallest venue; its floor is 10 clients, each checked on its own
    sc = Scenario.from_dict({"venue": "Classroom", "n_clients": 10, "policy": "v4", "duration": 1500, "seed": 11})
    t0 = time.perf_counter()
    res = run(sc)
    elapsed = time.perf_counter() - t0
    tick = sc.browse_interval
    bad = []
    for i in range(sc.n_clients):
        times = [r.when for r in res.audit.query(who=f"S{i:05d}", events=["LoginOk"])]
        marks = (0, 600, 1200)
        if len(times) != 3 or not all(m <= t <= m + tick for t, m in zip(times, marks)):
            bad.append((i, times))
    ok = not bad and elapsed < 1
    return ok, (f"{sc.n_clients} clients x 3 LoginOk within one {tick:g}s tick of 0/600/1200, "
                f"relogins={res.metrics.relogin_events}, {elapsed * 1000:.0f} ms" + (f", bad={bad[:2]}" if bad else ""))


# 3 ------------------------------------------------------------------------------

def _device(rng):
    mac = ":".join(f"{b:02x}" for b in rng.integers(0, 256, 6))
    imei = "".join(str(d) for d in rng.integers(0, 10, 15))
    return ClientDevice(mac=mac, serial_imei=imei, antivirus=AntivirusInfo("AV", "1", SIM_EPOCH.date()))


def _cleared(dev):
    rec = DeviceRecord(dev, "u", 0.0)
    assess_posture(rec, PostureRules(), 0.0)
    return rec


def check_non_transferability(pairs=1000, flips=1000):
    rng = np.random.default_rng(3)
    key = bytes(rng.integers(0, 256, 32, dtype=np.uint8))
    transfers = 0
    for _ in range(pairs):
        a, b = _device(rng), _device(rng)
        if (a.mac, a.serial_imei) == (b.mac, b.serial_imei):
            continue
        cert = issue_certificate(_cleared(a), key, 86400.0, 0.0)
        if verify_certificate(cert, b.mac, b.serial_imei, key, 1.0) is CertVerdict.VALID:
            transfers += 1
    forged_valid = 0
    for _ in range(flips):
        a = _device(rng)
        blob = bytearray(issue_certificate(_cleared(a), key, 86400.0, 0.0).serialize().encode())
        bit = int(rng.integers(0, len(blob) * 8))
        blob[bit // 8] ^= 1 << (bit % 8)
        if verify_serialized(bytes(blob), a.mac, a.serial_imei, key, 1.0) is CertVerdict.VALID:
            forged_valid += 1
    ok = transfers == 0 and forged_valid == 0
    return ok, f"{pairs} device pairs -> {transfers} Valid; {flips} bit flips -> {forged_valid} Valid"


# 4 ------------------------------------------------------------------------------

RULES = PostureRules(30, frozenset({("Windows XP", "SP3")}), frozenset({("AcmeNet", "0.9")}))


def _fleet_device(rng, i):
    today = SIM_EPOCH.date()
    av = AntivirusInfo("AV", "1", today - timedelta(days=int(rng.integers(0, 60))))
    if rng.random() < 0.1:
        av = None
    os_info = OsInfo("Windows XP", "SP3") if rng.random() < 0.1 else OsInfo("Windows 10", "1511")
    drivers = (Driver("AcmeNet", "0.9"),) if rng.random() < 0.1 else (Driver("Intel", "18"),)
    mac = ":".join(f"{b:02x}" for b in (0x02_00_00_00_00_00 + i).to_bytes(6, "big"))
    return ClientDevice(mac=mac, serial_imei=f"{i:015d}", os=os_info, antivirus=av, drivers=drivers)


def _remediate(dev):
    return ClientDevice(mac=dev.mac, serial_imei=dev.serial_imei, os=OsInfo("Windows 10", "1511"),
                        antivirus=AntivirusInfo("AV", "2", SIM_EPOCH.date()), drivers=(Driver("Intel", "18"),))


def check_nac_gating():
    rng = np.random.default_rng(4)
    proposed = preset("proposed")
    violating = gated = flipped = 0
    for i in range(200):
        rec = DeviceRecord(_fleet_device(rng, i), f"u{i}", 0.0)
        if assess_posture(rec, RULES, 0.0).cleared:
            continue
        violating += 1
        if nac_gate(rec) is AccessLevel.NETWORK_ONLY and probe_outsider_join(proposed) is Outcome.PREVENTED:
            gated += 1
        rec.device = _remediate(rec.device)  # fresh AV date, plus fixes for any other deficiency
        if assess_posture(rec, RULES, 0.0).cleared and rec.status is DeviceStatus.CLEARED \
                and nac_gate(rec) is AccessLevel.FULL_PIPELINE:
            flipped += 1
    ok = violating > 0 and gated == violating == flipped
    return ok, (f"{violating}/200 violating devices: {gated} NetworkOnly + outsider Prevented, "
                f"{flipped} Cleared/FullPipeline after remediation")


# 5 ------------------------------------------------------------------------------

FOUR = [ZoneName.ACCESS_NET, ZoneName.PUBLIC_DMZ, ZoneName.PRIVATE_DMZ, ZoneName.INTERNET]
HOSTS = {
    ZoneName.ACCESS_NET: ["10.9.0.10", "10.9.0.11"],
    ZoneName.PUBLIC_DMZ: ["172.16.1.10", "172.16.1.53"],
    ZoneName.PRIVATE_DMZ: ["172.16.2.10", "172.16.2.20"],
    ZoneName.INTERNET: ["198.51.100.7", "203.0.113.9"],
}


def check_acl_oracle():
    rs = default_ruleset()
    raw = [r.to_dict() for r in rs]
    total = agree = leaks = 0
    for sz in FOUR:
        for dz in FOUR:
            for da in HOSTS[dz]:
                for svc in CONCRETE_SERVICES:
                    total += 1
                    got = permits(rs, Endpoint(sz, HOSTS[sz][0]), Endpoint(dz, da), svc)
                    agree += got.value == oracles.acl_linear(raw, sz.value, HOSTS[sz][0], dz.value, da, svc.value)
                    if sz is ZoneName.INTERNET and dz is ZoneName.PRIVATE_DMZ and got is FwAction.ALLOW:
                        leaks += 1
    ok = total == 224 and agree == total and leaks == 0
    return ok, f"{agree}/{total} triples agree with linear scan; Internet->PrivateDMZ allows: {leaks}"


# 6 ------------------------------------------------------------------------------

def check_gateway_safety(sequences=10_000, length=12):
    rng = np.random.default_rng(6)
    directory = Directory(iterations=1)
    directory.add("S1", "pw", salt=b"0" * 16)
    ips = [f"10.9.0.{i}" for i in range(10, 15)]
    violations = 0
    for _ in range(sequences):
        gw = Gateway(preset("v4"))
        now = 0.0
        for _ in range(length):
            now += float(rng.uniform(0, 400))
            op = int(rng.integers(4))
            ip = ips[int(rng.integers(len(ips)))]
            if op == 0:
                gw.login(directory, "S1", "pw", device_ip=ip, device_mac="02:00:00:00:00:01", now=now)
            elif op == 1:
                try:
                    gw.login(directory, "S1", "nope", device_ip=ip, device_mac="02:00:00:00:00:01", now=now)
                except AuthFailed:
                    pass
            elif op == 2:
                gw.expire_sessions(now)
            else:
                gw.on_disconnect(ip, now)
            active = {s.device_ip for s in gw.sessions if s.state is SessionState.ACTIVE}
            if gw.authorized_ips != active:
                violations += 1
    return violations == 0, f"{sequences} sequences x {length} events, {violations} invariant violations"


# 7 ------------------------------------------------------------------------------

def check_probe_matrix():
    log = AuditLog()
    from byodsim.access_control import Registry
    reg = Registry({"a"}, key=b"k" * 32, audit=log)
    a = ClientDevice(mac="02:00:00:00:0a:01", serial_imei="356938035643809",
                     antivirus=AntivirusInfo("AV", "1", SIM_EPOCH.date()))
    rec = reg.register_device("a", a, 0.0)
    reg.assess(rec, 0.0)
    cert = reg.issue(rec, 86400.0, 0.0)
    clone = probe_cert_clone(reg, a, cert, ClientDevice(mac="02:00:00:00:0b:01", serial_imei="490154203237518"), 30.0)
    got = {
        "Eavesdrop/Open": probe_eavesdrop(SecurityMode.OPEN).value,
        "Eavesdrop/WPA2": probe_eavesdrop(SecurityMode.WPA2).value,
        "OutsiderJoin/V1": probe_outsider_join(resolve_policy("v1")).value,
        "OutsiderJoin/V5-main": probe_outsider_join(resolve_policy("v5-main")).value,
        "OutsiderJoin/V4": probe_outsider_join(resolve_policy("v4")).value,
        "OutsiderJoin/proposed": probe_outsider_join(resolve_policy("proposed")).value,
        "Discovery/off(n=10)": probe_discovery(False, 10),
        "Discovery/on(n=10)": probe_discovery(True, 10),
        "CertClone": clone.outcome.value,
        "CertClone/flag": any(f.kind is SuspicionKind.CERT_CLONE_ATTEMPT for f in clone.flags),
    }
    want = {
        "Eavesdrop/Open": "Succeeded", "Eavesdrop/WPA2": "Prevented",
        "OutsiderJoin/V1": "Succeeded", "OutsiderJoin/V5-main": "Succeeded",
        "OutsiderJoin/V4": "Prevented", "OutsiderJoin/proposed": "Prevented",
        "Discovery/off(n=10)": 9, "Discovery/on(n=10)": 0,
        "CertClone": "Prevented", "CertClone/flag": True,
    }
    wrong = {k: got[k] for k in want if got[k] != want[k]}
    return not wrong, f"{len(want) - len(wrong)}/{len(want)} matrix cells match" + (f", wrong={wrong}" if wrong else "")


# 8 ------------------------------------------------------------------------------

def check_determinism(tmp_path):
    scen = tmp_path / "scenario.json"
    scen.write_text(json.dumps({
        "venue": "LectureHall", "n_clients": 40, "policy": "proposed", "duration": 900,
        "login_fail_rate": 0.1, "directory_outage_rate": 0.05,
        "client_mix": {"posture": {"compliant": 0.7, "outdated_av": 0.3}, "wifi_tech": {"802.11n": 0.6, "802.11g": 0.4}},
        "probes": ["OutsiderJoin", "Eavesdrop", "Discovery", "CertClone"],
    }))
    outs = []
    for k in (1, 2):
        m, a = tmp_path / f"m{k}.json", tmp_path / f"a{k}.jsonl"
        with contextlib.redirect_stdout(io.StringIO()):
            code = cli_main(["simulate", "--scenario", str(scen), "--seed", "20151101", "--out", str(m), "--audit-out", str(a)])
        outs.append((code, m.read_bytes(), a.read_bytes()))
    (c1, m1, a1), (c2, m2, a2) = outs
    ok = c1 == c2 == 0 and m1 == m2 and a1 == a2 and len(a1) > 0
    lines = len(a1.splitlines())
    return ok, f"metrics {len(m1)} B and audit {lines} lines byte-identical across two runs: {m1 == m2 and a1 == a2}"


# 9 ------------------------------------------------------------------------------

def check_presets():
    round_trip = all(PolicyConfig.from_json(cfg.to_json()) == cfg
                     for v in ("v1", "v2", "v3", "v4", "v5") for cfg in preset_bundle(v))
    req = lambda d, p: AccessRequest("10.9.0.10", d, p, 0.0)
    r = evaluate_request(preset("v2"), req("youtube.com", "HTTP"))
    d = evaluate_request(preset("v2"), req("example.com", "FTP"))
    a = evaluate_request(preset("v1"), req("example.com", "P2P"))
    verdicts = (r.action is Action.REDIRECT and r.target == "knust.edu.gh"
                and d.action is Action.DENY and d.reason == "ProtocolBlocked"
                and a.action is Action.ALLOW)
    return round_trip and verdicts, (f"V1..V5 JSON round trip {'ok' if round_trip else 'BROKEN'}; "
                                     f"verdicts {r.action.value}({r.target}) / {d.action.value}({d.reason}) / {a.action.value}")


# --- pytest wiring ------------------------------------------------------------------

def test_criterion_1_capacity_headline(say):
    say(1, *check_capacity())


def test_criterion_2_session_cycle(say):
    say(2, *check_session_cycle())


def test_criterion_3_certificate_non_transferability(say):
    say(3, *check_non_transferability())


def test_criterion_4_nac_gating(say):
    say(4, *check_nac_gating())


def test_criterion_5_acl_oracle_equivalence(say):
    say(5, *check_acl_oracle())


def test_criterion_6_gateway_safety_invariant(say):
    say(6, *check_gateway_safety())


def test_criterion_7_risk_probe_matrix(say):
    say(7, *check_probe_matrix())


def test_criterion_8_determinism(say, tmp_path):
    say(8, *check_determinism(tmp_path))


def test_criterion_9_policy_presets(say):
    say(9, *check_presets())


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as tmp:
        checks = [check_capacity, check_session_cycle, check_non_transferability, check_nac_gating,
                  check_acl_oracle, check_gateway_safety, check_probe_matrix,
                  lambda: check_determinism(Path(tmp)), check_presets]
        results = [report(i, *c()) for i, c in enumerate(checks, 1)]
    sys.exit(0 if all(r.startswith("[PASS]") for r in results) else 1)
