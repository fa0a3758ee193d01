"""``byodsim`` command line: simulate, policy, capacity, probe, audit, validate.

JSON goes to stdout, diagnostics to stderr. Exit status is 0 on success,
1 on a domain error and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import access_control, audit, capacity, net_model, policy, segmentation, sim

logger = logging.getLogger("byodsim")

CONFIG_ENV = "BYODSIM_CONFIG"


class DomainError(Exception):
    pass


def _dump(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise DomainError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise DomainError(f"{path} is not valid JSON: {e}") from e


# --- subcommands ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    doc = _read_json(args.scenario)
    doc["seed"] = args.seed
    if args.duration is not None:
        doc["duration"] = args.duration
    scenario = sim.Scenario.from_dict(doc)
    result = sim.run(scenario)
    metrics = result.metrics.to_json()
    if args.out:
        Path(args.out).write_text(metrics + "\n", encoding="utf-8")
    if args.audit_out:
        result.audit.write_jsonl(args.audit_out)
    sys.stdout.write(metrics + "\n")
    return 0


def cmd_policy(args) -> int:
    if args.action == "preset":
        bundle = policy.preset_bundle(args.version)
        if args.all_ssids:
            _dump([cfg.to_dict() for cfg in bundle])
        else:
            _dump(bundle[0].to_dict())
        return 0
    # evaluate
    cfg = policy.PolicyConfig.from_dict(_read_json(args.policy)) if args.policy else policy.preset(args.version)
    verdict = policy.evaluate_request(cfg, policy.AccessRequest("0.0.0.0", args.domain, args.protocol))
    _dump({"action": verdict.action.value, "target": verdict.target, "reason": verdict.reason})
    return 0


def _factors(args) -> capacity.DegradationFactors:
    return capacity.DegradationFactors(overhead=args.overhead, contention=args.contention, misc=args.misc)


def cmd_capacity(args) -> int:
    try:
        rates = [float(x) for x in args.channels.split(",") if x.strip()]
    except ValueError as e:
        raise DomainError(f"bad --channels value: {e}") from e
    bands = [net_model.Band.GHZ_2_4, net_model.Band.GHZ_5]
    if not 1 <= len(rates) <= 2:
        raise DomainError("--channels takes one or two raw rates")
    ap = net_model.AccessPoint("cli", net_model.ApKind.AUTONOMOUS, 1,
                               tuple(net_model.Channel(b, r) for b, r in zip(bands, rates)), "cli")
    per_client = capacity.per_client_throughput(ap, args.clients, _factors(args))
    out = {"per_client_mbps": per_client}
    if args.verbose:
        out["effective_ap_mbps"] = capacity.effective_ap_throughput(ap, _factors(args))
    _dump(out)
    return 0


def cmd_probe(args) -> int:
    if args.kind == "outsider":
        cfg = policy.resolve_policy(args.policy)
        _dump({"probe": "OutsiderJoin", "policy": cfg.name,
               "outcome": sim.probe_outsider_join(cfg).value})
    elif args.kind == "eavesdrop":
        _dump({"probe": "Eavesdrop", "security_mode": args.security,
               "outcome": sim.probe_eavesdrop(net_model.SecurityMode(args.security), args.clients).value})
    elif args.kind == "discovery":
        _dump({"probe": "Discovery", "host_isolation": args.isolation,
               "discoverable_peers": sim.probe_discovery(args.isolation, args.clients)})
    else:
        log = audit.AuditLog()
        reg = access_control.Registry({"victim"}, key=b"cli-probe-key", audit=log)
        a = net_model.ClientDevice(mac="02:00:00:00:0a:01", serial_imei="356938035643809",
                                   antivirus=net_model.AntivirusInfo("ClamAV", "0.99",
                                                                     access_control.SIM_EPOCH.date()))
        b = net_model.ClientDevice(mac="02:00:00:00:0b:01", serial_imei="490154203237518")
        rec = reg.register_device("victim", a, 0.0)
        reg.assess(rec, 0.0)
        cert = reg.issue(rec, 30 * 86400.0, 0.0)
        res = sim.probe_cert_clone(reg, a, cert, b, args.at)
        _dump({"probe": "CertClone", "outcome": res.outcome.value, "verdict": res.verdict.value,
               "flags": [f.to_dict() for f in res.flags]})
    return 0


def cmd_audit(args) -> int:
    path = Path(args.log)
    if not path.exists():
        raise DomainError(f"no audit log at {path}")
    if args.action == "detect":
        log = audit.AuditLog.load(path)
        flags = audit.detect_suspicion(log, window=args.window, login_fail_threshold=args.threshold)
        _dump([f.to_dict() for f in flags])
        return 0
    flt = audit.AuditFilter(
        who=args.who, device=args.device, where=args.where, since=args.since, until=args.until,
        events=frozenset(audit.EventKind(e) for e in args.event) if args.event else None,
    )
    # emit matching lines verbatim
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                rec = audit.AuditRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError):
                continue
            if flt.matches(rec):
                sys.stdout.write(line if line.endswith("\n") else line + "\n")
    return 0


def cmd_validate(args) -> int:
    zones = (segmentation.zones_from_json(Path(args.zones).read_text(encoding="utf-8"))
             if args.zones else segmentation.default_zones())
    rules = (segmentation.Ruleset.from_json(Path(args.rules).read_text(encoding="utf-8"))
             if args.rules else None)
    for v in segmentation.validate_topology(zones, rules):
        sys.stdout.write(json.dumps(v.to_dict(), sort_keys=True) + "\n")
    return 0


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="byodsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose-log", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario")
    s.add_argument("--scenario", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--duration", type=float)
    s.add_argument("--out", help="write metrics JSON here as well as to stdout")
    s.add_argument("--audit-out", help="write the audit log as JSONL")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("policy", help="print presets or evaluate a request")
    psub = s.add_subparsers(dest="action", required=True)
    pp = psub.add_parser("preset")
    pp.add_argument("version", choices=policy.PRESET_NAMES)
    pp.add_argument("--all-ssids", action="store_true", help="include companion SSIDs")
    pe = psub.add_parser("evaluate")
    pe.add_argument("--version", default="v1", choices=policy.PRESET_NAMES)
    pe.add_argument("--policy", help="policy JSON file (overrides --version)")
    pe.add_argument("--domain", required=True)
    pe.add_argument("--protocol", required=True, choices=[x.value for x in policy.Protocol])
    s.set_defaults(func=cmd_policy)

    s = sub.add_parser("capacity", help="per-client throughput estimate")
    s.add_argument("--channels", default="300,300", help="comma-separated raw channel rates in Mbps")
    s.add_argument("--clients", type=int, default=1)
    s.add_argument("--overhead", type=float, default=0.45)
    s.add_argument("--contention", type=float, default=0.50)
    s.add_argument("--misc", type=float, default=0.25)
    s.add_argument("--verbose", action="store_true", help="also report effective AP throughput")
    s.set_defaults(func=cmd_capacity)

    s = sub.add_parser("probe", help="run one security risk probe")
    s.add_argument("kind", choices=["outsider", "eavesdrop", "discovery", "certclone"])
    s.add_argument("--policy", default="v1")
    s.add_argument("--security", default="Open", choices=[m.value for m in net_model.SecurityMode])
    s.add_argument("--clients", type=int, default=2)
    s.add_argument("--isolation", action="store_true")
    s.add_argument("--at", type=float, default=60.0, help="simulated time of the clone attempt")
    s.set_defaults(func=cmd_probe)

    s = sub.add_parser("audit", help="query an audit JSONL log")
    asub = s.add_subparsers(dest="action", required=True)
    aq = asub.add_parser("query")
    aq.add_argument("--log", required=True)
    aq.add_argument("--who")
    aq.add_argument("--device")
    aq.add_argument("--where")
    aq.add_argument("--since", type=float)
    aq.add_argument("--until", type=float)
    aq.add_argument("--event", action="append", choices=[e.value for e in audit.EventKind])
    ad = asub.add_parser("detect")
    ad.add_argument("--log", required=True)
    ad.add_argument("--window", type=float, default=60.0)
    ad.add_argument("--threshold", type=int, default=5)
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("validate", help="check a zone topology and ruleset")
    s.add_argument("--zones", help="zones JSON (default: shipped campus zones)")
    s.add_argument("--rules", help="ruleset JSON (default: shipped ruleset)")
    s.set_defaults(func=cmd_validate)
    return p


def _apply_config_defaults(parser: argparse.ArgumentParser) -> None:
    """Merge ``$BYODSIM_CONFIG`` (``{subcommand: {flag: value}}``) under explicit flags."""
    path = os.environ.get(CONFIG_ENV)
    if not path:
        return
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        logger.warning("ignoring %s=%s: %s", CONFIG_ENV, path, e)
        return
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, defaults in cfg.items():
        sp = subparsers.choices.get(name)
        if sp is not None and isinstance(defaults, dict):
            sp.set_defaults(**{k.replace("-", "_"): v for k, v in defaults.items()})
            for action in sp._actions:
                if action.dest in defaults or action.dest.replace("_", "-") in defaults:
                    action.required = False


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    _apply_config_defaults(parser)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose_log else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DomainError, sim.InvalidScenario, ValueError, KeyError, OSError,
            capacity.ZeroClients) as e:
        sys.stderr.write(f"byodsim: error: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
