"""Independent reference implementations used to cross-check the package.

Nothing here imports byodsim internals beyond enum values needed to build
inputs. Each oracle is written the slow, obvious way.
"""

from fractions import Fraction


def eui64_address(mac: str, prefix_hi64: int) -> int:
    """128-bit SLAAC address from a MAC by plain integer arithmetic."""
    octets = [int(x, 16) for x in mac.replace("-", ":").split(":")]
    octets[0] ^= 0b0000_0010
    iid_bytes = octets[:3] + [0xFF, 0xFE] + octets[3:]
    iid = 0
    for b in iid_bytes:
        iid = iid * 256 + b
    return (prefix_hi64 << 64) | iid


def degraded(raw_mbps, overhead, contention, misc) -> Fraction:
    """Degradation chain in exact rational arithmetic."""
    r = Fraction(raw_mbps)
    for f in (overhead, contention, misc):
        r = r * (1 - Fraction(f))
    return r


def airtime(pairs) -> list:
    """pairs: [(packets, rate)] -> exact airtime fractions."""
    times = [Fraction(p) / Fraction(r) for p, r in pairs]
    total = sum(times)
    return [t / total for t in times]


def policy_verdict(allowed: set, blacklist: set, redirect: str, domain: str, proto: str):
    """Protocol gate first, then label-wise suffix match against the blacklist."""
    if proto not in allowed:
        return ("Deny", "ProtocolBlocked")
    labels = domain.lower().rstrip(".").split(".")
    for pat in blacklist:
        p = pat.lower().rstrip(".").split(".")
        if labels[-len(p):] == p:
            return ("Redirect", redirect)
    return ("Allow", None)


def acl_linear(rules, src_zone, src_addr, dst_zone, dst_addr, service):
    """rules: list of dicts {src, dst, service, action} with string selectors.

    Zones and prefixes are compared textually / via ipaddress, one rule at a time.
    """
    import ipaddress

    def side(sel, zone, addr):
        if sel == "any":
            return True
        if sel == zone:
            return True
        if "/" in sel or ":" in sel or sel[0].isdigit():
            try:
                net = ipaddress.ip_network(sel, strict=False)
            except ValueError:
                return False
            if addr is None:
                return False
            a = ipaddress.ip_address(addr)
            return a.version == net.version and a in net
        return False

    for r in rules:
        if r["service"] not in ("Any", service):
            continue
        if side(r["src"], src_zone, src_addr) and side(r["dst"], dst_zone, dst_addr):
            return r["action"]
    raise LookupError("no rule matched")

