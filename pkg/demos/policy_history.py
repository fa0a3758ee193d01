"""Walk through the campus policy versions and see how each treats the same requests.

Run: python3 demos/policy_history.py
"""

from byodsim.policy import AccessRequest, PRESET_NAMES, evaluate_request, preset_bundle
from byodsim.sim import probe_outsider_join

requests = [("knust.edu.gh", "HTTPS"), ("youtube.com", "HTTP"), ("example.com", "P2P"), ("example.com", "FTP")]

for version in PRESET_NAMES:
    for cfg in preset_bundle(version):
        cells = []
        for domain, proto in requests:
            v = evaluate_request(cfg, AccessRequest("10.9.0.10", domain, proto))
            cells.append(f"{domain}/{proto}={v.action.value}")
        outsider = probe_outsider_join(cfg).value
        print(f"{cfg.name:9s} outsider:{outsider:9s} " + "  ".join(cells))
