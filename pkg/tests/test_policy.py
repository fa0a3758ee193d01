import json
from itertools import product

import pytest
from hypothesis import given, strategies as st

from byodsim.net_model import SecurityMode
from byodsim.policy import (
    PRESET_NAMES, SEC_SSID, AccessRequest, Action, PolicyConfig, Protocol, apply_cap,
    domain_matches, evaluate_request, load_blacklist, preset, preset_bundle, resolve_policy,
)

import oracles

DOMAINS = ["youtube.com", "www.youtube.com", "m.YouTube.com.", "notyoutube.com", "example.com",
           "knust.edu.gh", "files.example.com", "com"]


def req(domain, proto):
    return AccessRequest("10.9.0.10", domain, proto, 0.0)


def test_v1_is_open():
    p = preset("v1")
    assert p.security_mode is SecurityMode.OPEN
    assert not p.domain_blacklist and not p.portal_enabled and p.bandwidth_cap is None
    assert p.allowed_protocols == frozenset(Protocol)


def test_v2_filters():
    p = preset("v2")
    assert p.allowed_protocols == {Protocol.HTTP, Protocol.HTTPS, Protocol.DNS}
    assert "youtube.com" in p.domain_blacklist
    assert p.redirect_target == "knust.edu.gh"
    assert not p.portal_enabled


def test_v2_takes_extra_category_domains(tmp_path):
    f = tmp_path / "adult.txt"
    f.write_text("# category list\nBadSite.example\n\nother.example  # trailing\n")
    extra = load_blacklist(f)
    assert extra == {"badsite.example", "other.example"}
    p = preset("v2", extra)
    assert evaluate_request(p, req("www.badsite.example", "HTTPS")).action is Action.REDIRECT


def test_v3_has_isolated_companion():
    main, sec = preset_bundle("v3")
    assert sec.ssid == SEC_SSID and sec.isolated and sec.monitored
    assert not main.isolated


def test_v4_portal():
    p = preset("v4")
    assert p.portal_enabled and p.session_timeout == 600 and not p.nac_enabled


def test_v5_split():
    main, sec = preset_bundle("v5")
    assert not main.portal_enabled and main.security_mode is SecurityMode.OPEN
    assert sec.portal_enabled and sec.monitored and sec.ssid == SEC_SSID


def test_proposed_design():
    p = preset("proposed")
    assert p.nac_enabled and p.portal_enabled and p.security_mode is SecurityMode.WPA2


@pytest.mark.parametrize("tag,name", [("v5-main", "v5"), ("v5-sec", "v5-sec"), ("V4", "v4"),
                                      ("v3-sec", "v3-sec")])
def test_resolve_policy_tags(tag, name):
    assert resolve_policy(tag).name == name


def test_resolve_policy_unknown():
    with pytest.raises(KeyError):
        resolve_policy("v9")
    with pytest.raises(KeyError):
        resolve_policy("v4-sec")


@pytest.mark.parametrize("version", PRESET_NAMES)
def test_presets_round_trip_and_are_idempotent(version):
    for cfg in preset_bundle(version):
        assert PolicyConfig.from_json(cfg.to_json()) == cfg
        assert json.loads(cfg.to_json()) == cfg.to_dict()
    assert preset(version) == preset(version)


def test_verdict_examples():
    v = evaluate_request(preset("v2"), req("youtube.com", "HTTP"))
    assert (v.action, v.target) == (Action.REDIRECT, "knust.edu.gh")
    v = evaluate_request(preset("v2"), req("example.com", "FTP"))
    assert (v.action, v.reason) == (Action.DENY, "ProtocolBlocked")
    assert evaluate_request(preset("v1"), req("youtube.com", "P2P")).action is Action.ALLOW


def test_blocked_protocol_never_redirects():
    v = evaluate_request(preset("v2"), req("youtube.com", "FTP"))
    assert v.action is Action.DENY


def test_domain_suffix_match_respects_labels():
    assert domain_matches("www.youtube.com", "youtube.com")
    assert domain_matches("YOUTUBE.COM.", "youtube.com")
    assert not domain_matches("notyoutube.com", "youtube.com")


@pytest.mark.parametrize("kwargs", [
    dict(portal_enabled=True),
    dict(domain_blacklist={"x.com"}),
    dict(bandwidth_cap=-1),
    dict(allowed_protocols={"SMTP"}),
])
def test_config_invariants(kwargs):
    with pytest.raises(ValueError):
        PolicyConfig(name="bad", **kwargs)


def test_unknown_protocol_in_request():
    with pytest.raises(ValueError):
        req("x.com", "GOPHER")


def test_from_dict_rejects_unknown_fields():
    with pytest.raises(ValueError):
        PolicyConfig.from_dict({"name": "x", "colour": "red"})


def test_apply_cap():
    capped = PolicyConfig(name="c", bandwidth_cap=1.0)
    assert apply_cap(capped, 2.475) == 1.0
    assert apply_cap(preset("v1"), 2.475) == 2.475
    assert apply_cap(PolicyConfig(name="c", bandwidth_cap=5.0), 2.475) == 2.475
    with pytest.raises(ValueError):
        apply_cap(capped, -1)


protocol_sets = st.sets(st.sampled_from([p.value for p in Protocol]))
blacklists = st.sets(st.sampled_from(["youtube.com", "example.com", "edu.gh", "com"]), max_size=3)


@given(protocol_sets, blacklists)
def test_grid_matches_oracle(allowed, blacklist):
    """Exhaustive protocol x domain grid against the brute-force verdict oracle."""
    cfg = PolicyConfig(name="g", allowed_protocols=allowed, domain_blacklist=blacklist,
                       redirect_target="knust.edu.gh" if blacklist else "")
    for domain, proto in product(DOMAINS, [p.value for p in Protocol]):
        v = evaluate_request(cfg, req(domain, proto))
        want = oracles.policy_verdict(allowed, blacklist, cfg.redirect_target, domain, proto)
        got = (v.action.value, v.target if v.action is Action.REDIRECT else v.reason)
        assert got == want
        if v.action is Action.ALLOW:
            assert proto in allowed
            assert not any(domain_matches(domain, b) for b in blacklist)
        assert evaluate_request(cfg, req(domain, proto)) == v
