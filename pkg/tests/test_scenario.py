import logging

import numpy as np
import pytest

from fdxsim.errors import ScenarioError
from fdxsim.scenario import (SCHEMA, arrays, parse_scenario, resolve_seed, rx_pose,
                             serialize_scenario, substream_seed)

MINIMAL = """
[array]
tx_shape = 8
rx_shape = 8

[channel]
seed = 7
"""


def test_minimal_gets_defaults(caplog):
    with caplog.at_level(logging.INFO, logger="fdxsim"):
        scn = parse_scenario(MINIMAL)
    assert scn.channel.seed == 7
    assert scn.channel.kappa == 10.0
    assert scn.budget.bandwidth_hz == 400e6
    assert scn.cancellation.energy_fraction == 0.99
    assert scn.beamforming.phase_bits == "ideal"
    logged = caplog.text
    assert "default [channel] kappa = 10.0" in logged
    assert "default [channel] seed" not in logged
    n_defaults = sum(len(keys) for keys in SCHEMA.values()) - 3
    assert logged.count("default [") == n_defaults


def test_negative_kappa_names_section():
    with pytest.raises(ScenarioError) as err:
        parse_scenario("[channel]\n\nkappa = -1\n")
    assert err.value.section == "channel" and err.value.line == 3
    assert "[channel] line 3" in str(err.value)


@pytest.mark.parametrize("text, section, line", [
    ("[array]\nfoo = 1\n", "array", 2),
    ("[nope]\n", "nope", 1),
    ("[budget]\nbandwidth_hz = abc\n", "budget", 2),
    ("[budget]\nbandwidth_hz = 0\n", "budget", 2),
    ("[channel]\nseed = -4\n", "channel", 2),
    ("[cancellation]\nstrategy = magic\n", "cancellation", 2),
    ("[array]\nspacing = 0.5\nspacing = 0.4\n", "array", 3),
    ("[users]\ncandidates = A:2, A:3\n", "users", 2),
    ("[array]\njust text\n", "array", 2),
])
def test_rejections(text, section, line):
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert err.value.section == section and err.value.line == line


def test_key_outside_section():
    with pytest.raises(ScenarioError) as err:
        parse_scenario("kappa = 1\n")
    assert err.value.line == 1


def test_cross_checks():
    with pytest.raises(ScenarioError, match="n_rf"):
        parse_scenario("[beamforming]\nn_streams = 2\nn_rf = 1\n")


def test_round_trip():
    text = MINIMAL + """
[beamforming]
n_rf = 2
phase_bits = 3

[cancellation]
mu_grid = 0, 0.1, 1e3

[users]
candidates = a:1, b:3
"""
    scn = parse_scenario(text)
    again = parse_scenario(serialize_scenario(scn))
    assert again == scn
    assert again.cancellation.mu_grid == (0.0, 0.1, 1000.0)


def test_round_trip_special_values():
    scn = parse_scenario("[channel]\nkappa = inf\n[array]\nrx_offset = 5, 0, 0.1\n"
                         "af_ranges = inf, 1.225\n")
    assert parse_scenario(serialize_scenario(scn)) == scn
    assert scn.channel.kappa == np.inf


class TestSeeds:
    def test_precedence(self):
        scn = parse_scenario(MINIMAL)
        bare = parse_scenario("[array]\ntx_shape = 4\n")
        env = {"FDXSIM_SEED": "99"}
        assert resolve_seed(5, scn, env) == 5
        assert resolve_seed(None, scn, env) == 7
        assert resolve_seed(None, bare, env) == 99
        assert resolve_seed(None, bare, {}) == 0

    def test_bad_env(self):
        bare = parse_scenario("")
        with pytest.raises(ScenarioError):
            resolve_seed(None, bare, {"FDXSIM_SEED": "x"})

    def test_substreams(self):
        assert substream_seed(1, "channel") == substream_seed(1, "channel")
        assert substream_seed(1, "channel") != substream_seed(1, "analog_sic")
        assert substream_seed(1, "channel") != substream_seed(2, "channel")
        assert 0 <= substream_seed(2 ** 64 - 1, "x") < 2 ** 64


def test_geometry_from_config():
    scn = parse_scenario("[array]\ntx_shape = 4x2\nrx_shape = 3\nrx_gap = 1.5\n")
    tx, rx = arrays(scn)
    assert tx.kind == "planar" and tx.n_elements == 8 and rx.n_elements == 3
    pts = rx_pose(scn, tx, rx).apply(rx.elements)
    assert pts[:, 0].min() - tx.elements[:, 0].max() == pytest.approx(1.5)
