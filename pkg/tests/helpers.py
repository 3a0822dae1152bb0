"""Scenario builders and a straight-line reference pipeline for tests."""

import numpy as np

from fdxsim.cancellation import AnalogSicConfig, DigitalSicConfig
from fdxsim.channel import ClusteredChannelParams, si_channel, user_channel
from fdxsim.geometry import linear_array
from fdxsim.link import LinkBudget, LinkScenario

MU_GRID = [0.0] + [10.0 ** k for k in range(-3, 4)]


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def make_scenario(seed, kappa=10.0, isolation_db=40.0, n=8, n_user=4, **kw):
    tx, rx = linear_array(n), linear_array(n)
    h = si_channel(tx, rx, kappa, isolation_db, ClusteredChannelParams(seed=seed))
    dl = user_channel(tx, linear_array(n_user), ClusteredChannelParams(seed=seed + 1000),
                      direction="downlink")
    ul = user_channel(rx, linear_array(n_user), ClusteredChannelParams(seed=seed + 2000),
                      direction="uplink")
    kw.setdefault("analog_sic", AnalogSicConfig(0.1))
    kw.setdefault("digital_sic", DigitalSicConfig(20.0))
    kw.setdefault("seed", seed)
    return LinkScenario(h.matrix, dl.matrix, ul.matrix, kw.pop("budget", LinkBudget()), **kw)


def _top_right(m):
    _, _, vh = np.linalg.svd(m)
    return vh[0].conj()


def _top_left(m):
    u, _, _ = np.linalg.svd(m)
    return u[:, 0]


def reference_point(scn, mu):
    """Single-stream receive-aware pipeline written out step by step."""
    b = scn.budget
    h = scn.h_si
    f_hd = _top_right(scn.downlink)
    w = _top_left(scn.uplink)
    g = w.conj() @ h  # SI row seen through the fixed combiner
    a = np.eye(h.shape[1]) + mu * np.outer(g.conj(), g)
    f = np.linalg.solve(a, f_hd)
    f /= np.linalg.norm(f)
    h_rf = w.conj() @ h @ f
    if scn.perfect_sic:
        res = 0.0
    else:
        res = h_rf
        if scn.analog_sic is not None:
            rng = np.random.default_rng(scn.seed)
            scale = scn.analog_sic.estimation_error_std * abs(h_rf)
            res = -scale * (rng.standard_normal((1, 1)) + 1j * rng.standard_normal((1, 1)))[0, 0] / np.sqrt(2)
        if scn.digital_sic is not None:
            res = res * 10 ** (-scn.digital_sic.suppression_db / 20)
    snr_tx = 10 ** (b.tx_snr_db / 10)
    snr_rx = 10 ** (b.rx_snr_db / 10)
    se_tx = np.log2(1 + snr_tx * np.linalg.norm(scn.downlink @ f) ** 2)
    gain = np.linalg.norm(w.conj() @ scn.uplink) ** 2
    inr = 10 ** ((b.tx_power_dbm - b.noise_floor_dbm) / 10)
    se_rx = np.log2(1 + snr_rx * gain / (1 + inr * abs(res) ** 2))
    coupling = np.linalg.norm(h @ f) ** 2
    return se_tx, se_rx, coupling
