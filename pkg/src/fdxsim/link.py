"""Saturation checks, power-level budgets, spectral efficiency and rate regions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._linalg import as_matrix, unit_columns
from .beamforming import HybridBeamformer, PhaseQuantizer, design_half_duplex, to_hybrid
from .cancellation import (AnalogSicConfig, DigitalSicConfig, analog_sic_apply,
                           digital_sic_apply, rx_bfc_project, tx_bfc_regularized)
from .errors import CovarianceError, DimensionError

THERMAL_DBM_HZ = -174.0
FLOOR_DBM = -300.0


def mw_to_dbm(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(p)
    return np.maximum(out, FLOOR_DBM)


def dbm_to_mw(p) -> np.ndarray:
    return 10.0 ** (np.asarray(p, dtype=float) / 10.0)


@dataclass(frozen=True)
class LinkBudget:
    """Scalars of the link budget.

    `rx_snr_db` is the per-antenna SNR of the desired uplink signal at the
    full-duplex device; `tx_snr_db` is the same for the downlink at the
    distant receiver.
    """

    tx_power_dbm: float = 30.0
    bandwidth_hz: float = 400e6
    noise_figure_db: float = 5.0
    lna_sat_dbm: float = -10.0
    adc_sat_dbm: float = -30.0
    rx_snr_db: float = 10.0
    tx_snr_db: float = 10.0

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth_hz must be > 0")
        for name in ("tx_power_dbm", "noise_figure_db", "lna_sat_dbm", "adc_sat_dbm",
                     "rx_snr_db", "tx_snr_db"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def noise_floor_dbm(self) -> float:
        return THERMAL_DBM_HZ + 10.0 * math.log10(self.bandwidth_hz) + self.noise_figure_db

    @property
    def inr_scale(self) -> float:
        """Transmit power relative to the receiver noise floor (linear)."""
        return 10.0 ** ((self.tx_power_dbm - self.noise_floor_dbm) / 10.0)


@dataclass(frozen=True)
class PowerLevelsReport:
    si_at_worst_lna_dbm: float
    si_at_worst_adc_dbm: float
    si_post_analog_sic_dbm: float
    si_post_digital_sic_dbm: float
    noise_floor_dbm: float
    lna_margin_db: float
    adc_margin_db: float
    noise_limited: bool

    def rows(self):
        """(stage_name, power_dbm, margin_db) rows for the levels CSV.

        The ADC input is what is left after analog SIC, so both the
        pre-SIC and post-SIC rows are measured against the ADC threshold.
        """
        adc_sat = self.adc_margin_db + self.si_post_analog_sic_dbm
        return [
            ("lna", self.si_at_worst_lna_dbm, self.lna_margin_db),
            ("adc_pre_analog_sic", self.si_at_worst_adc_dbm,
             adc_sat - self.si_at_worst_adc_dbm),
            ("post_analog_sic", self.si_post_analog_sic_dbm, self.adc_margin_db),
            ("post_digital_sic", self.si_post_digital_sic_dbm,
             self.noise_floor_dbm - self.si_post_digital_sic_dbm),
            ("noise_floor", self.noise_floor_dbm, 0.0),
        ]


@dataclass(frozen=True)
class RatePoint:
    se_tx: float
    se_rx: float
    label: str = "bfc"
    mu: float | None = None

    def __post_init__(self):
        if not (self.se_tx >= 0 and self.se_rx >= 0
                and math.isfinite(self.se_tx) and math.isfinite(self.se_rx)):
            raise ValueError(f"invalid rate point ({self.se_tx}, {self.se_rx})")


def _full(bf) -> np.ndarray:
    return bf.matrix if isinstance(bf, HybridBeamformer) else as_matrix(bf)


def saturation_powers(h_si, f, w_analog, budget: LinkBudget):
    """Per-antenna LNA and per-RF-chain ADC input SI powers in dBm.

    The transmit power is split evenly over the N_s streams of the
    precoder `f` (total power N_s), so LNA i sees
    ``P_tx / N_s * |(H_SI F)_i|^2`` and ADC j sees the same for
    ``W_RF^H H_SI F``. Zero power is reported as -300 dBm.
    """
    h = as_matrix(getattr(h_si, "matrix", h_si))
    fm = _full(f)
    wa = w_analog.analog if isinstance(w_analog, HybridBeamformer) else as_matrix(w_analog)
    if fm.shape[0] != h.shape[1] or wa.shape[0] != h.shape[0]:
        raise DimensionError("beamformers do not fit the SI channel", module="link-eval")
    per_stream = dbm_to_mw(budget.tx_power_dbm) / fm.shape[1]
    out_leak = h @ fm
    lna = per_stream * np.sum(np.abs(out_leak) ** 2, axis=1)
    adc = per_stream * np.sum(np.abs(wa.conj().T @ out_leak) ** 2, axis=1)
    return mw_to_dbm(lna), mw_to_dbm(adc)


def _check_psd(c: np.ndarray) -> None:
    if not np.allclose(c, c.conj().T, atol=1e-9 * max(1.0, np.abs(c).max())):
        raise CovarianceError("interference covariance is not Hermitian")
    ev = np.linalg.eigvalsh((c + c.conj().T) / 2)
    if ev.size and ev.min() < -1e-9:
        raise CovarianceError(f"interference covariance has eigenvalue {ev.min():.3g}")


def _logdet2(m: np.ndarray) -> float:
    sign, val = np.linalg.slogdet(m)
    if sign.real <= 0:
        raise CovarianceError("covariance is singular")
    return val / math.log(2)


def rate_from_covariances(signal_cov, noise_cov) -> float:
    """``log2 det(N + S) - log2 det(N)``, clipped at zero."""
    return max(0.0, _logdet2(noise_cov + signal_cov) - _logdet2(noise_cov))


def spectral_efficiency(h_eff, interference_cov=None, noise_power: float = 1.0,
                        signal_power: float = 1.0) -> float:
    """Gaussian-signalling rate with SI treated as Gaussian interference.

    ``log2 det(I + (n I + C)^{-1} H H^H P / N_s)`` with N_s the number of
    columns of `h_eff`.
    """
    h = as_matrix(h_eff)
    n_r, n_s = h.shape
    c = np.zeros((n_r, n_r), complex) if interference_cov is None else as_matrix(interference_cov)
    if c.shape != (n_r, n_r):
        raise DimensionError(f"covariance {c.shape} does not match {n_r} outputs",
                             module="link-eval")
    _check_psd(c)
    noise = noise_power * np.eye(n_r) + c
    return rate_from_covariances(signal_power / n_s * (h @ h.conj().T), noise)


def levels_report(lna_dbm, adc_dbm, post_analog_dbm, budget: LinkBudget,
                  digital: DigitalSicConfig) -> PowerLevelsReport:
    """Chain worst-case stage powers into a PowerLevelsReport.

    `lna_dbm` and `adc_dbm` may be per-element arrays; the worst
    (largest) entry is reported. `post_analog_dbm` is the worst RF-chain
    power after analog SIC; digital SIC is applied on top of it.
    """
    lna = float(np.max(lna_dbm))
    adc = float(np.max(adc_dbm))
    post_a = float(np.max(post_analog_dbm))
    post_d = float(mw_to_dbm(digital_sic_apply(float(dbm_to_mw(post_a)), digital)))
    nf = budget.noise_floor_dbm
    return PowerLevelsReport(
        si_at_worst_lna_dbm=lna,
        si_at_worst_adc_dbm=adc,
        si_post_analog_sic_dbm=post_a,
        si_post_digital_sic_dbm=post_d,
        noise_floor_dbm=nf,
        lna_margin_db=budget.lna_sat_dbm - lna,
        adc_margin_db=budget.adc_sat_dbm - post_a,
        noise_limited=post_d <= nf,
    )


def db_chain_levels(budget: LinkBudget, adc_coupling_db: float, analog_sic_db: float,
                    digital: DigitalSicConfig,
                    lna_coupling_db: float | None = None) -> PowerLevelsReport:
    """Levels from a plain dB chain instead of simulated beamformers.

    ``adc_coupling_db`` is the total loss from the transmit power to the
    ADC input before analog SIC; ``lna_coupling_db`` defaults to it.
    """
    if lna_coupling_db is None:
        lna_coupling_db = adc_coupling_db
    lna = budget.tx_power_dbm - lna_coupling_db
    adc = budget.tx_power_dbm - adc_coupling_db
    return levels_report(lna, adc, adc - analog_sic_db, budget, digital)


@dataclass(frozen=True, eq=False)
class LinkScenario:
    """Everything the duplexing pipeline needs for one channel realization.

    `downlink` is the ``N_user x N_t`` channel from the device to the
    distant receiver and `uplink` the ``N_r x N_user`` channel from the
    distant transmitter to the device. With `n_rf` unset both beamformers
    stay fully digital and the analog canceller acts on the stream-level
    effective channel.
    """

    h_si: np.ndarray
    downlink: np.ndarray
    uplink: np.ndarray
    budget: LinkBudget = field(default_factory=LinkBudget)
    n_streams: int = 1
    analog_sic: AnalogSicConfig | None = None
    digital_sic: DigitalSicConfig | None = None
    perfect_sic: bool = False
    n_rf: int | None = None
    quantizer: PhaseQuantizer | None = None
    design: str = "receive_aware"
    rx_mode: str = "regularized"
    seed: int = 0

    def __post_init__(self):
        if self.design not in ("receive_aware", "sequential"):
            raise ValueError(f"unknown design {self.design!r}")
        if self.rx_mode not in ("regularized", "zero_forcing"):
            raise ValueError(f"unknown rx_mode {self.rx_mode!r}")
        h = as_matrix(getattr(self.h_si, "matrix", self.h_si))
        dl = as_matrix(self.downlink)
        ul = as_matrix(self.uplink)
        if dl.shape[1] != h.shape[1] or ul.shape[0] != h.shape[0]:
            raise DimensionError("user channels do not match the SI channel",
                                 module="link-eval")
        object.__setattr__(self, "h_si", h)
        object.__setattr__(self, "downlink", dl)
        object.__setattr__(self, "uplink", ul)


@dataclass(frozen=True, eq=False)
class LinkState:
    """Intermediate products of one pipeline evaluation."""

    precoder: object
    combiner: object
    residual_rf: np.ndarray
    residual: np.ndarray
    se_tx: float
    se_rx: float


def _split(bf):
    if isinstance(bf, HybridBeamformer):
        return bf.analog, bf.digital
    m = as_matrix(bf)
    return m, np.eye(m.shape[1], dtype=complex)


def downlink_se(scn: LinkScenario, precoder) -> float:
    f = _full(precoder)
    snr = 10.0 ** (scn.budget.tx_snr_db / 10.0)
    return spectral_efficiency(scn.downlink @ f, None, 1.0, snr)


def uplink_rate(uplink, combiner, budget: LinkBudget, residual=None,
                n_tx_streams: int = 1) -> float:
    """Uplink rate through `combiner` with SI `residual` at its output.

    The distant transmitter re-optimizes its precoder for the combined
    channel. Noise at the combiner output has covariance ``W^H W``.
    """
    w = _full(combiner)
    ul = as_matrix(uplink)
    if ul.shape[0] != w.shape[0]:
        raise DimensionError(f"uplink has {ul.shape[0]} rows, combiner has {w.shape[0]}",
                             module="link-eval")
    q, _ = np.linalg.qr(w)
    fu = design_half_duplex(q.conj().T @ ul, w.shape[1], "precoder")
    heff = w.conj().T @ ul @ fu
    snr = 10.0 ** (budget.rx_snr_db / 10.0)
    signal = snr / fu.shape[1] * (heff @ heff.conj().T)
    noise = w.conj().T @ w
    if residual is not None:
        noise = noise + budget.inr_scale / n_tx_streams * (residual @ residual.conj().T)
    return rate_from_covariances(signal, noise)


def uplink_se(scn: LinkScenario, combiner, residual=None, n_tx_streams: int = 1) -> float:
    return uplink_rate(scn.uplink, combiner, scn.budget, residual, n_tx_streams)


def hd_beams(scn: LinkScenario):
    """Half-duplex-optimal precoder and combiner (unit-norm columns)."""
    f_hd = unit_columns(design_half_duplex(scn.downlink, scn.n_streams, "precoder"))
    w_hd = unit_columns(design_half_duplex(scn.uplink, scn.n_streams, "combiner"))
    return f_hd, w_hd


def _hybrid(m, scn: LinkScenario, role):
    if scn.n_rf is None:
        return m
    return to_hybrid(m, scn.n_rf, scn.quantizer or PhaseQuantizer(), role)


def evaluate_link(scn: LinkScenario, mu: float, sic: bool = True) -> LinkState:
    """Run design -> SI -> SIC -> rates for one regularization strength.

    ``design="receive_aware"`` keeps the half-duplex combiner and shrinks
    the precoder against the SI channel that combiner actually sees,
    ``W_hd^H H_SI``. ``design="sequential"`` shrinks the precoder against
    the full ``H_SI``, forms the output leakage and then steers the
    combiner away from it with `rx_mode` (regularized with the same `mu`,
    or zero-forcing). Either way ``mu = 0`` reproduces the half-duplex
    beams.
    """
    f_hd, w_hd = hd_beams(scn)
    if scn.design == "receive_aware":
        w = _hybrid(w_hd, scn, "combiner")
        f = _hybrid(tx_bfc_regularized(f_hd, _full(w).conj().T @ scn.h_si, mu),
                    scn, "precoder")
    else:
        f = _hybrid(tx_bfc_regularized(f_hd, scn.h_si, mu), scn, "precoder")
        leakage = scn.h_si @ _full(f)
        if scn.rx_mode == "regularized":
            w_dig = rx_bfc_project(w_hd, leakage, "regularized", mu)
        else:
            w_dig = rx_bfc_project(w_hd, leakage, scn.rx_mode)
        w = _hybrid(w_dig, scn, "combiner")

    res_rf, residual = stage_residuals(scn, f, w, sic)
    n_s = _full(f).shape[1]
    return LinkState(f, w, res_rf, residual, downlink_se(scn, f),
                     uplink_se(scn, w, residual, n_s))


def stage_residuals(scn: LinkScenario, f, w, sic: bool = True):
    """SI left after analog SIC (RF-chain level) and after digital SIC (stream level)."""
    f_rf, f_bb = _split(f)
    w_rf, w_bb = _split(w)
    h_rf = w_rf.conj().T @ scn.h_si @ f_rf
    if sic and scn.perfect_sic:
        res_rf = np.zeros_like(h_rf)
    elif sic and scn.analog_sic is not None:
        res_rf = analog_sic_apply(h_rf, scn.analog_sic, scn.seed)
    else:
        res_rf = h_rf
    residual = w_bb.conj().T @ res_rf @ f_bb
    if sic and scn.digital_sic is not None and not scn.perfect_sic:
        residual = residual * math.sqrt(digital_sic_apply(1.0, scn.digital_sic))
    return res_rf, residual


def fd_capacity(scn: LinkScenario) -> RatePoint:
    """Both links at their half-duplex rates with SI removed entirely."""
    st = evaluate_link(replace(scn, perfect_sic=True), 0.0)
    return RatePoint(st.se_tx, st.se_rx, "fd_capacity", None)


def rate_region_sweep(scn: LinkScenario, mu_grid) -> list[RatePoint]:
    """BFC rate points over `mu_grid` followed by the reference points.

    Reference labels: ``fd_capacity`` (perfect-SIC corner), ``hd_tx_only``
    and ``hd_rx_only`` (ends of the half-duplex time-sharing segment) and
    ``no_mitigation`` (``mu = 0`` without any SIC).
    """
    grid = [float(m) for m in np.atleast_1d(mu_grid)]
    if not grid:
        raise ValueError("mu_grid is empty")
    points = []
    for mu in grid:
        st = evaluate_link(scn, mu)
        points.append(RatePoint(st.se_tx, st.se_rx, "bfc", mu))
    corner = fd_capacity(scn)
    raw = evaluate_link(scn, 0.0, sic=False)
    points += [
        corner,
        RatePoint(corner.se_tx, 0.0, "hd_tx_only", None),
        RatePoint(0.0, corner.se_rx, "hd_rx_only", None),
        RatePoint(raw.se_tx, raw.se_rx, "no_mitigation", 0.0),
    ]
    return points


def beam_levels(scn: LinkScenario, f, w) -> PowerLevelsReport:
    """Power levels for given precoder `f` and combiner `w`."""
    res_rf, _ = stage_residuals(scn, f, w)
    _, f_bb = _split(f)
    per_stream = dbm_to_mw(scn.budget.tx_power_dbm) / f_bb.shape[1]
    lna, adc = saturation_powers(scn.h_si, f, _split(w)[0], scn.budget)
    post = per_stream * np.sum(np.abs(res_rf @ f_bb) ** 2, axis=1)
    digital = scn.digital_sic or DigitalSicConfig(0.0)
    return levels_report(lna, adc, mw_to_dbm(post), scn.budget, digital)


def simulated_levels(scn: LinkScenario, mu: float) -> PowerLevelsReport:
    """Power levels of the pipeline at one regularization strength."""
    st = evaluate_link(scn, mu)
    return beam_levels(scn, st.precoder, st.combiner)
