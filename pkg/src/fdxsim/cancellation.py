"""Effective SI channel, beamforming cancellation and SIC stage models.

Three mitigation stages are chained: beamforming cancellation shapes the
precoder and combiner, an analog canceller across RF chains subtracts an
estimate of the (small) RF-chain-level SI channel, and digital SIC is a
fixed suppression of whatever power is left.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import (ANNIHILATED, as_matrix, energy_rank, numerical_rank,
                      regularized_apply, unit_columns)
from .beamforming import HybridBeamformer
from .errors import DimensionError, EmptyNullSpaceError


@dataclass(frozen=True)
class BfcConfig:
    """How the transmit side is steered away from the SI channel.

    Exactly one of `rank` (explicit k) or `energy_fraction` decides the
    dimension of the SI row space used by zero-forcing.
    """

    strategy: str = "regularized"
    rank: int | None = None
    energy_fraction: float = 0.99
    mu: float = 1.0

    def __post_init__(self):
        if self.strategy not in ("zero_forcing", "regularized"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.rank is not None and int(self.rank) < 0:
            raise ValueError("rank must be >= 0")
        if not 0 < self.energy_fraction <= 1:
            raise ValueError("energy_fraction must be in (0, 1]")
        if not self.mu >= 0:
            raise ValueError("mu must be >= 0")


@dataclass(frozen=True)
class AnalogSicConfig:
    estimation_error_std: float = 0.1

    def __post_init__(self):
        if not self.estimation_error_std >= 0:
            raise ValueError("estimation_error_std must be >= 0")

    @property
    def expected_suppression_db(self) -> float:
        s = self.estimation_error_std
        return np.inf if s == 0 else -20.0 * np.log10(s)


@dataclass(frozen=True)
class DigitalSicConfig:
    suppression_db: float = 20.0

    def __post_init__(self):
        if not self.suppression_db >= 0:
            raise ValueError("suppression_db must be >= 0")


def _stages(bf):
    """(analog, digital) pair for a HybridBeamformer or a plain matrix."""
    if isinstance(bf, HybridBeamformer):
        return bf.analog, bf.digital
    m = as_matrix(bf)
    return np.eye(m.shape[0], dtype=complex), m


def _h(h_si) -> np.ndarray:
    return as_matrix(getattr(h_si, "matrix", h_si))


def effective_si_channel(w, h_si, f) -> np.ndarray:
    """``W_BB^H W_RF^H H_SI F_RF F_BB``.

    `w` and `f` are HybridBeamformers or plain matrices (taken as fully
    digital).
    """
    h = _h(h_si)
    w_rf, w_bb = _stages(w)
    f_rf, f_bb = _stages(f)
    if w_rf.shape[0] != h.shape[0] or f_rf.shape[0] != h.shape[1]:
        raise DimensionError(
            f"combiner {w_rf.shape} / precoder {f_rf.shape} do not fit channel {h.shape}",
            module="cancellation")
    return w_bb.conj().T @ (w_rf.conj().T @ h @ f_rf) @ f_bb


def _resolve_rank(s, rank, energy_fraction) -> int:
    if rank is not None:
        return int(rank)
    return energy_rank(s, energy_fraction)


def tx_bfc_zero_forcing(f_hd, h_si, rank: int | None = None,
                        energy_fraction: float = 0.99) -> np.ndarray:
    """Project precoder columns off the dominant SI row space.

    The row space is the span of the top-k right singular vectors of
    ``H_SI``, with k given explicitly or as the smallest count holding
    `energy_fraction` of the singular-value energy. Output columns have
    unit norm (total power N_s). A column that the projection annihilates
    is replaced by the weakest right singular vector not yet used.
    """
    h = _h(h_si)
    f = as_matrix(f_hd)
    nr, nt = h.shape
    if f.shape[0] != nt:
        raise DimensionError(f"precoder has {f.shape[0]} rows, channel has {nt} columns",
                             module="cancellation")
    _, s, vh = np.linalg.svd(h)
    k = _resolve_rank(s, rank, energy_fraction)
    if k > min(nr, nt):
        raise DimensionError(f"rank {k} exceeds min{h.shape}", module="cancellation")
    if k >= nt:
        raise EmptyNullSpaceError("no transmit directions remain outside the SI row space")
    v = vh.conj().T
    vk = v[:, :k]
    out = f - vk @ (vk.conj().T @ f)
    spare = iter(range(nt - 1, k - 1, -1))
    for j in range(out.shape[1]):
        if np.linalg.norm(out[:, j]) < ANNIHILATED:
            out[:, j] = v[:, next(spare)]
    return unit_columns(out)


def tx_bfc_regularized(f_hd, h_si, mu: float) -> np.ndarray:
    """``(I + mu H^H H)^{-1} f`` per column, renormalized to unit columns."""
    if not mu >= 0:
        raise ValueError("mu must be >= 0")
    h = _h(h_si)
    f = as_matrix(f_hd)
    if f.shape[0] != h.shape[1]:
        raise DimensionError(f"precoder has {f.shape[0]} rows, channel has {h.shape[1]} columns",
                             module="cancellation")
    return unit_columns(regularized_apply(h, f, mu))


def rx_bfc_project(w_hd, leakage, mode: str = "zero_forcing", mu: float = 0.0) -> np.ndarray:
    """Steer combiner columns away from the output leakage ``L = H_SI F``.

    ``mode="zero_forcing"`` projects onto the orthogonal complement of
    ``span(L)``; ``mode="regularized"`` applies ``(I + mu L L^H)^{-1}``.
    Columns are returned with unit norm.
    """
    w = as_matrix(w_hd)
    lk = as_matrix(leakage)
    if lk.shape[0] != w.shape[0]:
        raise DimensionError(f"leakage has {lk.shape[0]} rows, combiner has {w.shape[0]}",
                             module="cancellation")
    nr = w.shape[0]
    if mode == "regularized":
        if not mu >= 0:
            raise ValueError("mu must be >= 0")
        return unit_columns(regularized_apply(lk.conj().T, w, mu))
    if mode != "zero_forcing":
        raise ValueError(f"unknown mode {mode!r}")
    u, s, _ = np.linalg.svd(lk)
    r = numerical_rank(s, lk.shape)
    if r == 0:
        return unit_columns(w.copy())
    if r >= nr:
        raise EmptyNullSpaceError("leakage spans the whole receive space")
    q = u[:, :r]
    out = w - q @ (q.conj().T @ w)
    spare = iter(range(nr - 1, r - 1, -1))
    for j in range(out.shape[1]):
        if np.linalg.norm(out[:, j]) < ANNIHILATED:
            out[:, j] = u[:, next(spare)]
    return unit_columns(out)


def analog_sic_apply(h_eff_rf, sic: AnalogSicConfig, seed) -> np.ndarray:
    """Residual ``h - h_hat`` of an analog canceller with a noisy estimate.

    The estimate error has i.i.d. circular Gaussian entries with standard
    deviation ``sigma * |h|_F / sqrt(h.size)``, so the expected residual
    energy is ``sigma^2 |h|_F^2``.
    """
    h = as_matrix(h_eff_rf)
    if not np.all(np.isfinite(h)):
        raise ValueError("effective channel must be finite")
    scale = sic.estimation_error_std * np.linalg.norm(h) / np.sqrt(h.size)
    if scale == 0:
        return np.zeros_like(h)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    err = scale * (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)) / np.sqrt(2)
    return -err


def digital_sic_apply(residual_power: float, sic: DigitalSicConfig) -> float:
    if residual_power < 0:
        raise ValueError("residual_power must be >= 0")
    return residual_power * 10.0 ** (-sic.suppression_db / 10.0)
