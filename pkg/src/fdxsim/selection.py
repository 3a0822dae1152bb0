"""Choosing which uplink user to serve alongside a fixed downlink beam.

Once the transmit precoder is fixed, the self-interference reaching the
receive array collapses to the output leakage ``L = H_SI F``. Users whose
receive beams sit far from ``span(L)`` can be served at little cost, so
candidates are ranked either by the rate they would achieve after
cancellation or by how aligned their half-duplex beam is with ``L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._linalg import as_matrix, unit_columns
from .beamforming import design_half_duplex
from .cancellation import (AnalogSicConfig, DigitalSicConfig, analog_sic_apply,
                           digital_sic_apply, rx_bfc_project)
from .errors import DimensionError, SelectionError
from .link import LinkBudget, uplink_rate

POLICIES = ("max_rate", "max_orthogonality")


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Uplink candidates, each a `UserChannel` of shape ``N_r x N_user``."""

    users: tuple
    policy: str = "max_rate"

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        if not self.users:
            raise SelectionError("candidate set is empty")
        if self.policy not in POLICIES:
            raise SelectionError(f"unknown policy {self.policy!r}")

    @property
    def user_ids(self) -> list:
        return [u.user_id for u in self.users]


def orthogonality_score(w_hd, leakage) -> float:
    """``|W^H L|_F^2 / (|W|_F^2 |L|_F^2)``; 0 when `leakage` vanishes."""
    w = as_matrix(w_hd)
    lk = as_matrix(leakage)
    denom = np.linalg.norm(w) ** 2 * np.linalg.norm(lk) ** 2
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(w.conj().T @ lk) ** 2 / denom)


def candidate_rate(uplink, leakage, combiner_rule: str = "zero_forcing", mu: float = 0.0,
                   analog_sic: AnalogSicConfig | None = None,
                   digital_sic: DigitalSicConfig | None = None,
                   budget: LinkBudget | None = None, seed: int = 0,
                   n_streams: int = 1) -> float:
    """Post-cancellation uplink rate of a single candidate."""
    budget = budget or LinkBudget()
    lk = as_matrix(leakage)
    w_hd = unit_columns(design_half_duplex(uplink, n_streams, "combiner"))
    w = rx_bfc_project(w_hd, lk, combiner_rule, mu)
    h_eff = w.conj().T @ lk
    residual = h_eff if analog_sic is None else analog_sic_apply(h_eff, analog_sic, seed)
    if digital_sic is not None:
        residual = residual * math.sqrt(digital_sic_apply(1.0, digital_sic))
    return uplink_rate(uplink, w, budget, residual, lk.shape[1])


def select_rx_user(candidates: CandidateSet, leakage, combiner_rule: str = "zero_forcing",
                   mu: float = 0.0, analog_sic: AnalogSicConfig | None = None,
                   digital_sic: DigitalSicConfig | None = None,
                   budget: LinkBudget | None = None, seed: int = 0,
                   n_streams: int = 1):
    """Pick the uplink user to serve against a fixed output leakage.

    Parameters
    ----------
    candidates : CandidateSet
        Users and the scoring policy. ``max_rate`` scores each user by its
        post-cancellation uplink rate (higher is better);
        ``max_orthogonality`` by the normalized coupling between the
        user's half-duplex receive beam and the leakage (lower is better).
    leakage : ndarray, shape (N_r, N_s)
        ``H_SI F`` for the fixed transmit precoder.
    combiner_rule, mu
        Receive-side cancellation passed to `rx_bfc_project`.
    analog_sic, digital_sic, budget, seed
        SIC stages and link budget. Every candidate sees the same analog
        estimation-error draw so that scores differ only through the
        channels.

    Returns
    -------
    user_id, scores
        The winner (lowest index among equal scores) and one score per
        candidate in input order.
    """
    lk = as_matrix(leakage)
    scores = []
    for user in candidates.users:
        ul = as_matrix(user.matrix)
        if ul.shape[0] != lk.shape[0]:
            raise DimensionError(
                f"user {user.user_id!r} channel has {ul.shape[0]} rows, leakage has {lk.shape[0]}",
                module="user-select")
        if candidates.policy == "max_orthogonality":
            w_hd = design_half_duplex(ul, n_streams, "combiner")
            scores.append(orthogonality_score(w_hd, lk))
        else:
            scores.append(candidate_rate(ul, lk, combiner_rule, mu, analog_sic,
                                         digital_sic, budget, seed, n_streams))
    arr = np.asarray(scores)
    best = int(np.argmin(arr) if candidates.policy == "max_orthogonality" else np.argmax(arr))
    return candidates.users[best].user_id, scores
