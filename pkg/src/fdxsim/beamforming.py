"""Half-duplex beam design, hybrid factorization and analog codebooks."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._linalg import as_matrix, canonical_phase, regularized_apply
from .errors import DimensionError

log = logging.getLogger(__name__)

UNIT_TOL = 1e-9

#: Finest grid visited before the unquantized stage of the ALS chain.
MAX_CHAIN_BITS = 8

# relative singular-value cutoff for the digital least-squares solve
LSTSQ_RCOND = 1e-6


@dataclass(frozen=True)
class PhaseQuantizer:
    """Phase-shifter resolution.

    Parameters
    ----------
    phase_bits : int or None
        Number of phase bits; ``None`` (or ``"ideal"``) means continuous
        phase control.
    amplitude_bits : int or None
        Attenuator resolution. Only ``None`` (pure phase shifters) is
        supported by the factorization.
    """

    phase_bits: int | None = None
    amplitude_bits: int | None = None

    def __post_init__(self):
        bits = self.phase_bits
        if isinstance(bits, str):
            if bits.lower() != "ideal":
                raise ValueError(f"phase_bits must be an integer or 'ideal', got {bits!r}")
            bits = None
        if bits is not None:
            bits = int(bits)
            if bits < 1:
                raise ValueError("phase_bits must be >= 1")
        amp = self.amplitude_bits
        if isinstance(amp, str):
            if amp.lower() != "none":
                raise ValueError("amplitude_bits must be an integer or 'none'")
            amp = None
        if amp is not None and int(amp) < 0:
            raise ValueError("amplitude_bits must be >= 0")
        object.__setattr__(self, "phase_bits", bits)
        object.__setattr__(self, "amplitude_bits", None if amp is None else int(amp))

    @property
    def ideal(self) -> bool:
        return self.phase_bits is None

    @property
    def levels(self) -> int | None:
        return None if self.ideal else 2 ** self.phase_bits

    @property
    def step(self) -> float:
        return 0.0 if self.ideal else 2 * np.pi / self.levels

    def grid(self) -> np.ndarray:
        if self.ideal:
            raise ValueError("an ideal quantizer has no finite grid")
        return self.step * np.arange(self.levels)

    def quantize(self, phases) -> np.ndarray:
        """Round phases to the nearest grid point in ``[0, 2 pi)``.

        Exact ties go to the smaller phase.
        """
        ph = np.mod(np.asarray(phases, dtype=float), 2 * np.pi)
        if self.ideal:
            return ph
        k = np.ceil(ph / self.step - 0.5)
        return self.step * np.mod(k, self.levels)

    def on_grid(self, values, atol: float = 1e-9) -> bool:
        """True when every entry is unit modulus with a grid phase."""
        v = np.asarray(values)
        if not np.allclose(np.abs(v), 1.0, atol=atol):
            return False
        if self.ideal:
            return True
        r = np.mod(np.angle(v), 2 * np.pi) / self.step
        return bool(np.all(np.abs(r - np.round(r)) < atol / self.step))


@dataclass(frozen=True, eq=False)
class HybridBeamformer:
    """Analog (unit-modulus) stage followed by a digital stage.

    ``analog`` is ``N_ant x N_rf`` and ``digital`` is ``N_rf x N_s``. For the
    precoder role the overall matrix carries power ``N_s``.
    """

    analog: np.ndarray
    digital: np.ndarray
    role: str = "precoder"
    quantizer: PhaseQuantizer = field(default_factory=PhaseQuantizer)
    reconstruction_error: float = float("nan")

    def __post_init__(self):
        a = as_matrix(self.analog)
        d = as_matrix(self.digital)
        if self.role not in ("precoder", "combiner"):
            raise ValueError(f"unknown role {self.role!r}")
        n_ant, n_rf = a.shape
        if d.shape[0] != n_rf:
            raise DimensionError(
                f"analog has {n_rf} RF chains but digital has {d.shape[0]} rows",
                module="beamforming")
        n_s = d.shape[1]
        if not n_s <= n_rf <= n_ant:
            raise DimensionError(f"need N_s <= N_rf <= N_ant, got {n_s}, {n_rf}, {n_ant}",
                                 module="beamforming")
        if not self.quantizer.on_grid(a):
            raise ValueError("analog entries must be unit modulus on the phase grid")
        if self.role == "precoder":
            power = np.linalg.norm(a @ d) ** 2
            if abs(power - n_s) > UNIT_TOL * max(n_s, 1):
                raise ValueError(f"precoder power {power} != N_s = {n_s}")
        object.__setattr__(self, "analog", a)
        object.__setattr__(self, "digital", d)

    @property
    def matrix(self) -> np.ndarray:
        return self.analog @ self.digital

    @property
    def n_rf(self) -> int:
        return self.analog.shape[1]

    @property
    def n_streams(self) -> int:
        return self.digital.shape[1]


@dataclass(frozen=True, eq=False)
class Codebook:
    """Analog beams, one unit-modulus vector per row."""

    beams: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.beams, dtype=complex))
        if b.shape[0] == 0 or b.shape[1] == 0:
            raise ValueError("codebook is empty")
        if not np.allclose(np.abs(b), 1.0, atol=UNIT_TOL):
            raise ValueError("codebook entries must be unit modulus")
        labels = tuple(self.labels) or tuple(str(i) for i in range(b.shape[0]))
        if len(labels) != b.shape[0]:
            raise ValueError("one label per beam required")
        object.__setattr__(self, "beams", b)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.beams.shape[0]

    @property
    def n_ant(self) -> int:
        return self.beams.shape[1]


def design_half_duplex(channel, n_streams: int, role: str = "precoder") -> np.ndarray:
    """Dominant singular vectors of `channel`.

    Returns the top `n_streams` right singular vectors for a precoder or
    left singular vectors for a combiner. Columns are orthonormal (so the
    squared Frobenius norm is `n_streams`) and each is phase-rotated so
    its largest entry is real positive.
    """
    h = as_matrix(channel)
    if not 1 <= n_streams <= min(h.shape):
        raise DimensionError(
            f"n_streams={n_streams} exceeds channel dimensions {h.shape}",
            module="beamforming")
    u, _, vh = np.linalg.svd(h)
    if role == "precoder":
        cols = vh.conj().T[:, :n_streams]
    elif role == "combiner":
        cols = u[:, :n_streams]
    else:
        raise ValueError(f"unknown role {role!r}")
    return canonical_phase(cols)


def _best_grid_vector(x: np.ndarray, quantizer: PhaseQuantizer) -> np.ndarray:
    """Unit-modulus grid vector ``a`` maximizing ``|a^H x|``.

    The digital stage absorbs any common phase, so the search runs over a
    common rotation ``psi`` followed by nearest-point rounding. Rounding
    only changes where some ``phase_n + psi`` crosses a grid midpoint,
    which leaves N candidate intervals per grid step.
    """
    phases = np.angle(x)
    if quantizer.ideal:
        return np.exp(1j * phases)
    step = quantizer.step
    breaks = np.sort(np.mod(step / 2 - phases, step))
    mids = (breaks + np.roll(breaks, -1)) / 2
    mids[-1] = np.mod((breaks[-1] + breaks[0] + step) / 2, step)
    best, best_val = None, -1.0
    for psi in np.unique(mids):
        a = np.exp(1j * quantizer.quantize(phases + psi))
        val = abs(np.vdot(a, x))
        if val > best_val * (1 + 1e-12):
            best, best_val = a, val
    return best


def _project_unit(m: np.ndarray, quantizer: PhaseQuantizer) -> np.ndarray:
    return np.exp(1j * quantizer.quantize(np.angle(m)))


def _finalize(analog, digital, design, role, quantizer):
    if role == "precoder":
        power = np.linalg.norm(analog @ digital) ** 2
        if power > 0:
            digital = digital * np.sqrt(digital.shape[1] / power)
    err = float(np.linalg.norm(analog @ digital - design))
    return HybridBeamformer(analog, digital, role, quantizer, err)


def _als(design, analog, quantizer, max_iter, tol):
    """Alternate least-squares digital and phase-projected analog stages.

    Returns the best iterate seen, starting with `analog` itself.
    """
    digital = np.linalg.lstsq(analog, design, rcond=LSTSQ_RCOND)[0]
    best = (np.linalg.norm(analog @ digital - design), analog, digital)
    prev = best[0]
    for _ in range(max_iter):
        analog = _project_unit(design @ digital.conj().T, quantizer)
        digital = np.linalg.lstsq(analog, design, rcond=LSTSQ_RCOND)[0]
        res = np.linalg.norm(analog @ digital - design)
        if res < best[0]:
            best = (res, analog, digital)
        if abs(prev - res) <= tol * max(prev, 1e-300):
            break
        prev = res
    return best


def to_hybrid(design, n_rf: int, quantizer: PhaseQuantizer | None = None,
              role: str = "precoder", max_iter: int = 50,
              tol: float = 1e-6) -> HybridBeamformer:
    """Factor a fully digital design into analog and digital stages.

    With ``n_rf`` equal to the stream count each analog column is the
    best phase-quantized match of the corresponding design column and the
    digital stage is a diagonal least-squares scaling. With more RF
    chains, alternating least squares is run on a chain of grids of
    increasing resolution, each stage seeded with the previous stage's
    solution, so a finer quantizer never does worse than a coarser one.

    Precoders are rescaled to power ``N_s``; combiners are left at the
    least-squares scale.
    """
    quantizer = quantizer or PhaseQuantizer()
    if quantizer.amplitude_bits is not None:
        raise ValueError("amplitude control is not supported; use amplitude_bits=None")
    x = as_matrix(design)
    n_ant, n_s = x.shape
    if n_rf < n_s:
        raise DimensionError(f"n_rf={n_rf} is smaller than n_streams={n_s}",
                             module="beamforming")
    if n_rf > n_ant:
        raise DimensionError(f"n_rf={n_rf} exceeds {n_ant} antennas", module="beamforming")

    if n_rf == n_s:
        analog = np.column_stack([_best_grid_vector(x[:, j], quantizer)
                                  for j in range(n_s)])
        coeff = np.einsum("ij,ij->j", analog.conj(), x) / n_ant
        return _finalize(analog, np.diag(coeff), x, role, quantizer)

    n = np.arange(n_ant)[:, None]
    extra = np.exp(2j * np.pi * n * np.arange(1, n_rf - n_s + 1)[None, :] / n_ant)
    start = np.column_stack([np.exp(1j * np.angle(x)), extra])
    if quantizer.ideal:
        chain = [PhaseQuantizer(b) for b in range(1, MAX_CHAIN_BITS + 1)] + [quantizer]
    else:
        chain = [PhaseQuantizer(b) for b in range(1, quantizer.phase_bits + 1)]
    analog = _project_unit(start, chain[0])
    digital = None
    for q in chain:
        _, analog, digital = _als(x, analog, q, max_iter, tol)
    return _finalize(analog, digital, x, role, quantizer)


def dft_codebook(n_ant: int, oversampling: int = 1) -> Codebook:
    """Beams ``exp(j 2 pi n m / (n_ant * oversampling))`` for every m."""
    if n_ant < 1 or oversampling < 1:
        raise ValueError("n_ant and oversampling must be >= 1")
    m_total = n_ant * oversampling
    n = np.arange(n_ant)
    m = np.arange(m_total)
    beams = np.exp(2j * np.pi * np.outer(m, n) / m_total)
    return Codebook(beams, tuple(f"dft{k}" for k in m))


def _channel_matrix(h_si) -> np.ndarray:
    return np.asarray(getattr(h_si, "matrix", h_si), dtype=complex)


def codebook_isolation_map(tx_cb: Codebook, rx_cb: Codebook, h_si) -> np.ndarray:
    """Normalized coupling ``|w_i^H H f_j|^2 / (|w_i|^2 |f_j|^2)``.

    Rows index receive beams and columns transmit beams.
    """
    h = _channel_matrix(h_si)
    if h.shape != (rx_cb.n_ant, tx_cb.n_ant):
        raise DimensionError(
            f"channel {h.shape} does not match beams ({rx_cb.n_ant}, {tx_cb.n_ant})",
            module="beamforming")
    w, f = rx_cb.beams, tx_cb.beams
    coupled = np.abs(w.conj() @ h @ f.T) ** 2
    norms = np.outer(np.sum(np.abs(w) ** 2, 1), np.sum(np.abs(f) ** 2, 1))
    return coupled / norms


def worst_pair_coupling(tx_cb: Codebook, rx_cb: Codebook, h_si) -> float:
    return float(codebook_isolation_map(tx_cb, rx_cb, h_si).max())


def _gain(beam, ref) -> float:
    return abs(np.vdot(ref, beam)) ** 2 / (np.vdot(ref, ref).real * np.vdot(beam, beam).real)


def refine_codebook(cb: Codebook, h_si, gain_loss_budget_db: float,
                    reference_channel=None, rx_codebook: Codebook | None = None,
                    side: str = "tx", steps: int = 40) -> Codebook:
    """Bend each beam toward the SI null space within a gain-loss budget.

    Each beam is shrunk with ``(I + mu H^H H)^{-1}`` and projected back to
    phase-only entries. Bisection in ``log10(mu)`` finds the strongest
    shrinkage whose gain toward the beam's reference direction drops by at
    most `gain_loss_budget_db`. A refined beam is kept only if its worst
    coupling does not grow.

    Parameters
    ----------
    reference_channel : array_like, shape (n_beams, n_ant), optional
        Steering vector each beam must keep serving. Defaults to the
        original beams.
    rx_codebook : Codebook, optional
        Opposite-side codebook defining the worst-pair coupling; without
        it the total normalized leakage of each beam is used.
    side : {"tx", "rx"}
        Which end of the SI channel `cb` sits on.
    """
    if gain_loss_budget_db < 0:
        raise ValueError("gain_loss_budget_db must be >= 0")
    if gain_loss_budget_db == 0:
        return cb
    h = _channel_matrix(h_si)
    if side == "rx":
        h = h.conj().T
    elif side != "tx":
        raise ValueError(f"unknown side {side!r}")
    if h.shape[1] != cb.n_ant:
        raise DimensionError("codebook does not match the channel", module="beamforming")
    refs = cb.beams if reference_channel is None else np.atleast_2d(
        np.asarray(reference_channel, dtype=complex))
    if refs.shape != cb.beams.shape:
        raise DimensionError("reference_channel must have one row per beam",
                             module="beamforming")
    other = None
    if rx_codebook is not None:
        other = rx_codebook.beams
        if other.shape[1] != h.shape[0]:
            raise DimensionError("opposite codebook does not match the channel",
                                 module="beamforming")

    def coupling(beam):
        out = h @ beam
        if other is None:
            return np.vdot(out, out).real / np.vdot(beam, beam).real
        return float(np.max(np.abs(other.conj() @ out) ** 2
                            / (np.sum(np.abs(other) ** 2, 1) * np.vdot(beam, beam).real)))

    smax = np.linalg.norm(h, 2)
    if smax == 0:
        return cb
    lo0, hi0 = -4.0, 8.0  # log10 of mu * smax^2

    def candidate(t):
        beam = regularized_apply(h, cb.beams[k][:, None], 10.0 ** t / smax ** 2)[:, 0]
        return np.exp(1j * np.angle(beam))

    refined = []
    for k in range(len(cb)):
        base_gain = _gain(cb.beams[k], refs[k])
        if base_gain == 0:
            refined.append(cb.beams[k])
            continue

        def loss_db(beam):
            g = _gain(beam, refs[k])
            return np.inf if g == 0 else 10 * np.log10(base_gain / g)

        best = cb.beams[k]
        top = candidate(hi0)
        if loss_db(top) <= gain_loss_budget_db:
            best = top
        elif loss_db(candidate(lo0)) <= gain_loss_budget_db:
            lo, hi = lo0, hi0
            for _ in range(steps):
                mid = 0.5 * (lo + hi)
                if loss_db(candidate(mid)) <= gain_loss_budget_db:
                    lo = mid
                else:
                    hi = mid
            best = candidate(lo)
        if coupling(best) > coupling(cb.beams[k]):
            best = cb.beams[k]
        refined.append(best)
    out = Codebook(np.array(refined), cb.labels)
    if rx_codebook is not None and side == "tx":
        log.info("worst-pair coupling %.3e -> %.3e",
                 worst_pair_coupling(cb, rx_codebook, h_si),
                 worst_pair_coupling(out, rx_codebook, h_si))
    return out
