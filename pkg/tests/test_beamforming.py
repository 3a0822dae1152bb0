import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdxsim.beamforming import (Codebook, HybridBeamformer, PhaseQuantizer,
                                codebook_isolation_map, design_half_duplex, dft_codebook,
                                refine_codebook, to_hybrid, worst_pair_coupling)
from fdxsim.errors import DimensionError


def _crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


class TestPhaseQuantizer:
    def test_grid(self):
        np.testing.assert_allclose(PhaseQuantizer(2).grid(), [0, np.pi / 2, np.pi, 1.5 * np.pi])

    def test_nearest(self):
        assert PhaseQuantizer(2).quantize(0.3 * np.pi) == pytest.approx(np.pi / 2)
        assert PhaseQuantizer(2).quantize(-0.1) == pytest.approx(0.0)

    def test_tie_goes_to_smaller_phase(self):
        assert PhaseQuantizer(2).quantize(np.pi / 4) == pytest.approx(0.0)
        assert PhaseQuantizer(1).quantize(np.pi / 2) == pytest.approx(0.0)

    def test_ideal_and_strings(self):
        q = PhaseQuantizer("ideal", "none")
        assert q.ideal and q.amplitude_bits is None
        assert q.quantize(1.25) == pytest.approx(1.25)

    def test_invalid(self):
        with pytest.raises(ValueError):
            PhaseQuantizer(0)


class TestDesignHalfDuplex:
    def test_diagonal(self):
        h = np.diag([2.0, 1.0])
        np.testing.assert_allclose(design_half_duplex(h, 1)[:, 0], [1, 0])
        np.testing.assert_allclose(design_half_duplex(h, 2), np.eye(2), atol=1e-12)

    def test_rank_one(self):
        f = design_half_duplex(np.ones((2, 2)), 1)
        np.testing.assert_allclose(f[:, 0], [1 / np.sqrt(2)] * 2, atol=1e-12)

    def test_canonical_phase(self):
        f = design_half_duplex(np.diag([1j * 3, 1.0]), 1, "combiner")
        np.testing.assert_allclose(f[:, 0], [1, 0], atol=1e-12)

    def test_too_many_streams(self):
        with pytest.raises(DimensionError):
            design_half_duplex(np.ones((2, 3)), 3)

    @given(st.integers(0, 10_000), st.integers(1, 3))
    @settings(max_examples=30, deadline=None)
    def test_orthonormal(self, seed, ns):
        rng = np.random.default_rng(seed)
        for role in ("precoder", "combiner"):
            f = design_half_duplex(_crandn(rng, 5, 6), ns, role)
            assert np.max(np.abs(f.conj().T @ f - np.eye(ns))) < 1e-9


class TestToHybrid:
    def test_exact_when_on_grid(self):
        q = PhaseQuantizer(2)
        x = np.exp(1j * np.pi / 2 * np.array([[0], [1], [3], [2]]))
        bf = to_hybrid(x, 1, q, role="combiner")
        assert bf.reconstruction_error == pytest.approx(0.0, abs=1e-12)
        # a precoder is scaled to unit power, so compare against the scaled design
        bf = to_hybrid(x / 2, 1, q, role="precoder")
        assert bf.reconstruction_error == pytest.approx(0.0, abs=1e-12)

    def test_ideal_single_stream_oracle(self):
        rng = np.random.default_rng(5)
        x = _crandn(rng, 6, 1)
        x /= np.linalg.norm(x)
        bf = to_hybrid(x, 1, PhaseQuantizer(), role="combiner")
        a = np.exp(1j * np.angle(x))
        np.testing.assert_allclose(bf.analog, a, atol=1e-12)
        # least-squares scale onto a: (a^H x)/N
        d = np.vdot(a, x) / 6
        assert bf.reconstruction_error == pytest.approx(np.linalg.norm(a * d - x), abs=1e-12)

    def test_too_few_rf_chains(self):
        with pytest.raises(DimensionError):
            to_hybrid(np.ones((4, 2)), 1)

    def test_amplitude_control_unsupported(self):
        with pytest.raises(ValueError):
            to_hybrid(np.ones((4, 1)), 1, PhaseQuantizer(2, 3))

    @pytest.mark.parametrize("n_rf", [1, 2, 3])
    @pytest.mark.parametrize("bits", [1, 2, 3, None])
    def test_invariants(self, n_rf, bits):
        rng = np.random.default_rng(n_rf * 10 + (bits or 0))
        x = design_half_duplex(_crandn(rng, 4, 8), 1)
        q = PhaseQuantizer(bits)
        bf = to_hybrid(x, n_rf, q)
        assert isinstance(bf, HybridBeamformer)
        assert q.on_grid(bf.analog)
        assert np.linalg.norm(bf.matrix) ** 2 == pytest.approx(1.0, abs=1e-9)

    def test_error_non_increasing_in_bits(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            x = design_half_duplex(_crandn(rng, 3, 8), 2)
            for n_rf in (2, 3):
                errs = [to_hybrid(x, n_rf, PhaseQuantizer(b)).reconstruction_error
                        for b in (1, 2, 3, 4, None)]
                assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:])), errs


class TestCodebooks:
    def test_dft_zero_beam(self):
        np.testing.assert_allclose(dft_codebook(4).beams[0], np.ones(4))

    def test_dft_orthogonal(self):
        b = dft_codebook(4).beams
        np.testing.assert_allclose(b.conj() @ b.T, 4 * np.eye(4), atol=1e-12)

    def test_oversampled_adjacent(self):
        b = dft_codebook(2, 2).beams
        assert len(b) == 4
        assert abs(np.vdot(b[0], b[1])) / 2 == pytest.approx(np.sqrt(2) / 2)

    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            Codebook(np.array([[1.0, 0.5]]))

    def test_isolation_identity(self):
        cb = dft_codebook(4)
        np.testing.assert_allclose(codebook_isolation_map(cb, cb, np.eye(4)), np.eye(4),
                                   atol=1e-12)

    def test_isolation_scaling_and_phase(self):
        rng = np.random.default_rng(2)
        h = _crandn(rng, 4, 6)
        tx, rx = dft_codebook(6), dft_codebook(4)
        base = codebook_isolation_map(tx, rx, h)
        np.testing.assert_allclose(codebook_isolation_map(tx, rx, 10 * h), 100 * base)
        rot = Codebook(tx.beams * np.exp(1j * 0.7))
        np.testing.assert_allclose(codebook_isolation_map(rot, rx, h), base, atol=1e-12)

    def test_isolation_single_beams(self):
        h = np.array([[1.0, 2.0]])
        m = codebook_isolation_map(Codebook([[1, 1]]), Codebook([[1]]), h)
        assert m.shape == (1, 1)
        assert m[0, 0] == pytest.approx(9 / 2)

    def test_isolation_dimension(self):
        with pytest.raises(DimensionError):
            codebook_isolation_map(dft_codebook(3), dft_codebook(4), np.eye(4))


class TestRefineCodebook:
    def test_zero_budget(self):
        cb = dft_codebook(4)
        assert refine_codebook(cb, np.eye(4), 0.0) is cb

    def test_identity_channel_unchanged(self):
        cb = dft_codebook(4)
        out = refine_codebook(cb, np.eye(4), 3.0, rx_codebook=cb)
        np.testing.assert_allclose(out.beams, cb.beams, atol=1e-12)
        assert worst_pair_coupling(out, cb, np.eye(4)) == pytest.approx(
            worst_pair_coupling(cb, cb, np.eye(4)))

    def test_rank_one_not_worse(self):
        rng = np.random.default_rng(8)
        h = np.outer(_crandn(rng, 8), _crandn(rng, 8))
        tx, rx = dft_codebook(8, 2), dft_codebook(8)
        out = refine_codebook(tx, h, 3.0, rx_codebook=rx)
        assert worst_pair_coupling(out, rx, h) <= worst_pair_coupling(tx, rx, h) + 1e-15
        assert np.allclose(np.abs(out.beams), 1.0)

    def test_gain_budget_respected(self):
        rng = np.random.default_rng(9)
        h = np.outer(_crandn(rng, 8), _crandn(rng, 8))
        tx = dft_codebook(8)
        out = refine_codebook(tx, h, 1.0)
        for a, b in zip(tx.beams, out.beams):
            loss = 10 * np.log10(abs(np.vdot(a, a)) ** 2 / abs(np.vdot(a, b)) ** 2)
            assert loss <= 1.0 + 1e-9
