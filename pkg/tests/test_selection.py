import numpy as np
import pytest

from fdxsim.cancellation import AnalogSicConfig, DigitalSicConfig
from fdxsim.channel import UserChannel
from fdxsim.errors import DimensionError, SelectionError
from fdxsim.link import LinkBudget
from fdxsim.selection import CandidateSet, orthogonality_score, select_rx_user

from helpers import crandn


def _rank_one(direction, n_user=2, seed=0):
    rng = np.random.default_rng(seed)
    return np.outer(direction, crandn(rng, n_user))


def _reference_rate(ul, leakage, budget, sigma, digital_db, seed):
    """Zero-forcing combiner, one SIC draw, uplink rate, all written out."""
    u, _, _ = np.linalg.svd(ul)
    w = u[:, :1]
    q, _ = np.linalg.qr(leakage)
    w = w - q @ (q.conj().T @ w)
    w /= np.linalg.norm(w)
    h_eff = w.conj().T @ leakage
    rng = np.random.default_rng(seed)
    scale = sigma * np.linalg.norm(h_eff) / np.sqrt(h_eff.size)
    res = -scale * (rng.standard_normal(h_eff.shape) + 1j * rng.standard_normal(h_eff.shape)) / np.sqrt(2)
    res = res * 10 ** (-digital_db / 20)
    g = w.conj().T @ ul
    snr = 10 ** (budget.rx_snr_db / 10)
    inr = 10 ** ((budget.tx_power_dbm - budget.noise_floor_dbm) / 10)
    interference = inr / leakage.shape[1] * np.linalg.norm(res) ** 2
    return np.log2(1 + snr * np.linalg.norm(g) ** 2 / (1 + interference))


class TestCandidateSet:
    def test_empty(self):
        with pytest.raises(SelectionError):
            CandidateSet([])

    def test_policy(self):
        with pytest.raises(SelectionError):
            CandidateSet([UserChannel(np.ones((2, 1)))], "fairness")


class TestOrthogonality:
    def test_geometric_case(self):
        e1, e2 = np.eye(2)
        users = [UserChannel(_rank_one(d, seed=i), uid)
                 for i, (d, uid) in enumerate([(e1, "A"), (e2, "B"), ((e1 + e2) / np.sqrt(2), "C")])]
        chosen, scores = select_rx_user(CandidateSet(users, "max_orthogonality"), e1[:, None])
        assert chosen == "B"
        np.testing.assert_allclose(scores, [1.0, 0.0, 0.5], atol=1e-12)

    def test_scale_invariant(self):
        rng = np.random.default_rng(1)
        leak = crandn(rng, 6, 1)
        mats = [crandn(rng, 6, 2) for _ in range(4)]
        a = select_rx_user(CandidateSet([UserChannel(m, str(i)) for i, m in enumerate(mats)],
                                        "max_orthogonality"), leak)
        b = select_rx_user(CandidateSet([UserChannel(7.5 * m, str(i)) for i, m in enumerate(mats)],
                                        "max_orthogonality"), leak)
        assert a[0] == b[0]

    def test_zero_leakage(self):
        assert orthogonality_score(np.ones(2), np.zeros(2)) == 0.0


class TestMaxRate:
    def test_single_candidate(self):
        u = UserChannel(np.ones((4, 1)), "only")
        chosen, scores = select_rx_user(CandidateSet([u]), np.ones((4, 1)),
                                        combiner_rule="regularized", mu=1.0)
        assert chosen == "only" and len(scores) == 1

    def test_tie_goes_to_first(self):
        m = np.eye(4)[:, :2]
        users = [UserChannel(m, "x"), UserChannel(m, "y")]
        chosen, scores = select_rx_user(CandidateSet(users), np.eye(4)[:, 3:])
        assert scores[0] == scores[1] and chosen == "x"

    def test_duplicate_winner(self):
        rng = np.random.default_rng(4)
        leak = crandn(rng, 6, 1)
        users = [UserChannel(crandn(rng, 6, 2), str(i)) for i in range(3)]
        win, scores = select_rx_user(CandidateSet(users), leak)
        dup = users + [UserChannel(users[[u.user_id for u in users].index(win)].matrix, "dup")]
        win2, scores2 = select_rx_user(CandidateSet(dup), leak)
        assert win2 == win and max(scores2) == max(scores)

    def test_dimension(self):
        with pytest.raises(DimensionError):
            select_rx_user(CandidateSet([UserChannel(np.ones((3, 1)))]), np.ones((4, 1)))

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_reference(self, seed):
        rng = np.random.default_rng(seed)
        leak = 1e-2 * crandn(rng, 8, 1)
        users = [UserChannel(crandn(rng, 8, 2), f"u{i}") for i in range(5)]
        budget = LinkBudget()
        chosen, scores = select_rx_user(CandidateSet(users), leak, "zero_forcing", 0.0,
                                        AnalogSicConfig(0.1), DigitalSicConfig(20.0), budget, 9)
        ref = [_reference_rate(u.matrix, leak, budget, 0.1, 20.0, 9) for u in users]
        np.testing.assert_allclose(scores, ref, rtol=1e-9, atol=1e-12)
        assert chosen == users[int(np.argmax(ref))].user_id
