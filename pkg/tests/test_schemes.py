import numpy as np
import pytest

from decifuse.channel import NetworkConfig, demod_error_prob
from decifuse.schemes import (
    SchemeKind,
    observed_states,
    run_trial,
    simulate_batch,
    state_alphabet,
    state_amplitudes,
)
from decifuse.sensing import Hypothesis, SensingModel

SCHEMES = list(SchemeKind)


def noiseless_network(K, alpha=0.5):
    base = NetworkConfig.homogeneous(K, 10.0, alpha=alpha)
    return NetworkConfig(P=base.P, G=base.G, epsilon=base.epsilon, d=base.d, d0=base.d0,
                         sigma_v2=base.sigma_v2 * 1e-14, sigma_eta2=base.sigma_eta2 * 1e-14, alpha=alpha)


class TestParse:
    @pytest.mark.parametrize("text, kind", [("STC", SchemeKind.STC), ("fusion-at-sensors", SchemeKind.FUSION),
                                            ("threshold_changing", SchemeKind.THRESHOLD),
                                            ("parallel", SchemeKind.PARALLEL)])
    def test_aliases(self, text, kind):
        assert SchemeKind.parse(text) is kind

    def test_unknown(self):
        with pytest.raises(ValueError):
            SchemeKind.parse("mesh")


class TestAlphabets:
    @pytest.mark.parametrize("scheme, size", [("parallel", 4), ("fusion", 4), ("stc", 16), ("threshold", 16)])
    def test_sizes(self, scheme, size):
        assert len(state_alphabet(SchemeKind(scheme))) == size

    def test_stc_reduces_to_alamouti(self):
        amps = state_amplitudes(SchemeKind.STC, 0.5)
        states = state_alphabet(SchemeKind.STC)
        agree = np.all(states[:, :2] == states[:, 2:], axis=1)
        for B in amps[agree]:
            # orthogonal design: B^T B is a multiple of the identity
            gram = B.T @ B
            assert gram[0, 1] == pytest.approx(0.0)
            assert gram[0, 0] == pytest.approx(gram[1, 1])
            assert gram[0, 0] == pytest.approx(0.5)

    def test_fusion_scaling(self):
        amps = state_amplitudes(SchemeKind.FUSION, 0.64)
        assert np.allclose(np.abs(amps[:, [0, 1], [0, 1]]), 0.8)


class TestNoiselessLimit:
    @pytest.mark.parametrize("scheme", SCHEMES)
    def test_all_positive_under_h1(self, scheme):
        K = 4
        sensing = SensingModel.homogeneous(K, 300.0, 0.5)
        net = noiseless_network(K)
        rec = simulate_batch(scheme, sensing, net, np.ones(50, dtype=int), np.random.default_rng(0))
        assert np.all(rec.u == 1)
        # the threshold scheme's outer cuts diverge as the noise vanishes, so u_bar is skipped
        for extra in (rec.u_hat, rec.u_tilde):
            if extra is not None:
                assert np.all(extra == 1)
        if scheme.alamouti:
            amps = state_amplitudes(scheme, net.alpha)[observed_states(rec)]
            h_i, h_j = rec.h[:, 0::2], rec.h[:, 1::2]
            mean_n = amps[..., 0, 0] * h_i + amps[..., 0, 1] * h_j
            assert np.allclose(rec.y_slots[..., 0], mean_n, atol=1e-9 * np.abs(h_i).max())
        else:
            scale = np.sqrt(net.alpha) if scheme is SchemeKind.FUSION else 1.0
            assert np.allclose(rec.y, scale * rec.h, atol=1e-9 * np.abs(rec.h).max())


class TestExchange:
    def test_flip_rate(self):
        K = 4
        sensing = SensingModel.homogeneous(K, 6.0, 0.6)
        net = NetworkConfig.homogeneous(K, 0.0, alpha=0.9)
        n = 100_000
        rec = simulate_batch(SchemeKind.STC, sensing, net, np.zeros(n, dtype=int), np.random.default_rng(1))
        rate = np.mean(rec.u_hat != rec.u)
        p = demod_error_prob(net.gamma_hs[0])
        assert abs(rate - p) < 4 * np.sqrt(p * (1 - p) / rec.u.size)

    def test_frozen_channels(self):
        K = 2
        sensing = SensingModel.homogeneous(K, 6.0, 0.6)
        net = NetworkConfig.homogeneous(K, 5.0)
        h = np.array([1e-3 + 0j, 2e-3j])
        g = np.array([1e-3 + 1e-3j, -2e-3 + 0j])
        rec = simulate_batch(SchemeKind.FUSION, sensing, net, np.ones(5, dtype=int), np.random.default_rng(2), h=h, g=g)
        assert np.all(rec.h == h) and np.all(rec.g == g)


class TestRecords:
    @pytest.mark.parametrize("scheme", SCHEMES)
    def test_run_trial(self, scheme):
        sensing = SensingModel.homogeneous(4, 6.0, 0.6)
        net = NetworkConfig.homogeneous(4, 10.0)
        rec = run_trial(scheme, sensing, net, Hypothesis.H1, np.random.default_rng(3))
        assert rec.hypothesis is Hypothesis.H1
        assert rec.decisions.u.shape == (4,)
        assert rec.channels.h.shape == (4,)
        if scheme.alamouti:
            assert rec.fc_signals.z.shape == (2, 2)
        else:
            assert rec.fc_signals.y.shape == (4,)

    @pytest.mark.parametrize("scheme", SCHEMES)
    def test_observed_states_match_alphabet(self, scheme):
        sensing = SensingModel.homogeneous(4, 2.0, 0.6)
        net = NetworkConfig.homogeneous(4, 0.0, alpha=0.7)
        rec = simulate_batch(scheme, sensing, net, np.zeros(200, dtype=int), np.random.default_rng(4))
        idx = observed_states(rec)
        states = state_alphabet(scheme)[idx]  # (n, S, width)
        if scheme is SchemeKind.PARALLEL:
            expected = np.stack([rec.u[:, 0::2], rec.u[:, 1::2]], axis=-1)
        elif scheme is SchemeKind.FUSION:
            expected = np.stack([rec.u_tilde[:, 0::2], rec.u_tilde[:, 1::2]], axis=-1)
        elif scheme is SchemeKind.STC:
            expected = np.stack([rec.u[:, 0::2], rec.u[:, 1::2], rec.u_hat[:, 0::2], rec.u_hat[:, 1::2]], axis=-1)
        else:
            expected = np.stack([rec.u[:, 0::2], rec.u_bar[:, 0::2], rec.u[:, 1::2], rec.u_bar[:, 1::2]], axis=-1)
        assert np.array_equal(states, expected)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            simulate_batch("parallel", SensingModel.homogeneous(4, 6.0, 0.6), NetworkConfig.homogeneous(2, 5.0),
                           [0], np.random.default_rng(0))
