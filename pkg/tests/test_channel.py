import mpmath as mp
import numpy as np
import pytest

from decifuse.channel import (
    NetworkConfig,
    alamouti_combine,
    alamouti_receive,
    combined_means,
    demod_error_prob,
    draw_complex_gaussian,
    internode_demod,
    internode_receive,
    parallel_receive,
    snr_h,
    stc_amplitudes,
    threshold_amplitudes,
)


def config(P=1.0, d=10.0, d0=2.0, alpha=0.5, K=2):
    return NetworkConfig.homogeneous(K, P=P, d=d, d0=d0, alpha=alpha)


class TestLinkBudget:
    def test_unit_ratio_is_zero_db(self):
        net = NetworkConfig(P=1.0, G=1.0, epsilon=2.0, d=(1.0, 1.0), d0=(1.0,), sigma_v2=1.0, sigma_eta2=1.0)
        assert snr_h(net) == pytest.approx(0.0, abs=1e-12)

    def test_default_geometry(self):
        # 1 mW * 1e-3 / (10^2 * 1e-8 mW) = 1, i.e. 0 dB; 10 mW gives 10 dB
        assert snr_h(config(P=1.0)) == pytest.approx(0.0, abs=1e-9)
        assert snr_h(config(P=10.0)) == pytest.approx(10.0, abs=1e-9)

    @pytest.mark.parametrize("power_mw, expected_db", [(3.2, 5.0), (10.0, 10.0), (32.0, 15.0)])
    def test_power_table(self, power_mw, expected_db):
        assert snr_h(config(P=power_mw)) == pytest.approx(expected_db, abs=0.06)

    def test_doubling_distance(self):
        drop = snr_h(config(d=10.0)) - snr_h(config(d=20.0))
        assert drop == pytest.approx(20 * np.log10(2), abs=1e-9)

    def test_snr_override(self):
        net = NetworkConfig.homogeneous(4, 7.5)
        assert snr_h(net, 3) == pytest.approx(7.5, abs=1e-9)

    def test_partner_link_snr(self):
        net = NetworkConfig.homogeneous(2, 0.0, alpha=0.5)
        assert net.gamma_h[0] == pytest.approx(1.0)
        assert net.gamma_hs[0] == pytest.approx(12.5)

    def test_partner_link_vanishes(self):
        net = NetworkConfig.homogeneous(2, 0.0, alpha=1 - 1e-9)
        assert net.gamma_hs[0] < 1e-6

    def test_equal_distances(self):
        net = NetworkConfig.homogeneous(2, 3.0, d0=10.0, alpha=1e-12)
        assert net.gamma_hs[0] == pytest.approx(net.gamma_h[0], rel=1e-9)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5])
    def test_rejects_alpha(self, alpha):
        with pytest.raises(ValueError):
            config(alpha=alpha)


class TestGaussian:
    def test_moments(self):
        z = draw_complex_gaussian(1.0, np.random.default_rng(0), size=1_000_000)
        assert np.mean(np.abs(z) ** 2) == pytest.approx(1.0, abs=0.01)
        se = np.sqrt(0.5 / z.size)
        assert abs(z.real.mean()) < 4 * se and abs(z.imag.mean()) < 4 * se
        assert abs(np.mean(z.real * z.imag)) < 4 * 0.5 / np.sqrt(z.size)

    def test_rejects_zero_variance(self):
        with pytest.raises(ValueError):
            draw_complex_gaussian(0.0, np.random.default_rng(0))


class TestInternode:
    def test_receive_moments(self):
        rng = np.random.default_rng(1)
        g = np.full(400_000, 0.7 - 0.2j)
        r = internode_receive(-1, 0.36, g, rng, sigma_eta2=2.0)
        expected = -0.8 * (0.7 - 0.2j)
        se = np.sqrt(1.0 / g.size)
        assert abs(r.mean().real - expected.real) < 4 * se
        assert abs(r.mean().imag - expected.imag) < 4 * se
        assert np.var(r) == pytest.approx(2.0, rel=0.01)

    def test_noiseless_demod(self):
        g = 0.3 + 0.9j
        assert internode_demod(np.sqrt(0.5) * g, g) == 1
        assert internode_demod(-g, g) == -1

    def test_zero_channel(self):
        with pytest.raises(ValueError):
            internode_demod(1.0, 0.0)

    def test_error_probability_values(self):
        assert demod_error_prob(0.0) == 0.5
        assert demod_error_prob(1e12) < 1e-12
        mp.mp.dps = 30
        assert demod_error_prob(1.0) == pytest.approx(float((1 - mp.sqrt(mp.mpf(1) / 2)) / 2), rel=1e-14)
        assert demod_error_prob(1.0) == pytest.approx(0.146447, abs=1e-6)

    def test_error_rate_monte_carlo(self):
        rng = np.random.default_rng(2)
        n = 400_000
        alpha = 0.5
        g = draw_complex_gaussian(1.0, rng, size=n)
        # mean SNR (1 - alpha) * 1 / sigma_eta2 = 1
        r = internode_receive(np.ones(n), alpha, g, rng, sigma_eta2=0.5)
        rate = np.mean(internode_demod(r, g) == -1)
        p = demod_error_prob(1.0)
        assert abs(rate - p) < 3 * np.sqrt(p * (1 - p) / n)


class TestFcLinks:
    def test_parallel_noiseless_mean(self):
        rng = np.random.default_rng(3)
        h = np.full(200_000, 0.4 + 0.3j)
        y = parallel_receive(1, h, rng, sigma_v2=0.5)
        assert abs(y.mean() - (0.4 + 0.3j)) < 4 * np.sqrt(0.5 / h.size)
        assert np.var(y) == pytest.approx(0.5, rel=0.01)

    def test_stc_slots_noiseless(self):
        alpha = 0.5
        a_i, a_j, b_i, b_j = stc_amplitudes(1, 1, 1, 1, alpha)
        y_n = a_i * 1 + a_j * 1
        y_n1 = b_i * 1 + b_j * 1
        assert y_n == pytest.approx(2 * np.sqrt(alpha / 2))
        assert y_n1 == pytest.approx(0.0)

    def test_slot_noise(self):
        rng = np.random.default_rng(4)
        h_i = np.full(200_000, 1.0 + 0j)
        h_j = np.full(200_000, 0.5j)
        y_n, y_n1 = alamouti_receive(0.5, 0.5, -0.5, 0.5, h_i, h_j, rng, sigma_v2=2.0)
        assert np.var(y_n) == pytest.approx(2.0, rel=0.01)
        assert abs(y_n1.mean() - (-0.5 + 0.25j)) < 4 * np.sqrt(2.0 / h_i.size)

    def test_combining_example(self):
        a = stc_amplitudes(1, -1, 1, -1, 0.5)
        y_n = a[0] + a[1]
        y_n1 = a[2] + a[3]
        z_i, z_j, _ = alamouti_combine(y_n, y_n1, 1.0, 1.0)
        assert z_i == pytest.approx(1.0) and z_j == pytest.approx(-1.0)

    def test_combined_noise_variance(self):
        rng = np.random.default_rng(5)
        n = 200_000
        h_i, h_j = 0.8 - 0.1j, 0.3 + 0.6j
        y_n, y_n1 = alamouti_receive(0.0, 0.0, 0.0, 0.0, np.full(n, h_i), np.full(n, h_j), rng, sigma_v2=1.5)
        z_i, _, sigma2 = alamouti_combine(y_n, y_n1, h_i, h_j, 1.5)
        assert np.var(z_i) == pytest.approx(float(sigma2), rel=0.01)

    def test_single_antenna_limit(self):
        y_n, y_n1 = 0.3 + 0.2j, -0.7 + 0.1j
        z_i, _, _ = alamouti_combine(y_n, y_n1, 0.5 - 0.5j, 0.0)
        assert z_i == pytest.approx(np.conj(0.5 - 0.5j) * y_n)

    @pytest.mark.parametrize("amps", [stc_amplitudes(1, -1, -1, 1, 0.7), threshold_amplitudes(1, -1, 1, 1)])
    def test_combined_means_match_combining(self, amps):
        h_i, h_j = 0.4 + 0.9j, -1.1 + 0.2j
        y_n = amps[0] * h_i + amps[1] * h_j
        y_n1 = amps[2] * h_i + amps[3] * h_j
        z_i, z_j, _ = alamouti_combine(y_n, y_n1, h_i, h_j)
        mu_i, mu_j = combined_means(*amps, h_i, h_j)
        assert mu_i == pytest.approx(z_i) and mu_j == pytest.approx(z_j)

    def test_threshold_amplitudes(self):
        c = np.sqrt(0.5)
        assert threshold_amplitudes(1, -1, 1, 1) == pytest.approx((c, c, c, c))
