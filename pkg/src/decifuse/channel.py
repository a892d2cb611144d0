"""Rayleigh-fading links: sensor to fusion center, sensor to partner, Alamouti pairs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_mw(dbm):
    return float(db_to_linear(dbm))


# reference settings: 10 m to the FC, 2 m between partners, -50 dBm noise,
# pathloss exponent 2, antenna gain -30 dB
DEFAULT_DISTANCE = 10.0
DEFAULT_PARTNER_DISTANCE = 2.0
DEFAULT_NOISE_DBM = -50.0
DEFAULT_PATHLOSS = 2.0
DEFAULT_GAIN_DB = -30.0


@dataclass(frozen=True)
class NetworkConfig:
    """Geometry, powers and noise levels. Powers are in mW, distances in m."""

    P: float
    G: float
    epsilon: float
    d: tuple
    d0: tuple
    sigma_v2: float
    sigma_eta2: float
    alpha: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "d", tuple(float(v) for v in np.atleast_1d(self.d)))
        object.__setattr__(self, "d0", tuple(float(v) for v in np.atleast_1d(self.d0)))
        for name in ("P", "G", "epsilon", "sigma_v2", "sigma_eta2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if min(self.d) <= 0 or min(self.d0) <= 0:
            raise ValueError("distances must be positive")
        if 2 * len(self.d0) != len(self.d):
            raise ValueError("need one partner distance per pair of sensors")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"power fraction alpha must lie in (0, 1), got {self.alpha}")

    @classmethod
    def homogeneous(
        cls,
        K: int,
        snr_h_db: Optional[float] = None,
        *,
        P: float = 1.0,
        alpha: float = 0.5,
        d: float = DEFAULT_DISTANCE,
        d0: float = DEFAULT_PARTNER_DISTANCE,
        epsilon: float = DEFAULT_PATHLOSS,
        gain_db: float = DEFAULT_GAIN_DB,
        noise_dbm: float = DEFAULT_NOISE_DBM,
    ) -> "NetworkConfig":
        """Equal distances for every sensor; ``snr_h_db`` overrides ``P``."""
        G = float(db_to_linear(gain_db))
        noise = dbm_to_mw(noise_dbm)
        if snr_h_db is not None:
            P = float(db_to_linear(snr_h_db)) * noise * d**epsilon / G
        return cls(P=P, G=G, epsilon=epsilon, d=(d,) * K, d0=(d0,) * (K // 2),
                   sigma_v2=noise, sigma_eta2=noise, alpha=alpha)

    def with_alpha(self, alpha: float) -> "NetworkConfig":
        from dataclasses import replace

        return replace(self, alpha=alpha)

    @property
    def K(self) -> int:
        return len(self.d)

    @property
    def sigma_h2(self) -> np.ndarray:
        return self.P * self.G / np.asarray(self.d) ** self.epsilon

    @property
    def sigma_hs2(self) -> np.ndarray:
        return self.P * self.G / np.asarray(self.d0) ** self.epsilon

    @property
    def gamma_h(self) -> np.ndarray:
        return self.sigma_h2 / self.sigma_v2

    @property
    def gamma_hs(self) -> np.ndarray:
        return (1.0 - self.alpha) * self.sigma_hs2 / self.sigma_eta2


@dataclass
class ChannelRealization:
    """``h``: sensor to FC, shape ``(K,)``. ``g``: inter-node links ``(g_ij, g_ji)`` per pair, shape ``(2S,)``."""

    h: np.ndarray
    g: Optional[np.ndarray] = None


@dataclass
class FcSignals:
    """What the fusion center receives.

    ``y`` for the orthogonal-channel schemes; ``y_slots`` (shape ``(S, 2)``),
    ``z`` (shape ``(S, 2)``) and ``sigma2_eff`` (shape ``(S,)``) for the
    Alamouti schemes.
    """

    y: Optional[np.ndarray] = None
    y_slots: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    sigma2_eff: Optional[np.ndarray] = None


def snr_h(config: NetworkConfig, k: int = 0) -> float:
    """Average sensor-to-FC SNR of sensor ``k`` in dB."""
    return float(10.0 * np.log10(config.gamma_h[k]))


def internode_snr(config: NetworkConfig, s: int = 0) -> float:
    """Average SNR of the partner link in pair ``s`` (linear)."""
    return float(config.gamma_hs[s])


def draw_complex_gaussian(variance, rng: np.random.Generator, size=None):
    """Circularly symmetric complex Gaussian with the given total variance."""
    variance = np.asarray(variance, dtype=float)
    if np.any(variance <= 0):
        raise ValueError("variance must be positive")
    if size is None:
        size = variance.shape
    scale = np.sqrt(variance / 2.0)
    out = scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
    return complex(out) if np.ndim(out) == 0 else out


def internode_receive(u_i, alpha: float, g_ij, rng: np.random.Generator, sigma_eta2: float = 1.0):
    """Signal heard by the partner when sensor ``i`` sends its decision."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"power fraction alpha must lie in (0, 1), got {alpha}")
    g_ij = np.asarray(g_ij, dtype=complex)
    noise = draw_complex_gaussian(sigma_eta2, rng, size=np.shape(g_ij))
    return np.sqrt(1.0 - alpha) * np.asarray(u_i) * g_ij + noise


def internode_demod(r_ij, g_ij):
    """Coherent BPSK demodulation; a zero real part falls to -1."""
    g_ij = np.asarray(g_ij, dtype=complex)
    if np.any(g_ij == 0):
        raise ValueError("cannot demodulate over a zero channel")
    # sign(Re(r/g)) without the division
    out = np.where(np.real(np.asarray(r_ij) * np.conj(g_ij)) > 0, 1, -1)
    return int(out) if out.ndim == 0 else out


def demod_error_prob(gamma_hs):
    """Average BPSK error probability over Rayleigh fading at mean SNR ``gamma_hs``."""
    gamma_hs = np.asarray(gamma_hs, dtype=float)
    if np.any(gamma_hs < 0):
        raise ValueError("SNR must be non-negative")
    p = 0.5 * (1.0 - np.sqrt(gamma_hs / (1.0 + gamma_hs)))
    return float(p) if p.ndim == 0 else p


def parallel_receive(symbol, h_k, rng: np.random.Generator, sigma_v2: float = 1.0):
    h_k = np.asarray(h_k, dtype=complex)
    return np.asarray(symbol) * h_k + draw_complex_gaussian(sigma_v2, rng, size=h_k.shape)


def alamouti_receive(s1_a, s2_a, s1_b, s2_b, h_i, h_j, rng: np.random.Generator, sigma_v2: float = 1.0):
    """Two-slot reception of a pair; amplitudes are ``(sensor i, sensor j)`` per slot."""
    h_i = np.asarray(h_i, dtype=complex)
    h_j = np.asarray(h_j, dtype=complex)
    y_n = s1_a * h_i + s2_a * h_j + draw_complex_gaussian(sigma_v2, rng, size=h_i.shape)
    y_n1 = s1_b * h_i + s2_b * h_j + draw_complex_gaussian(sigma_v2, rng, size=h_i.shape)
    return y_n, y_n1


def alamouti_combine(y_n, y_n1, h_i, h_j, sigma_v2: float = 1.0):
    """Linear Alamouti combining; returns ``(z_i, z_j, sigma2_eff)``."""
    h_i = np.asarray(h_i, dtype=complex)
    h_j = np.asarray(h_j, dtype=complex)
    z_i = np.conj(h_i) * y_n + h_j * np.conj(y_n1)
    z_j = np.conj(h_j) * y_n - h_i * np.conj(y_n1)
    sigma2 = (np.abs(h_i) ** 2 + np.abs(h_j) ** 2) * sigma_v2
    return z_i, z_j, sigma2


def stc_amplitudes(u_i, u_j, uhat_i, uhat_j, alpha: float):
    """Slot amplitudes ``(a_i, a_j, b_i, b_j)`` of the cooperative STC scheme.

    ``uhat_i`` is sensor ``i``'s decision as demodulated by ``j``.
    """
    c = np.sqrt(alpha / 2.0)
    return c * u_i, c * u_j, -c * uhat_j, c * uhat_i


def threshold_amplitudes(u_i, ubar_i, u_j, ubar_j):
    """Slot amplitudes ``(a_i, a_j, b_i, b_j)`` of the threshold-changing scheme."""
    c = np.sqrt(0.5)
    return c * u_i, c * ubar_j, -c * ubar_i, c * u_j


def combined_means(a_i, a_j, b_i, b_j, h_i, h_j):
    """Noise-free ``(z_i, z_j)`` for real slot amplitudes."""
    cross = np.conj(h_i) * h_j
    pi = np.abs(h_i) ** 2
    pj = np.abs(h_j) ** 2
    mu_i = a_i * pi + (a_j + b_i) * cross + b_j * pj
    mu_j = (a_i - b_j) * np.conj(cross) + a_j * pj - b_i * pi
    return mu_i, mu_j
