"""Gaussian sensing model and the local decision rules run at the sensors."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import log_ndtr, logsumexp
from scipy.stats import norm


class Hypothesis(enum.IntEnum):
    """Binary hypothesis: H0 is signal absent, H1 is a unit signal present."""

    H0 = 0
    H1 = 1

    @property
    def mean(self) -> float:
        return float(self.value)


def sigma_from_snr_c(snr_c_db: float) -> float:
    """Sensing-noise standard deviation for a sensing SNR given in dB."""
    return float(10.0 ** (-np.asarray(snr_c_db, dtype=float) / 20.0))


def _check_prior(pi0: float) -> None:
    if not 0.0 < pi0 < 1.0:
        raise ValueError(f"prior pi0 must lie in (0, 1), got {pi0}")


def _check_sigma(sigma_w) -> None:
    if np.any(np.asarray(sigma_w, dtype=float) <= 0.0):
        raise ValueError("sensing-noise standard deviation must be positive")


@dataclass(frozen=True)
class SensingModel:
    """Priors, per-sensor noise levels and the common noise correlation.

    Sensors ``2s`` and ``2s + 1`` (zero-based) form pair ``s``.
    """

    pi0: float
    sigma_w: tuple
    rho: float = 0.0

    def __post_init__(self):
        sigma = tuple(float(s) for s in np.atleast_1d(self.sigma_w))
        object.__setattr__(self, "sigma_w", sigma)
        _check_prior(self.pi0)
        _check_sigma(sigma)
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"correlation rho must lie in [0, 1), got {self.rho}")
        if len(sigma) < 2 or len(sigma) % 2:
            raise ValueError(f"sensor count must be even and at least 2, got {len(sigma)}")

    @classmethod
    def homogeneous(cls, K: int, snr_c_db: float, pi0: float, rho: float = 0.0) -> "SensingModel":
        return cls(pi0=pi0, sigma_w=(sigma_from_snr_c(snr_c_db),) * K, rho=rho)

    @property
    def K(self) -> int:
        return len(self.sigma_w)

    @property
    def S(self) -> int:
        return self.K // 2

    @property
    def pi1(self) -> float:
        return 1.0 - self.pi0

    @property
    def log_prior_ratio(self) -> float:
        """ln(pi0 / pi1), the threshold every LRT compares against."""
        return float(np.log(self.pi0 / self.pi1))

    @property
    def sigma(self) -> np.ndarray:
        return np.asarray(self.sigma_w)

    @property
    def tau(self) -> np.ndarray:
        return local_threshold(self.sigma, self.pi0)

    @property
    def is_homogeneous(self) -> bool:
        return len(set(self.sigma_w)) == 1


@dataclass
class ObservationVector:
    x: np.ndarray
    hypothesis: Hypothesis


@dataclass
class LocalDecisions:
    """Local decisions ``u`` plus whichever scheme-specific extras apply."""

    u: np.ndarray
    u_hat: Optional[np.ndarray] = None
    u_tilde: Optional[np.ndarray] = None
    u_bar: Optional[np.ndarray] = None


def local_threshold(sigma_w, pi0: float):
    """Bayesian threshold on a single Gaussian measurement."""
    _check_prior(pi0)
    _check_sigma(sigma_w)
    sigma_w = np.asarray(sigma_w, dtype=float)
    tau = 0.5 + sigma_w**2 * np.log(pi0 / (1.0 - pi0))
    return float(tau) if tau.ndim == 0 else tau


def detection_probs(sigma_w, tau):
    """Return ``(Pd, Pf)`` for threshold ``tau`` and noise level ``sigma_w``."""
    _check_sigma(sigma_w)
    sigma_w = np.asarray(sigma_w, dtype=float)
    tau = np.asarray(tau, dtype=float)
    pd = norm.sf((tau - 1.0) / sigma_w)
    pf = norm.sf(tau / sigma_w)
    if pd.ndim == 0:
        return float(pd), float(pf)
    return pd, pf


def draw_observation_batch(model: SensingModel, hypotheses, rng: np.random.Generator) -> np.ndarray:
    """Measurements for a batch of trials, shape ``(n, K)``.

    Uses a one-factor representation so every noise pair has correlation rho.
    """
    means = np.asarray(hypotheses, dtype=float)[:, None]
    n = means.shape[0]
    common = rng.standard_normal((n, 1))
    own = rng.standard_normal((n, model.K))
    noise = np.sqrt(model.rho) * common + np.sqrt(1.0 - model.rho) * own
    return means + model.sigma * noise


def draw_observations(model: SensingModel, hypothesis: Hypothesis, rng: np.random.Generator) -> ObservationVector:
    hypothesis = Hypothesis(hypothesis)
    x = draw_observation_batch(model, [hypothesis], rng)[0]
    return ObservationVector(x=x, hypothesis=hypothesis)


def local_decide(x, tau):
    """+1 when the measurement exceeds the threshold, otherwise -1."""
    out = np.where(np.asarray(x) > tau, 1, -1)
    return int(out) if out.ndim == 0 else out


def log_partner_prob(u_partner, x_own, sigma_partner, sigma_own, tau_partner, rho, ell):
    """log P(partner decision | own measurement, H_ell) under the equicorrelated model."""
    scale = rho * sigma_partner / sigma_own
    mean = ell * (1.0 - scale) + scale * np.asarray(x_own, dtype=float)
    std = np.sqrt(1.0 - rho**2) * sigma_partner
    arg = (tau_partner - mean) / std
    # P(u=+1) = Q(arg) = Phi(-arg)
    return np.where(np.asarray(u_partner) > 0, log_ndtr(-arg), log_ndtr(arg))


def _log_gauss_ratio(x, sigma):
    """ln f(x|H1) - ln f(x|H0) for a real Gaussian measurement."""
    return (np.asarray(x, dtype=float) - 0.5) / sigma**2


def log_lambda_tilde_batch(x_own, r, g, sigma_own, sigma_partner, tau_partner, rho, alpha, sigma_eta2):
    """Vectorised log of the fusion-at-sensor statistic.

    ``x_own`` is the receiving sensor's measurement, ``r`` the signal heard from
    the partner over the link with coefficient ``g``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"power fraction alpha must lie in (0, 1), got {alpha}")
    if sigma_eta2 <= 0:
        raise ValueError("inter-node noise power must be positive")
    amp = np.sqrt(1.0 - alpha)
    r = np.asarray(r, dtype=complex)
    g = np.asarray(g, dtype=complex)
    # ln f(r|u) up to a common constant
    ll_r = np.stack(
        [-np.abs(r - u * amp * g) ** 2 / sigma_eta2 for u in (-1, 1)], axis=-1
    )
    terms = []
    for ell in (0, 1):
        lp = np.stack(
            [log_partner_prob(u, x_own, sigma_partner, sigma_own, tau_partner, rho, ell) for u in (-1, 1)],
            axis=-1,
        )
        terms.append(logsumexp(ll_r + lp, axis=-1))
    return terms[1] - terms[0] + _log_gauss_ratio(x_own, sigma_own)


def lambda_tilde(x_j, r_ij, g_ij, model: SensingModel, pair, alpha: float, sigma_eta2: float) -> float:
    """Fusion-at-sensor likelihood ratio formed at sensor ``j`` from ``(x_j, r_ij)``."""
    i, j = pair
    sig = model.sigma
    tau = model.tau
    value = log_lambda_tilde_batch(x_j, r_ij, g_ij, sig[j], sig[i], tau[i], model.rho, alpha, sigma_eta2)
    return float(np.exp(value))


def fused_decide(lambda_tilde_value, pi0: float):
    """+1 when the fused ratio beats pi0/pi1 (compared in log domain)."""
    _check_prior(pi0)
    with np.errstate(divide="ignore"):
        log_value = np.log(np.asarray(lambda_tilde_value, dtype=float))
    return local_decide(log_value, np.log(pi0 / (1.0 - pi0)))


def threshold_pair_uncorrelated(sigma_w: float, pi0: float, partner_pd: float, partner_pf: float):
    """Outer thresholds ``(tau1, tau2)`` of the four-region rule with independent noise."""
    _check_prior(pi0)
    _check_sigma(sigma_w)
    if not 0.0 <= partner_pf < partner_pd <= 1.0:
        raise ValueError("need partner Pf < Pd")
    ratio = pi0 / (1.0 - pi0)
    partner_pd, partner_pf = np.float64(partner_pd), np.float64(partner_pf)
    with np.errstate(divide="ignore"):
        tau1 = 0.5 + sigma_w**2 * np.log((1.0 - partner_pf) * ratio / (1.0 - partner_pd))
        tau2 = 0.5 + sigma_w**2 * np.log(partner_pf * ratio / partner_pd)
    return float(tau1), float(tau2)


def threshold_change_decide(x, tau, tau1, tau2):
    """Four-region rule returning ``(u, u_bar)``; boundaries fall to the lower region."""
    if not tau2 < tau < tau1:
        raise ValueError("thresholds must satisfy tau2 < tau < tau1")
    x = np.asarray(x, dtype=float)
    u = np.where(x > tau, 1, -1)
    u_bar = np.where(x > tau, np.where(x > tau1, 1, -1), np.where(x > tau2, 1, -1))
    if u.ndim == 0:
        return int(u), int(u_bar)
    return u, u_bar


def log_lambda_bar_batch(x_own, u_own, sigma_own, sigma_partner, tau_partner, rho):
    """log of the threshold-changing statistic, assuming the partner disagrees."""
    partner = -np.asarray(u_own)
    lp1 = log_partner_prob(partner, x_own, sigma_partner, sigma_own, tau_partner, rho, 1)
    lp0 = log_partner_prob(partner, x_own, sigma_partner, sigma_own, tau_partner, rho, 0)
    return lp1 - lp0 + _log_gauss_ratio(x_own, sigma_own)


def second_decisions(model: SensingModel, x: np.ndarray):
    """Per-sensor ``(u, u_bar)`` for the threshold-changing scheme, batch shape ``(n, K)``."""
    sig = model.sigma
    tau = model.tau
    partner = np.arange(model.K) ^ 1
    u = np.where(x > tau, 1, -1)
    if model.rho == 0.0:
        pd, pf = detection_probs(sig, tau)
        t1, t2 = np.empty(model.K), np.empty(model.K)
        for k in range(model.K):
            p = partner[k]
            t1[k], t2[k] = threshold_pair_uncorrelated(sig[k], model.pi0, pd[p], pf[p])
        u_bar = np.where(u > 0, np.where(x > t1, 1, -1), np.where(x > t2, 1, -1))
    else:
        stat = log_lambda_bar_batch(x, u, sig, sig[partner], tau[partner], model.rho)
        u_bar = np.where(stat > model.log_prior_ratio, 1, -1)
    return u, u_bar
