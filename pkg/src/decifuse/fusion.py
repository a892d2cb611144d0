"""Fusion-center rules: likelihood ratio tests backed by decision priors, and majority votes."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import integrate, optimize
from scipy.special import logsumexp, ndtr

from .channel import ChannelRealization, FcSignals, NetworkConfig, combined_means, demod_error_prob
from .schemes import (
    BatchRecord,
    SchemeKind,
    exchange,
    fusion_updates,
    state_alphabet,
    state_amplitudes,
)
from .sensing import (
    Hypothesis,
    SensingModel,
    detection_probs,
    log_lambda_bar_batch,
    threshold_pair_uncorrelated,
)

PRIOR_FORMAT_VERSION = 1
DEFAULT_NODES = 33
MIN_SAMPLES = 10_000
DEFAULT_SAMPLES = 1_000_000
DEFAULT_CORRELATED_SAMPLES = 100_000
_TINY = 1e-300


@dataclass(frozen=True)
class ClosedForm:
    pass


@dataclass(frozen=True)
class MonteCarlo:
    samples: int = DEFAULT_SAMPLES
    seed: int = 0

    def __post_init__(self):
        if self.samples < MIN_SAMPLES:
            raise ValueError(f"need at least {MIN_SAMPLES} samples, got {self.samples}")


@dataclass(frozen=True, eq=False)
class DecisionPrior:
    """Per-hypothesis probability tables over pair decision states.

    ``tables`` has shape ``(2, nodes, S, states)``: hypothesis, quadrature node
    of the shared noise factor, pair, state. States follow
    :func:`prior_alphabet`. For STC the probability that a partner
    demodulates a decision wrongly is kept per pair in ``internode_flip``.
    """

    scheme: SchemeKind
    nodes: np.ndarray
    weights: np.ndarray
    tables: np.ndarray
    internode_flip: Optional[np.ndarray] = None
    method: str = "closed"

    @property
    def S(self) -> int:
        return self.tables.shape[2]

    def likelihood_tables(self) -> np.ndarray:
        """Tables over the alphabet the FC likelihood sums over (STC expands to 16 states)."""
        if self.scheme is not SchemeKind.STC:
            return self.tables
        flip = np.asarray(self.internode_flip)[:, None]  # (S, 1)
        states = state_alphabet(SchemeKind.STC)
        agree_i = states[:, 0] == states[:, 2]
        agree_j = states[:, 1] == states[:, 3]
        factor = np.where(agree_i, 1 - flip, flip) * np.where(agree_j, 1 - flip, flip)  # (S, 16)
        base = 2 * (states[:, 0] > 0) + (states[:, 1] > 0)
        return self.tables[..., base] * factor

    def to_json(self) -> str:
        payload = {
            "format": "decifuse-prior",
            "version": PRIOR_FORMAT_VERSION,
            "scheme": self.scheme.value,
            "method": self.method,
            "nodes": self.nodes.tolist(),
            "weights": self.weights.tolist(),
            "shape": list(self.tables.shape),
            "tables": self.tables.ravel().tolist(),
            "internode_flip": None if self.internode_flip is None else np.asarray(self.internode_flip).tolist(),
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "DecisionPrior":
        payload = json.loads(text)
        if payload.get("format") != "decifuse-prior" or payload.get("version") != PRIOR_FORMAT_VERSION:
            raise ValueError("unsupported prior file format")
        flip = payload["internode_flip"]
        return cls(
            scheme=SchemeKind(payload["scheme"]),
            nodes=np.asarray(payload["nodes"]),
            weights=np.asarray(payload["weights"]),
            tables=np.asarray(payload["tables"]).reshape(payload["shape"]),
            internode_flip=None if flip is None else np.asarray(flip),
            method=payload["method"],
        )


@dataclass
class FcDecision:
    decided: Hypothesis
    log_lrt: Optional[float] = None
    vote_sum: Optional[int] = None


def prior_alphabet(scheme: SchemeKind) -> np.ndarray:
    """States the decision prior is tabulated over."""
    scheme = SchemeKind(scheme)
    if scheme is SchemeKind.STC:
        return state_alphabet(SchemeKind.PARALLEL)
    return state_alphabet(scheme)


def quadrature_grid(rho: float, n_nodes: int = DEFAULT_NODES):
    """Nodes and normalised weights over the shared standard-normal noise factor."""
    if rho == 0.0:
        return np.zeros(1), np.ones(1)
    nodes, weights = hermegauss(n_nodes)
    return nodes, weights / weights.sum()


def _conditional_moments(sensing: SensingModel, nodes: np.ndarray, ell: int):
    """Mean ``(nodes, K)`` and std ``(K,)`` of the measurements given the shared factor."""
    sig = sensing.sigma
    mean = ell + np.outer(nodes, sig * np.sqrt(sensing.rho))
    return mean, sig * np.sqrt(1.0 - sensing.rho)


def _pair_outer(per_sensor: np.ndarray) -> np.ndarray:
    """Combine per-sensor state vectors ``(..., K, m)`` into pair tables ``(..., S, m*m)``."""
    first, second = per_sensor[..., 0::2, :], per_sensor[..., 1::2, :]
    out = first[..., :, None] * second[..., None, :]
    return out.reshape(*out.shape[:-2], -1)


def _sign_tables(sensing: SensingModel, nodes: np.ndarray) -> np.ndarray:
    """Per-sensor ``(P(u=-1), P(u=+1))``, shape ``(2, nodes, K, 2)``."""
    out = []
    for ell in (0, 1):
        mean, std = _conditional_moments(sensing, nodes, ell)
        p_plus = ndtr((mean - sensing.tau) / std)
        out.append(np.stack([1 - p_plus, p_plus], axis=-1))
    return np.asarray(out)


def _regions_above(func, lo: float, hi: float, n_grid: int = 4001):
    """Intervals of ``[lo, hi]`` where ``func > 0``, located on a grid and refined by root finding."""
    xs = np.linspace(lo, hi, n_grid)
    vals = func(xs)
    positive = vals > 0
    edges = [lo]
    for k in np.flatnonzero(positive[1:] != positive[:-1]):
        edges.append(optimize.brentq(func, xs[k], xs[k + 1], xtol=1e-13))
    edges.append(hi)
    intervals = []
    state = positive[0]
    for a, b in zip(edges[:-1], edges[1:]):
        if state:
            intervals.append((a, b))
        state = not state
    return intervals


def threshold_regions(sensing: SensingModel, k: int):
    """Measurement sets of sensor ``k`` for the four ``(u, u_bar)`` states.

    Returned as four lists of ``(lo, hi)`` intervals in :func:`prior_alphabet`
    order for a single sensor: ``(-,-), (-,+), (+,-), (+,+)``.
    """
    sig, tau = sensing.sigma, sensing.tau
    p = k ^ 1
    if sensing.rho == 0.0:
        pd, pf = detection_probs(sig[p], tau[p])
        t1, t2 = threshold_pair_uncorrelated(sig[k], sensing.pi0, pd, pf)
        return [[(-np.inf, t2)], [(t2, tau[k])], [(tau[k], t1)], [(t1, np.inf)]]
    span = 16.0 * sig[k]
    regions = []
    for u, lo, hi in ((-1, tau[k] - span, tau[k]), (1, tau[k], tau[k] + span)):
        def func(x, u=u):
            return log_lambda_bar_batch(x, u, sig[k], sig[p], tau[p], sensing.rho) - sensing.log_prior_ratio

        above = _regions_above(func, lo, hi)
        below, prev = [], lo
        for a, b in above:
            if a > prev:
                below.append((prev, a))
            prev = b
        if prev < hi:
            below.append((prev, hi))
        # stretch the outermost edges to infinity
        def stretch(ints):
            return [(-np.inf if a == tau[k] - span else a, np.inf if b == tau[k] + span else b) for a, b in ints]

        regions.extend([stretch(below), stretch(above)])
    return regions


def _interval_mass(intervals, mean, std):
    total = 0.0
    for lo, hi in intervals:
        total = total + ndtr((hi - mean) / std) - ndtr((lo - mean) / std)
    return total


def _threshold_tables(sensing: SensingModel, nodes: np.ndarray) -> np.ndarray:
    per_sensor = np.zeros((2, len(nodes), sensing.K, 4))
    for k in range(sensing.K):
        regions = threshold_regions(sensing, k)
        for ell in (0, 1):
            mean, std = _conditional_moments(sensing, nodes, ell)
            for state, intervals in enumerate(regions):
                per_sensor[ell, :, k, state] = _interval_mass(intervals, mean[:, k], std[k])
    return _pair_outer(per_sensor)


def _laplace_shape(gamma: float):
    """Scale parameters of the asymmetric Laplace law of the partner-link log-likelihood ratio."""
    root = np.sqrt(gamma * gamma + gamma)
    return 2.0 * (gamma + root), 2.0 * (root - gamma)


def _fusion_sensor_table(sigma, tau, partner_pd, partner_pf, pi0, gamma, ell):
    """``J[a, b, a']``: P(u=a, updated u=b | partner decision a', H_ell) for one sensor.

    Indices use 0 for -1 and 1 for +1. Independent sensing noise only.
    """
    q_tau = float(ndtr((ell - tau) / sigma))

    def tail(lam):
        # certain partners (Pd = 1 or Pf = 0) give infinite logs, which logaddexp handles
        with np.errstate(divide="ignore"):
            log_phi = np.logaddexp(np.log(partner_pd) + lam, np.log1p(-partner_pd)) - np.logaddexp(
                np.log(partner_pf) + lam, np.log1p(-partner_pf)
            )
        shifted = tau - sigma**2 * log_phi
        return ndtr((ell - shifted) / sigma)

    J = np.zeros((2, 2, 2))
    for a_partner, u_partner in enumerate((-1, 1)):
        if gamma == 0.0:
            m_pos, m_neg, i_pos, i_neg = 1.0, 0.0, q_tau, 0.0
        else:
            p, q = _laplace_shape(gamma)
            # scale of the tail on the side the partner's symbol pushes towards
            right, left = (p, q) if u_partner > 0 else (q, p)
            m_pos, m_neg = right / (p + q), left / (p + q)
            i_pos = m_pos * integrate.quad(lambda t: np.exp(-t) * tail(right * t), 0, np.inf, epsabs=1e-14, epsrel=1e-11, limit=200)[0]
            i_neg = m_neg * integrate.quad(lambda t: np.exp(-t) * tail(-left * t), 0, np.inf, epsabs=1e-14, epsrel=1e-11, limit=200)[0]
        J[1, 1, a_partner] = m_pos * q_tau + i_neg
        J[1, 0, a_partner] = m_neg * q_tau - i_neg
        J[0, 1, a_partner] = i_pos - m_pos * q_tau
        J[0, 0, a_partner] = m_pos - i_pos + m_neg * (1.0 - q_tau)
    return np.clip(J, 0.0, 1.0)


def _fusion_closed_tables(sensing: SensingModel, net: NetworkConfig) -> np.ndarray:
    if sensing.rho != 0.0:
        raise ValueError("closed-form fusion prior requires uncorrelated sensing noise")
    sig, tau = sensing.sigma, sensing.tau
    pd, pf = detection_probs(sig, tau)
    gam = net.gamma_hs
    out = np.zeros((2, 1, sensing.S, 4))
    for s in range(sensing.S):
        i, j = 2 * s, 2 * s + 1
        for ell in (0, 1):
            Ji = _fusion_sensor_table(sig[i], tau[i], pd[j], pf[j], sensing.pi0, gam[s], ell)
            Jj = _fusion_sensor_table(sig[j], tau[j], pd[i], pf[i], sensing.pi0, gam[s], ell)
            # sum over the true decisions a (sensor i) and a2 (sensor j)
            table = np.einsum("abc,cda->bd", Ji, Jj)
            out[ell, 0, s] = table.ravel()
    return out


def _monte_carlo_tables(scheme, sensing, net, nodes, samples, rng):
    from .sensing import second_decisions

    m = len(prior_alphabet(scheme))
    out = np.zeros((2, len(nodes), sensing.S, m))
    bit = lambda a: (a > 0).astype(int)  # noqa: E731
    chunk = 100_000
    for ell in (0, 1):
        for q, node in enumerate(nodes):
            counts = np.zeros((sensing.S, m))
            done = 0
            while done < samples:
                n = min(chunk, samples - done)
                own = rng.standard_normal((n, sensing.K))
                x = ell + sensing.sigma * (np.sqrt(sensing.rho) * node + np.sqrt(1 - sensing.rho) * own)
                if scheme is SchemeKind.THRESHOLD:
                    u, ub = second_decisions(sensing, x)
                    idx = 8 * bit(u[:, 0::2]) + 4 * bit(ub[:, 0::2]) + 2 * bit(u[:, 1::2]) + bit(ub[:, 1::2])
                else:
                    u = np.where(x > sensing.tau, 1, -1)
                    if scheme is SchemeKind.FUSION:
                        g, r = exchange(u, net, rng)
                        u = fusion_updates(sensing, net, x, u, g, r)
                    idx = 2 * bit(u[:, 0::2]) + bit(u[:, 1::2])
                for s in range(sensing.S):
                    counts[s] += np.bincount(idx[:, s], minlength=m)
                done += n
            out[ell, q] = counts / samples
    return out


def build_decision_prior(
    scheme: SchemeKind,
    sensing: SensingModel,
    net: NetworkConfig,
    method=None,
    rng: Optional[np.random.Generator] = None,
    n_nodes: int = DEFAULT_NODES,
) -> DecisionPrior:
    """Tabulate the pair-state probabilities the FC likelihood ratio needs.

    ``method`` is :class:`ClosedForm` or :class:`MonteCarlo`. When omitted,
    closed forms are used except for the fusion scheme under correlated noise.
    """
    scheme = SchemeKind.parse(scheme)
    if method is None:
        if scheme is SchemeKind.FUSION and sensing.rho > 0:
            method = MonteCarlo(DEFAULT_CORRELATED_SAMPLES)
        else:
            method = ClosedForm()
    nodes, weights = quadrature_grid(sensing.rho, n_nodes)
    if isinstance(method, ClosedForm):
        if scheme is SchemeKind.THRESHOLD:
            tables = _threshold_tables(sensing, nodes)
        elif scheme is SchemeKind.FUSION:
            tables = _fusion_closed_tables(sensing, net)
        else:
            tables = _pair_outer(_sign_tables(sensing, nodes))
        label = "closed"
    elif isinstance(method, MonteCarlo):
        if rng is None:
            rng = np.random.default_rng(method.seed)
        tables = _monte_carlo_tables(scheme, sensing, net, nodes, method.samples, rng)
        label = f"montecarlo:{method.samples}"
    else:
        raise TypeError(f"unknown prior method {method!r}")
    flip = demod_error_prob(net.gamma_hs) if scheme is SchemeKind.STC else None
    return DecisionPrior(scheme, nodes, weights, tables, flip, label)


def prior_key(scheme: SchemeKind, sensing: SensingModel, net: NetworkConfig, method) -> str:
    """Content hash identifying a prior in an on-disk cache."""
    blob = json.dumps(
        {"scheme": SchemeKind.parse(scheme).value, "sensing": asdict(sensing), "net": asdict(net),
         "method": repr(method), "version": PRIOR_FORMAT_VERSION},
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


class PriorCache:
    """In-memory cache of decision priors, optionally mirrored to a directory of JSON files."""

    def __init__(self, directory: Optional[os.PathLike] = None):
        self.directory = Path(directory) if directory else None
        self._memory: dict = {}

    def get(self, scheme, sensing, net, method=None) -> DecisionPrior:
        key = prior_key(scheme, sensing, net, method)
        if key in self._memory:
            return self._memory[key]
        path = self.directory / f"{key}.json" if self.directory else None
        if path is not None and path.exists():
            prior = DecisionPrior.from_json(path.read_text())
        else:
            prior = build_decision_prior(scheme, sensing, net, method)
            if path is not None:
                self.directory.mkdir(parents=True, exist_ok=True)
                path.write_text(prior.to_json())
        self._memory[key] = prior
        return prior


def pair_loglik(scheme: SchemeKind, net: NetworkConfig, h, y=None, z=None, sigma2_eff=None) -> np.ndarray:
    """Log-likelihood of every pair's FC signals under each pair state, up to a common constant.

    Inputs carry a leading trial axis; output has shape ``(n, S, states)``.
    """
    scheme = SchemeKind.parse(scheme)
    amps = state_amplitudes(scheme, net.alpha)
    h = np.asarray(h)
    h_i, h_j = h[..., 0::2, None], h[..., 1::2, None]
    if scheme.alamouti:
        mu_i, mu_j = combined_means(amps[:, 0, 0], amps[:, 0, 1], amps[:, 1, 0], amps[:, 1, 1], h_i, h_j)
        dist = np.abs(z[..., 0, None] - mu_i) ** 2 + np.abs(z[..., 1, None] - mu_j) ** 2
        return -dist / sigma2_eff[..., None]
    y = np.asarray(y)
    dist = np.abs(y[..., 0::2, None] - amps[:, 0, 0] * h_i) ** 2 + np.abs(y[..., 1::2, None] - amps[:, 1, 1] * h_j) ** 2
    return -dist / net.sigma_v2


def log_lrt_from_loglik(prior: DecisionPrior, loglik: np.ndarray) -> np.ndarray:
    """log f(signals|H1) - log f(signals|H0) given per-pair state log-likelihoods."""
    shift = loglik.max(axis=-1, keepdims=True)
    scaled = np.exp(loglik - shift)
    tables = prior.likelihood_tables()
    log_w = np.log(prior.weights)
    out = []
    for ell in (0, 1):
        inner = np.einsum("nsm,qsm->nqs", scaled, tables[ell])
        per_node = np.log(np.maximum(inner, _TINY)).sum(axis=-1) + log_w
        out.append(logsumexp(per_node, axis=-1))
    return out[1] - out[0]


def _check_prior(scheme, prior):
    if prior.scheme is not SchemeKind.parse(scheme):
        raise ValueError(f"prior built for {prior.scheme.value}, used with {scheme}")


def lrt_decide_batch(prior: DecisionPrior, rec: BatchRecord, net: NetworkConfig, pi0: float):
    """Vectorised LRT; returns ``(log_lrt, decided)`` with ``decided`` in {0, 1}."""
    _check_prior(rec.scheme, prior)
    ll = pair_loglik(rec.scheme, net, rec.h, rec.y, rec.z, rec.sigma2_eff)
    log_lrt = log_lrt_from_loglik(prior, ll)
    return log_lrt, (log_lrt > np.log(pi0 / (1 - pi0))).astype(int)


def majority_votes(scheme: SchemeKind, net: NetworkConfig, h, y=None, z=None, sigma2_eff=None) -> np.ndarray:
    """Vote sum over all demodulated symbols for each trial."""
    scheme = SchemeKind.parse(scheme)
    if not scheme.alamouti:
        h = np.asarray(h)
        if np.any(h == 0):
            raise ValueError("cannot demodulate over a zero channel")
        return np.where(np.real(np.asarray(y) * np.conj(h)) > 0, 1, -1).sum(axis=-1)
    ll = pair_loglik(scheme, net, h, z=z, sigma2_eff=sigma2_eff)
    best = state_alphabet(scheme)[ll.argmax(axis=-1)]  # (n, S, 4)
    return best.sum(axis=(-1, -2))


def majority_decide_batch(rec: BatchRecord, net: NetworkConfig):
    votes = majority_votes(rec.scheme, net, rec.h, rec.y, rec.z, rec.sigma2_eff)
    return votes, (votes > 0).astype(int)


def _as_batch(signals: FcSignals, channels: ChannelRealization):
    def lift(a):
        return None if a is None else np.asarray(a)[None]

    return lift(channels.h), lift(signals.y), lift(signals.z), lift(signals.sigma2_eff)


def lrt_decide(scheme, prior: DecisionPrior, signals: FcSignals, channels: ChannelRealization,
               net: NetworkConfig, pi0: float) -> FcDecision:
    """Likelihood ratio test at the FC for a single trial."""
    _check_prior(scheme, prior)
    h, y, z, s2 = _as_batch(signals, channels)
    value = float(log_lrt_from_loglik(prior, pair_loglik(scheme, net, h, y, z, s2))[0])
    decided = Hypothesis.H1 if value > np.log(pi0 / (1 - pi0)) else Hypothesis.H0
    return FcDecision(decided=decided, log_lrt=value)


def majority_decide(scheme, signals: FcSignals, channels: ChannelRealization,
                    net: NetworkConfig, pi0: float = 0.5) -> FcDecision:
    """Majority vote over demodulated symbols for a single trial; a tie decides H0."""
    h, y, z, s2 = _as_batch(signals, channels)
    votes = int(majority_votes(scheme, net, h, y, z, s2)[0])
    return FcDecision(decided=Hypothesis.H1 if votes > 0 else Hypothesis.H0, vote_sum=votes)
