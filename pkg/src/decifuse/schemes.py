"""Per-trial pipelines of the four architectures, vectorised over batches of trials."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import (
    ChannelRealization,
    FcSignals,
    NetworkConfig,
    alamouti_combine,
    draw_complex_gaussian,
    internode_demod,
    stc_amplitudes,
    threshold_amplitudes,
)
from .sensing import (
    Hypothesis,
    LocalDecisions,
    ObservationVector,
    SensingModel,
    draw_observation_batch,
    log_lambda_tilde_batch,
    second_decisions,
)


class SchemeKind(str, enum.Enum):
    PARALLEL = "parallel"
    STC = "stc"
    FUSION = "fusion"
    THRESHOLD = "threshold"

    @property
    def uses_alpha(self) -> bool:
        return self in (SchemeKind.STC, SchemeKind.FUSION)

    @property
    def alamouti(self) -> bool:
        return self in (SchemeKind.STC, SchemeKind.THRESHOLD)

    @classmethod
    def parse(cls, value) -> "SchemeKind":
        if isinstance(value, cls):
            return value
        aliases = {"stcatsensors": "stc", "fusionatsensors": "fusion", "thresholdchanging": "threshold"}
        key = str(value).lower().replace("-", "").replace("_", "").replace("@", "at")
        return cls(aliases.get(key, key))


def state_alphabet(scheme: SchemeKind) -> np.ndarray:
    """Pair states the FC likelihood sums over, as rows of +-1 values.

    Parallel: ``(u_i, u_j)``. Fusion: ``(ut_i, ut_j)``. STC: ``(u_i, u_j, uh_i, uh_j)``
    with ``uh`` the decisions as demodulated by the partner. Threshold:
    ``(u_i, ub_i, u_j, ub_j)``. Row order is lexicographic with -1 first.
    """
    width = 4 if SchemeKind(scheme).alamouti else 2
    return np.array(list(itertools.product((-1, 1), repeat=width)), dtype=int)


def state_amplitudes(scheme: SchemeKind, alpha: float = 0.5) -> np.ndarray:
    """Per-state real 2x2 map from ``(h_i, h_j)`` to the pair's two noise-free observations.

    For the orthogonal schemes the observations are ``(y_i, y_j)``; for the
    Alamouti schemes they are the two slots ``(y_n, y_{n+1})``.
    """
    scheme = SchemeKind(scheme)
    states = state_alphabet(scheme)
    out = np.zeros((len(states), 2, 2))
    if scheme is SchemeKind.PARALLEL or scheme is SchemeKind.FUSION:
        scale = np.sqrt(alpha) if scheme is SchemeKind.FUSION else 1.0
        out[:, 0, 0] = scale * states[:, 0]
        out[:, 1, 1] = scale * states[:, 1]
        return out
    if scheme is SchemeKind.STC:
        amps = stc_amplitudes(states[:, 0], states[:, 1], states[:, 2], states[:, 3], alpha)
    else:
        amps = threshold_amplitudes(states[:, 0], states[:, 1], states[:, 2], states[:, 3])
    out[:, 0, 0], out[:, 0, 1], out[:, 1, 0], out[:, 1, 1] = amps
    return out


@dataclass
class TrialRecord:
    hypothesis: Hypothesis
    observations: ObservationVector
    decisions: LocalDecisions
    channels: ChannelRealization
    fc_signals: FcSignals


@dataclass
class BatchRecord:
    """A batch of trials stored as arrays with a leading trial axis.

    ``g[:, 2s]`` carries sensor ``2s`` to ``2s+1`` and ``g[:, 2s+1]`` the reverse.
    ``u_hat[:, k]`` is sensor ``k``'s decision as demodulated by its partner.
    """

    scheme: SchemeKind
    hypotheses: np.ndarray
    x: np.ndarray
    u: np.ndarray
    h: np.ndarray
    g: Optional[np.ndarray] = None
    u_hat: Optional[np.ndarray] = None
    u_tilde: Optional[np.ndarray] = None
    u_bar: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    y_slots: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    sigma2_eff: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.hypotheses)

    def trial(self, n: int) -> TrialRecord:
        def pick(arr):
            return None if arr is None else arr[n]

        return TrialRecord(
            hypothesis=Hypothesis(int(self.hypotheses[n])),
            observations=ObservationVector(self.x[n], Hypothesis(int(self.hypotheses[n]))),
            decisions=LocalDecisions(self.u[n], pick(self.u_hat), pick(self.u_tilde), pick(self.u_bar)),
            channels=ChannelRealization(self.h[n], pick(self.g)),
            fc_signals=FcSignals(pick(self.y), pick(self.y_slots), pick(self.z), pick(self.sigma2_eff)),
        )


def _check(sensing: SensingModel, net: NetworkConfig) -> None:
    if sensing.K != net.K:
        raise ValueError(f"sensing model has {sensing.K} sensors, network has {net.K}")


def exchange(u: np.ndarray, net: NetworkConfig, rng: np.random.Generator, g=None):
    """Both directions of every partner link: returns ``(g, r)`` with shape of ``u``.

    A given ``g`` (shape ``(K,)``) is used for every trial instead of fresh fading.
    """
    if g is None:
        g = draw_complex_gaussian(np.repeat(net.sigma_hs2, 2), rng, size=u.shape)
    else:
        g = np.broadcast_to(np.asarray(g, dtype=complex), u.shape).copy()
    r = np.sqrt(1.0 - net.alpha) * u * g + draw_complex_gaussian(net.sigma_eta2, rng, size=u.shape)
    return g, r


def fusion_updates(sensing: SensingModel, net: NetworkConfig, x, u, g, r) -> np.ndarray:
    """Updated decisions of the fusion-at-sensors scheme.

    Sensor ``k`` fuses its own measurement with what it heard from its partner.
    """
    partner = np.arange(sensing.K) ^ 1
    sig = sensing.sigma
    tau = sensing.tau
    # signal heard by k travelled over the partner's outgoing link
    stat = log_lambda_tilde_batch(
        x, r[:, partner], g[:, partner], sig, sig[partner], tau[partner],
        sensing.rho, net.alpha, net.sigma_eta2,
    )
    return np.where(stat > sensing.log_prior_ratio, 1, -1)


def _alamouti(amps, h, net: NetworkConfig, rng):
    a_i, a_j, b_i, b_j = amps
    h_i, h_j = h[:, 0::2], h[:, 1::2]
    shape = h_i.shape
    y_n = a_i * h_i + a_j * h_j + draw_complex_gaussian(net.sigma_v2, rng, size=shape)
    y_n1 = b_i * h_i + b_j * h_j + draw_complex_gaussian(net.sigma_v2, rng, size=shape)
    z_i, z_j, sigma2 = alamouti_combine(y_n, y_n1, h_i, h_j, net.sigma_v2)
    return np.stack([y_n, y_n1], axis=-1), np.stack([z_i, z_j], axis=-1), sigma2


def simulate_batch(
    scheme: SchemeKind,
    sensing: SensingModel,
    net: NetworkConfig,
    hypotheses,
    rng: np.random.Generator,
    h=None,
    g=None,
) -> BatchRecord:
    """Run the full sensing, exchange and transmission chain for a batch of trials.

    Passing ``h`` (and ``g``) freezes the fading at that realization, which
    gives error rates conditional on the channel.
    """
    scheme = SchemeKind.parse(scheme)
    _check(sensing, net)
    hypotheses = np.asarray(hypotheses, dtype=int)
    x = draw_observation_batch(sensing, hypotheses, rng)
    n, K = x.shape
    rec = BatchRecord(scheme=scheme, hypotheses=hypotheses, x=x, u=None, h=None)

    if scheme is SchemeKind.THRESHOLD:
        rec.u, rec.u_bar = second_decisions(sensing, x)
    else:
        rec.u = np.where(x > sensing.tau, 1, -1)

    if scheme.uses_alpha:
        rec.g, r = exchange(rec.u, net, rng, g)
        if scheme is SchemeKind.STC:
            rec.u_hat = internode_demod(r, rec.g)
        else:
            rec.u_tilde = fusion_updates(sensing, net, x, rec.u, rec.g, r)

    if h is None:
        rec.h = draw_complex_gaussian(net.sigma_h2, rng, size=(n, K))
    else:
        rec.h = np.broadcast_to(np.asarray(h, dtype=complex), (n, K)).copy()
    if scheme is SchemeKind.PARALLEL:
        rec.y = rec.u * rec.h + draw_complex_gaussian(net.sigma_v2, rng, size=(n, K))
    elif scheme is SchemeKind.FUSION:
        rec.y = np.sqrt(net.alpha) * rec.u_tilde * rec.h + draw_complex_gaussian(net.sigma_v2, rng, size=(n, K))
    elif scheme is SchemeKind.STC:
        u, uh = rec.u, rec.u_hat
        amps = stc_amplitudes(u[:, 0::2], u[:, 1::2], uh[:, 0::2], uh[:, 1::2], net.alpha)
        rec.y_slots, rec.z, rec.sigma2_eff = _alamouti(amps, rec.h, net, rng)
    else:
        u, ub = rec.u, rec.u_bar
        amps = threshold_amplitudes(u[:, 0::2], ub[:, 0::2], u[:, 1::2], ub[:, 1::2])
        rec.y_slots, rec.z, rec.sigma2_eff = _alamouti(amps, rec.h, net, rng)
    return rec


def run_trial(
    scheme: SchemeKind,
    sensing: SensingModel,
    net: NetworkConfig,
    hypothesis: Hypothesis,
    rng: np.random.Generator,
) -> TrialRecord:
    """One trial of the chosen architecture under a given hypothesis."""
    return simulate_batch(scheme, sensing, net, [int(hypothesis)], rng).trial(0)


def observed_states(rec: BatchRecord) -> np.ndarray:
    """Index into :func:`state_alphabet` of each pair's true state, shape ``(n, S)``."""
    bit = lambda a: (a > 0).astype(int)  # noqa: E731
    scheme = rec.scheme
    if scheme is SchemeKind.PARALLEL:
        return 2 * bit(rec.u[:, 0::2]) + bit(rec.u[:, 1::2])
    if scheme is SchemeKind.FUSION:
        return 2 * bit(rec.u_tilde[:, 0::2]) + bit(rec.u_tilde[:, 1::2])
    if scheme is SchemeKind.STC:
        u, uh = rec.u, rec.u_hat
        return 8 * bit(u[:, 0::2]) + 4 * bit(u[:, 1::2]) + 2 * bit(uh[:, 0::2]) + bit(uh[:, 1::2])
    u, ub = rec.u, rec.u_bar
    return 8 * bit(u[:, 0::2]) + 4 * bit(ub[:, 0::2]) + 2 * bit(u[:, 1::2]) + bit(ub[:, 1::2])
