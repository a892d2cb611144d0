"""Upper bounds on the average error probability, error floors and large-network exponents.

All four architectures share one bound construction. A network state is a
sequence of per-pair states ``x``; with error-free channels the FC decides H1
exactly when ``c(x) = pi1 P(x|H1) - pi0 P(x|H0) > 0``. Fading enters through
per-pair factors

    D1 = 1 / det(I + (gamma_h / 4) dB^T dB)
    D2 = 1 / det(I + (t - t^2) gamma_h dB^T dB)

where ``dB`` is the difference of the pair's 2x2 amplitude maps (see
:func:`decifuse.schemes.state_amplitudes`). Sums over state sequences are
aggregated by dynamic programming over per-sensor (or per-pair) state
histograms, which is all the priors and the sign of ``c`` depend on.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.special import gammaln, logsumexp

from .channel import NetworkConfig, demod_error_prob
from .schemes import SchemeKind, state_alphabet, state_amplitudes
from .sensing import SensingModel, detection_probs

T_GRID = np.round(np.arange(1, 100) / 100.0, 2)
MAX_JOINT_STATES = 400_000
MAX_ENUMERATED_SEQUENCES = 1024


class DegenerateOperatingPoint(ValueError):
    """No number of positive votes makes the error-free LRT choose H1."""


class BoundTooLarge(RuntimeError):
    """The aggregation state space exceeds the configured limit."""


@dataclass(frozen=True)
class HomogeneousOperatingPoint:
    """Identical, uncorrelated sensors and identical links.

    ``pair_probs`` (fusion scheme, shape ``(2, 4)``) and ``four_state_probs``
    (threshold scheme, shape ``(2, 4)``) are optional per-hypothesis tables
    in the state order of :func:`decifuse.fusion.prior_alphabet`.
    """

    Pd: float
    Pf: float
    pi0: float
    K: int
    gamma_h: float
    gamma_hs: float = float("inf")
    alpha: float = 0.5
    pair_probs: Optional[tuple] = None
    four_state_probs: Optional[tuple] = None

    def __post_init__(self):
        if not 0.0 < self.Pf < self.Pd < 1.0:
            raise ValueError("need 0 < Pf < Pd < 1")
        if not 0.0 < self.pi0 < 1.0:
            raise ValueError("pi0 must lie in (0, 1)")
        if self.K < 2 or self.K % 2:
            raise ValueError("K must be even and at least 2")

    @property
    def S(self) -> int:
        return self.K // 2

    @classmethod
    def from_models(cls, sensing: SensingModel, net: NetworkConfig, with_tables: bool = True):
        """Operating point of a homogeneous, uncorrelated configuration."""
        from .fusion import build_decision_prior, threshold_regions, _interval_mass

        if sensing.rho != 0.0 or not sensing.is_homogeneous:
            raise ValueError("bounds are defined only for identical, uncorrelated sensors")
        if len(set(net.d)) != 1 or len(set(net.d0)) != 1:
            raise ValueError("bounds are defined only for identical link distances")
        sigma = sensing.sigma[0]
        pd, pf = detection_probs(sigma, sensing.tau[0])
        pair = four = None
        if with_tables:
            prior = build_decision_prior(SchemeKind.FUSION, sensing, net)
            pair = tuple(map(tuple, prior.tables[:, 0, 0, :]))
            regions = threshold_regions(sensing, 0)
            four = tuple(
                tuple(float(_interval_mass(r, ell, sigma)) for r in regions) for ell in (0, 1)
            )
        return cls(pd, pf, sensing.pi0, sensing.K, float(net.gamma_h[0]), float(net.gamma_hs[0]),
                   net.alpha, pair, four)


@dataclass
class BoundResult:
    """Bound components. ``Pe1_bar`` covers H0 trials, ``Pe2_bar`` H1 trials, both prior-weighted."""

    Pe11: float
    Pe12: float
    Pe21: float
    Pe22: float
    t_star: float
    M: Optional[int]
    S0_size: float
    S1_size: float
    pi0: float = 0.5
    curve: np.ndarray = field(repr=False, default=None)

    @property
    def Te1_bar(self) -> float:
        """Fading-averaged error given H0, before weighting by the prior."""
        return self.Pe1_bar / self.pi0

    @property
    def Te2_bar(self) -> float:
        return self.Pe2_bar / (1.0 - self.pi0)

    @property
    def Pe1_bar(self) -> float:
        return self.Pe11 + self.Pe12

    @property
    def Pe2_bar(self) -> float:
        return self.Pe21 + self.Pe22

    @property
    def Pe_bar(self) -> float:
        return self.Pe1_bar + self.Pe2_bar


# ---------------------------------------------------------------- error floor


def _log_vote_ratio(Pd, Pf, K):
    n = np.arange(K + 1)
    return n * np.log(Pd / Pf) + (K - n) * np.log((1 - Pd) / (1 - Pf))


def find_M(Pd: float, Pf: float, pi0: float, K: int, strict: bool = True) -> int:
    """Smallest vote count for which the error-free LRT decides H1."""
    if not 0.0 < Pf < Pd < 1.0:
        raise ValueError("need 0 < Pf < Pd < 1")
    above = np.flatnonzero(_log_vote_ratio(Pd, Pf, K) > np.log(pi0 / (1 - pi0)))
    if above.size == 0:
        if strict:
            raise DegenerateOperatingPoint("no vote count makes the error-free test choose H1")
        return K + 1
    return int(above[0])


def _log_binom_pmf(n, K, p):
    n = np.asarray(n)
    with np.errstate(divide="ignore"):
        return (gammaln(K + 1) - gammaln(n + 1) - gammaln(K - n + 1)
                + n * np.log(p) + (K - n) * np.log1p(-p))


def error_floor(Pd: float, Pf: float, pi0: float, K: int) -> float:
    """Average error with error-free channels, the limit of every scheme without exchange."""
    if Pd >= 1.0 and Pf <= 0.0:
        return 0.0
    M = find_M(Pd, Pf, pi0, K, strict=False)
    n = np.arange(K + 1)
    miss = logsumexp(_log_binom_pmf(n[:M], K, Pd)) if M > 0 else -np.inf
    false_alarm = logsumexp(_log_binom_pmf(n[M:], K, Pf)) if M <= K else -np.inf
    return float((1 - pi0) * np.exp(miss) + pi0 * np.exp(false_alarm))


def minimize_t(bound_curve: Union[Callable[[float], float], Sequence[float]], grid=T_GRID):
    """Grid minimum over t in {0.01, ..., 0.99}; ties go to the smaller t."""
    grid = np.asarray(grid)
    if callable(bound_curve):
        values = np.array([bound_curve(float(t)) for t in grid])
    else:
        values = np.asarray(bound_curve, dtype=float)
    k = int(np.argmin(values))
    return float(grid[k]), float(values[k])


# ---------------------------------------------------------------- pair models


@dataclass(frozen=True)
class PairModel:
    """Per-pair ingredients of the bound.

    ``increments[x]`` counts how many sensors (or pairs) of each unit state pair
    state ``x`` contributes; ``log_unit_probs[ell]`` are the unit-state
    log-probabilities under H_ell; ``weights[x]`` is a hypothesis-free factor
    of the pair-state probability (the partner-link flip probabilities for STC).
    """

    amplitudes: np.ndarray
    increments: np.ndarray
    weights: np.ndarray
    log_unit_probs: np.ndarray
    gamma_h: float

    @property
    def n_states(self) -> int:
        return len(self.weights)

    @property
    def units_per_pair(self) -> int:
        return int(self.increments[0].sum())

    def log_pair_probs(self) -> np.ndarray:
        """``(2, states)`` log P(pair state | H_ell)."""
        with np.errstate(divide="ignore"):
            return np.log(self.weights)[None, :] + (self.increments @ self.log_unit_probs.T).T

    def fading_factors(self, t_grid=T_GRID):
        """``D1`` with shape ``(m, m)`` and ``D2`` with shape ``(m, m, len(t_grid))``."""
        diff = self.amplitudes[:, None] - self.amplitudes[None, :]
        gram = np.einsum("xyki,xykj->xyij", diff, diff)
        trace = gram[..., 0, 0] + gram[..., 1, 1]
        det = gram[..., 0, 0] * gram[..., 1, 1] - gram[..., 0, 1] * gram[..., 1, 0]
        s1 = self.gamma_h / 4.0
        d1 = 1.0 / (1.0 + s1 * trace + s1**2 * det)
        s2 = (np.asarray(t_grid) - np.asarray(t_grid) ** 2) * self.gamma_h
        d2 = 1.0 / (1.0 + s2 * trace[..., None] + s2**2 * det[..., None])
        return d1, d2


def _log(p):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(p, dtype=float))


def _sensor_increments(states, columns, n_unit_states, unit_index):
    inc = np.zeros((len(states), n_unit_states), dtype=int)
    for cols in columns:
        idx = unit_index(states[:, cols])
        np.add.at(inc, (np.arange(len(states)), idx), 1)
    return inc


def pair_model(scheme, op: HomogeneousOperatingPoint) -> PairModel:
    scheme = SchemeKind.parse(scheme)
    states = state_alphabet(scheme)
    amps = state_amplitudes(scheme, op.alpha)
    m = len(states)
    bit = lambda a: (np.asarray(a) > 0).astype(int)  # noqa: E731
    if scheme in (SchemeKind.PARALLEL, SchemeKind.STC):
        probs = np.array([[1 - op.Pf, op.Pf], [1 - op.Pd, op.Pd]])
        inc = _sensor_increments(states, [[0], [1]], 2, lambda c: bit(c[:, 0]))
        weights = np.ones(m)
        if scheme is SchemeKind.STC:
            flip = demod_error_prob(op.gamma_hs) if np.isfinite(op.gamma_hs) else 0.0
            agree = states[:, :2] == states[:, 2:]
            weights = np.prod(np.where(agree, 1 - flip, flip), axis=1)
    elif scheme is SchemeKind.FUSION:
        if op.pair_probs is None:
            raise ValueError("fusion bound needs the pair decision probabilities")
        probs = np.asarray(op.pair_probs, dtype=float)
        inc = np.eye(m, dtype=int)
        weights = np.ones(m)
    else:
        if op.four_state_probs is None:
            raise ValueError("threshold bound needs the four-state decision probabilities")
        probs = np.asarray(op.four_state_probs, dtype=float)
        inc = _sensor_increments(states, [[0, 1], [2, 3]], 4, lambda c: 2 * bit(c[:, 0]) + bit(c[:, 1]))
        weights = np.ones(m)
    if not np.allclose(probs.sum(axis=1), 1.0, atol=1e-9):
        raise ValueError("decision probabilities must sum to one under each hypothesis")
    return PairModel(amps, inc, weights, _log(probs), float(op.gamma_h))


# ---------------------------------------------------------------- aggregation


def _split_sign(log_a, log_b):
    """Sign and log-magnitude of ``exp(log_a) - exp(log_b)``; near-exact ties give sign 0."""
    hi = np.maximum(log_a, log_b)
    lo = np.minimum(log_a, log_b)
    gap = lo - hi
    sign = np.sign(log_a - log_b)
    sign = np.where(np.abs(log_a - log_b) < 1e-12, 0, sign)
    with np.errstate(divide="ignore"):
        mag = hi + np.log1p(-np.exp(np.minimum(gap, -1e-300)))
    return sign, mag


def _assemble(pi0, log_a0, log_a1, n_w, n_count, keys_x, keys_x1, joint):
    """Combine histogram-level sums into the four bound components."""
    pi1 = 1 - pi0
    sign, log_mag = _split_sign(np.log(pi1) + log_a1, np.log(pi0) + log_a0)
    s1 = sign > 0
    s0 = sign < 0
    tie = sign == 0
    size_s1 = float(np.sum(n_count[s1]))
    size_s0 = float(np.sum(n_count[s0]))
    pe12 = float(pi0 * np.sum(np.exp(log_a0[s1 | tie]) * n_w[s1 | tie]))
    pe22 = float(pi1 * np.sum(np.exp(log_a1[s0 | tie]) * n_w[s0 | tie]))

    sx, sx1 = sign[keys_x], sign[keys_x1]
    mx, mx1 = log_mag[keys_x], log_mag[keys_x1]
    # first index on the S0 side, second on S1
    sel = (sx < 0) & (sx1 > 0)
    pe11 = 0.0
    if size_s1 > 0 and np.any(sel):
        log_terms = np.log(pi0) + log_a0[keys_x[sel]] - 0.5 * mx[sel] + 0.5 * mx1[sel]
        pe11 = float(np.sum(np.exp(log_terms) * joint[sel, 0]) / (2.0 * np.sqrt(size_s1)))
    sel = (sx > 0) & (sx1 < 0)
    curve = np.zeros(len(T_GRID))
    if size_s0 > 0 and np.any(sel):
        t = T_GRID[None, :]
        log_terms = (np.log(pi1) + log_a1[keys_x[sel]][:, None] - t * mx[sel][:, None]
                     + t * mx1[sel][:, None] + (t - 1) * np.log(size_s0))
        curve = np.sum(np.exp(log_terms) * joint[sel, 1:], axis=0)
    return pe11, pe12, curve, pe22, size_s0, size_s1


def _histogram_codes(model: PairModel, n_units: int):
    base = n_units + 1
    weights = base ** np.arange(model.increments.shape[1] - 1)
    return model.increments[:, :-1] @ weights, base


def _decode(codes, n_dims, base, total):
    hist = np.zeros((len(codes), n_dims + 1), dtype=float)
    rest = np.asarray(codes).copy()
    for c in range(n_dims):
        hist[:, c] = rest % base
        rest //= base
    hist[:, -1] = total - hist[:, :-1].sum(axis=1)
    return hist


def _dp(codes, kernel, stages, stride):
    """Sum over state sequences of products of per-stage kernel values, keyed by summed codes.

    ``codes`` holds one integer code array over the pair alphabet per tracked
    sequence; their sums are packed into a single key with radix ``stride``.
    ``kernel`` has shape ``(m,) * len(codes) + (columns,)``.
    """
    arity = len(codes)
    m = len(codes[0])
    combos = np.array(list(itertools.product(range(m), repeat=arity)))
    packed = sum(codes[a][combos[:, a]].astype(np.int64) * stride**a for a in range(arity))
    steps, inverse = np.unique(packed, return_inverse=True)
    step_vals = np.zeros((len(steps), kernel.shape[-1]))
    np.add.at(step_vals, inverse.ravel(), kernel[tuple(combos.T)])
    keys = np.zeros(1, dtype=np.int64)
    vals = np.ones((1, kernel.shape[-1]))
    for _ in range(stages):
        new_keys = np.unique((keys[:, None] + steps[None, :]).ravel())
        if len(new_keys) > MAX_JOINT_STATES:
            raise BoundTooLarge(f"{len(new_keys)} aggregation states exceed the limit {MAX_JOINT_STATES}")
        new_vals = np.zeros((len(new_keys), vals.shape[1]))
        # each step maps distinct keys to distinct targets, so plain fancy-index adds are safe
        for step, weight in zip(steps, step_vals):
            new_vals[np.searchsorted(new_keys, keys + step)] += vals * weight
        keys, vals = new_keys, new_vals
    return keys, vals


def _bound_by_histograms(model: PairModel, S: int, pi0: float):
    n_units = S * model.units_per_pair
    codes, base = _histogram_codes(model, n_units)
    n_dims = model.increments.shape[1] - 1
    w = model.weights
    d1, d2 = model.fading_factors()
    t = T_GRID

    stride = base**n_dims
    n_hist = comb(n_units + n_dims, n_dims)
    if n_hist**2 > MAX_JOINT_STATES:
        raise BoundTooLarge(f"about {n_hist ** 2} aggregation states exceed the limit {MAX_JOINT_STATES}")
    single = np.stack([np.ones_like(w), w], axis=-1)
    keys1, vals1 = _dp((codes,), single, S, stride)
    hist = _decode(keys1, n_dims, base, n_units)
    log_a = hist @ model.log_unit_probs.T  # (states, 2)

    with np.errstate(divide="ignore"):
        lw = np.log(w)
    k1 = np.exp(0.5 * (lw[:, None] + lw[None, :]))[..., None] * d1[..., None]
    k2 = np.exp((1 - t)[None, None, :] * lw[:, None, None] + t[None, None, :] * lw[None, :, None]) * d2
    keys2, vals2 = _dp((codes, codes), np.concatenate([k1, k2], axis=-1), S, stride)
    kx = np.searchsorted(keys1, keys2 % stride)
    kx1 = np.searchsorted(keys1, keys2 // stride)
    return _assemble(pi0, log_a[:, 0], log_a[:, 1], vals1[:, 1], vals1[:, 0], kx, kx1, vals2)


def _bound_by_enumeration(model: PairModel, S: int, pi0: float):
    """Brute force over all state sequences; independent of the histogram bookkeeping."""
    m = model.n_states
    n_seq = m**S
    if n_seq > MAX_ENUMERATED_SEQUENCES:
        raise BoundTooLarge(f"{n_seq} sequences exceed the enumeration limit")
    seqs = np.array(list(itertools.product(range(m), repeat=S)))
    log_p = model.log_pair_probs()[:, seqs].sum(axis=-1)  # (2, n_seq)
    p0, p1 = np.exp(log_p)
    c = (1 - pi0) * p1 - pi0 * p0
    s1, s0 = c > 0, c < 0
    d1, d2 = model.fading_factors()
    prod1 = np.ones((n_seq, n_seq))
    prod2 = np.ones((n_seq, n_seq, len(T_GRID)))
    for s in range(S):
        prod1 *= d1[seqs[:, s][:, None], seqs[:, s][None, :]]
        prod2 *= d2[seqs[:, s][:, None], seqs[:, s][None, :]]
    size_s1, size_s0 = float(s1.sum()), float(s0.sum())
    pe12 = float(pi0 * p0[~s0].sum())
    pe22 = float((1 - pi0) * p1[~s1].sum())
    pe11 = 0.0
    if size_s1:
        g = np.sqrt(c[s1][None, :] / np.abs(c[s0])[:, None])
        inner = (g * prod1[np.ix_(s0, s1)]).sum(axis=1) / (2 * np.sqrt(size_s1))
        pe11 = float(pi0 * np.sum(p0[s0] * inner))
    curve = np.zeros(len(T_GRID))
    if size_s0:
        ratio = np.abs(c[s0])[None, :] / c[s1][:, None]  # (S1, S0)
        block = prod2[np.ix_(s1, s0)]
        for k, t in enumerate(T_GRID):
            inner = ((size_s0 * ratio) ** t * block[..., k]).sum(axis=1) / size_s0
            curve[k] = (1 - pi0) * np.sum(p1[s1] * inner)
    return pe11, pe12, curve, pe22, size_s0, size_s1


def bound_for(scheme, op: HomogeneousOperatingPoint, aggregation: str = "histogram") -> BoundResult:
    """Bound on the average error probability of ``scheme`` at ``op``.

    ``aggregation`` is ``"histogram"`` (default) or ``"enumerate"``.
    """
    scheme = SchemeKind.parse(scheme)
    model = pair_model(scheme, op)
    if aggregation == "histogram":
        parts = _bound_by_histograms(model, op.S, op.pi0)
    elif aggregation == "enumerate":
        parts = _bound_by_enumeration(model, op.S, op.pi0)
    else:
        raise ValueError(f"unknown aggregation {aggregation!r}")
    pe11, pe12, curve, pe22, size_s0, size_s1 = parts
    t_star, pe21 = minimize_t(curve)
    M = None
    if scheme in (SchemeKind.PARALLEL, SchemeKind.STC):
        M = find_M(op.Pd, op.Pf, op.pi0, op.K, strict=False)
    return BoundResult(pe11, pe12, pe21, pe22, t_star, M, size_s0, size_s1, op.pi0, curve)


def bound_parallel(op: HomogeneousOperatingPoint, aggregation: str = "histogram") -> BoundResult:
    return bound_for(SchemeKind.PARALLEL, op, aggregation)


def bound_stc(op: HomogeneousOperatingPoint, aggregation: str = "histogram") -> BoundResult:
    return bound_for(SchemeKind.STC, op, aggregation)


def bound_fusion(op: HomogeneousOperatingPoint, prior=None, aggregation: str = "histogram") -> BoundResult:
    """``prior`` (a fusion :class:`~decifuse.fusion.DecisionPrior`) overrides ``op.pair_probs``."""
    if prior is not None:
        if prior.scheme is not SchemeKind.FUSION or len(prior.weights) != 1:
            raise ValueError("need an uncorrelated fusion-scheme prior")
        from dataclasses import replace

        op = replace(op, pair_probs=tuple(map(tuple, prior.tables[:, 0, 0, :])))
    return bound_for(SchemeKind.FUSION, op, aggregation)


def bound_threshold(op: HomogeneousOperatingPoint, four_state_probs=None, aggregation: str = "histogram") -> BoundResult:
    """``four_state_probs`` is ``(probs under H0, probs under H1)`` over ``(u, u_bar)`` states."""
    if four_state_probs is not None:
        probs = np.asarray(four_state_probs, dtype=float)
        if probs.shape != (2, 4) or np.any(probs < 0) or not np.allclose(probs.sum(axis=1), 1.0):
            raise ValueError("four-state probabilities must be two distributions over four states")
        from dataclasses import replace

        op = replace(op, four_state_probs=tuple(map(tuple, probs)))
    return bound_for(SchemeKind.THRESHOLD, op, aggregation)


# ---------------------------------------------------------------- asymptotics


@dataclass
class ExponentReport:
    """The four exponential terms of the large-network bound.

    ``terms`` maps ``"11"``, ``"12"``, ``"21"``, ``"22"`` to ``(mu, sigma2, kappa)``;
    ``rates`` holds the per-pair decay rate of each term and ``gamma_x`` the
    smallest of them, which dominates for many pairs.
    """

    scheme: SchemeKind
    terms: Dict[str, tuple]
    rates: Dict[str, float]
    gamma_x: float
    t0: float
    lognormal_checks: Dict[str, bool]

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "terms": {k: {"mu": v[0], "sigma2": v[1], "kappa": v[2]} for k, v in self.terms.items()},
            "rates": self.rates,
            "gamma_x": self.gamma_x,
            "t0": self.t0,
            "lognormal_checks": self.lognormal_checks,
        }


def _moments(values, probs):
    keep = probs > 0
    v, p = values[keep], probs[keep]
    p = p / p.sum()
    mu = float(np.sum(p * v))
    return mu, float(np.sum(p * (v - mu) ** 2))


def asymptotic_terms(scheme, op: HomogeneousOperatingPoint, prior_tables=None) -> ExponentReport:
    """Per-pair means and variances of the log statistics behind each exponential term.

    ``prior_tables`` optionally replaces the decision tables of ``op`` (fusion:
    pair probabilities; threshold: four-state probabilities).
    """
    from dataclasses import replace

    scheme = SchemeKind.parse(scheme)
    if prior_tables is not None:
        key = "pair_probs" if scheme is SchemeKind.FUSION else "four_state_probs"
        op = replace(op, **{key: tuple(map(tuple, np.asarray(prior_tables)))})
    model = pair_model(scheme, op)
    log_p = model.log_pair_probs()
    p0, p1 = np.exp(log_p)
    d1, d2 = model.fading_factors()
    with np.errstate(divide="ignore", invalid="ignore"):
        llr = log_p[1] - log_p[0]
    m = model.n_states
    mu12, var12 = _moments(llr, p0)
    mu22, var22 = _moments(llr, p1)

    joint01 = (p0[:, None] * p1[None, :]).ravel()
    with np.errstate(divide="ignore", invalid="ignore"):
        l11 = (np.log(d1) - 0.5 * log_p[0][:, None] - 0.5 * log_p[1][None, :]).ravel()
    mu11, var11 = _moments(l11, joint01)

    joint10 = (p1[:, None] * p0[None, :]).ravel()
    best = None
    for k, t in enumerate(T_GRID):
        with np.errstate(divide="ignore", invalid="ignore"):
            l21 = (np.log(d2[..., k]) - t * log_p[1][:, None] - (1 - t) * log_p[0][None, :]).ravel()
        mu, var = _moments(l21, joint10)
        if best is None or mu + var / 2 < best[0] + best[1] / 2:
            best = (mu, var, float(t))
    mu21, var21, t0 = best

    # set sizes and worst-case likelihood ratios of the finite network
    n_units = op.S * model.units_per_pair
    codes, base = _histogram_codes(model, n_units)
    keys, vals = _dp((codes,), np.ones((m, 1)), op.S, base ** (model.increments.shape[1] - 1))
    hist = _decode(keys, model.increments.shape[1] - 1, base, n_units)
    log_a = hist @ model.log_unit_probs.T
    margin = np.log(1 - op.pi0) + log_a[:, 1] - np.log(op.pi0) - log_a[:, 0]
    s1, s0 = margin > 0, margin < 0
    # every sequence with a given histogram shares the same weight-free ratio
    seq_count = vals[:, 0]
    size_s1 = float(np.sum(seq_count[s1]))
    size_s0 = float(np.sum(seq_count[s0]))
    pi0, pi1 = op.pi0, 1 - op.pi0
    kappa11 = kappa21 = float("nan")
    if np.any(s0) and size_s1:
        lrt_max = float(np.exp(margin[s0].max()))
        kappa11 = np.sqrt(pi0 * pi1) / (2 * np.sqrt(size_s1) * np.sqrt(1 - lrt_max))
    if np.any(s1) and size_s0:
        ratio_max = float(np.exp(-margin[s1].min()))
        kappa21 = pi0**t0 * pi1 ** (1 - t0) / (size_s0 ** (1 - t0) * (1 - ratio_max) ** t0)

    terms = {
        "11": (mu11, var11, float(kappa11)),
        "12": (mu12, var12, 0.5),
        "21": (mu21, var21, float(kappa21)),
        "22": (mu22, var22, 0.5),
    }
    rates = {
        "11": -(mu11 + var11 / 2),
        "12": mu12**2 / (2 * var12) if var12 > 0 else float("inf"),
        "21": -(mu21 + var21 / 2),
        "22": mu22**2 / (2 * var22) if var22 > 0 else float("inf"),
    }
    checks = {"11": mu11 + var11 / 2 < 0, "21": mu21 + var21 / 2 < 0}
    return ExponentReport(scheme, terms, rates, float(min(rates.values())), t0, checks)


def exponent_differences(reports: List[ExponentReport]) -> Dict[str, float]:
    """``gamma_b - gamma_a`` for every ordered pair of schemes."""
    out = {}
    for a, b in itertools.permutations(reports, 2):
        out[f"{b.scheme.value}-{a.scheme.value}"] = b.gamma_x - a.gamma_x
    return out
