"""Monte Carlo engine, power-split sweeps and CSV experiment runs."""

from __future__ import annotations

import csv
import io
import itertools
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional, Sequence, Union

import numpy as np

from .channel import NetworkConfig
from .fusion import (
    ClosedForm,
    DecisionPrior,
    MonteCarlo,
    PriorCache,
    lrt_decide_batch,
    majority_decide_batch,
)
from .schemes import SchemeKind, simulate_batch
from .sensing import SensingModel

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1 << 15
THREADS_ENV = "DECIFUSE_THREADS"
RULES = ("lrt", "majority")
DEFAULT_ALPHA_GRID = tuple(np.round(np.arange(0.05, 0.951, 0.05), 2))
CSV_COLUMNS = (
    "scheme", "rule", "K", "rho", "pi0", "snr_c_db", "snr_h_db", "alpha",
    "trials", "pe_hat", "stderr", "pe_bound", "error_floor", "seed",
)


@dataclass
class ErrorEstimate:
    """Monte Carlo error probability with its per-hypothesis tallies."""

    pe_hat: float
    stderr: float
    trials: int
    errors_h0: int
    trials_h0: int
    errors_h1: int
    trials_h1: int

    @property
    def p_err_h0(self) -> float:
        return self.errors_h0 / self.trials_h0 if self.trials_h0 else 0.0

    @property
    def p_err_h1(self) -> float:
        return self.errors_h1 / self.trials_h1 if self.trials_h1 else 0.0

    @classmethod
    def from_counts(cls, counts, pi0: float) -> "ErrorEstimate":
        e0, n0, e1, n1 = (int(c) for c in counts)
        pi1 = 1.0 - pi0
        p0 = e0 / n0 if n0 else 0.0
        p1 = e1 / n1 if n1 else 0.0
        var = 0.0
        if n0:
            var += pi0**2 * p0 * (1 - p0) / n0
        if n1:
            var += pi1**2 * p1 * (1 - p1) / n1
        return cls(pi0 * p0 + pi1 * p1, float(np.sqrt(var)), n0 + n1, e0, n0, e1, n1)

    def ci(self, z: float = 1.96):
        return self.pe_hat - z * self.stderr, self.pe_hat + z * self.stderr


def block_rng(master_seed: int, cell_index: int, block_index: int) -> np.random.Generator:
    """Independent counter-derived stream for one block of trials."""
    seq = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(cell_index), int(block_index)])
    return np.random.Generator(np.random.Philox(seq))


def resolve_workers(workers: Optional[int] = None) -> int:
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1") or 1)
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def _block_counts(task):
    scheme, rule, sensing, net, prior, seed, cell, block, n = task
    rng = block_rng(seed, cell, block)
    hyps = (rng.random(n) >= sensing.pi0).astype(int)
    rec = simulate_batch(scheme, sensing, net, hyps, rng)
    if rule == "lrt":
        _, decided = lrt_decide_batch(prior, rec, net, sensing.pi0)
    else:
        _, decided = majority_decide_batch(rec, net)
    wrong = decided != hyps
    return (
        int(np.sum(wrong & (hyps == 0))), int(np.sum(hyps == 0)),
        int(np.sum(wrong & (hyps == 1))), int(np.sum(hyps == 1)),
    )


def _check_rule(rule: str) -> str:
    rule = rule.lower()
    if rule not in RULES:
        raise ValueError(f"unknown fusion rule {rule!r}; expected one of {RULES}")
    return rule


def estimate_pe(
    scheme,
    rule: str,
    sensing: SensingModel,
    net: NetworkConfig,
    trials: int,
    master_seed: int,
    *,
    cell_index: int = 0,
    prior: Optional[DecisionPrior] = None,
    workers: Optional[int] = None,
    cache: Optional[PriorCache] = None,
) -> ErrorEstimate:
    """Average error probability of one configuration.

    Trials are split into fixed-size blocks, each seeded from
    ``(master_seed, cell_index, block)``, so the result does not depend on
    the number of workers.
    """
    scheme = SchemeKind.parse(scheme)
    rule = _check_rule(rule)
    if trials <= 0:
        raise ValueError("trials must be positive")
    if rule == "lrt" and prior is None:
        prior = (cache or PriorCache()).get(scheme, sensing, net)
    sizes = [BLOCK_SIZE] * (trials // BLOCK_SIZE)
    if trials % BLOCK_SIZE:
        sizes.append(trials % BLOCK_SIZE)
    tasks = [(scheme, rule, sensing, net, prior, master_seed, cell_index, b, n) for b, n in enumerate(sizes)]
    workers = min(resolve_workers(workers), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_block_counts, tasks))
    else:
        parts = [_block_counts(t) for t in tasks]
    return ErrorEstimate.from_counts(np.sum(parts, axis=0), sensing.pi0)


def sweep_alpha(
    scheme,
    rule: str,
    sensing: SensingModel,
    net: NetworkConfig,
    alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID,
    trials: int = 200_000,
    master_seed: int = 0,
    *,
    cell_index: int = 0,
    workers: Optional[int] = None,
    cache: Optional[PriorCache] = None,
):
    """Error probability across power splits; returns ``(table, alpha_star)``.

    Every grid point reuses the same random streams, so differences between
    neighbouring points are not swamped by sampling noise. Ties go to the
    smaller alpha.
    """
    scheme = SchemeKind.parse(scheme)
    if not scheme.uses_alpha:
        raise ValueError(f"scheme {scheme.value} has no power split")
    grid = [float(a) for a in alpha_grid]
    if not grid or any(not 0.0 < a < 1.0 for a in grid):
        raise ValueError("alpha grid must be non-empty and inside (0, 1)")
    cache = cache or PriorCache()
    table = []
    for alpha in grid:
        cfg = net.with_alpha(alpha)
        est = estimate_pe(scheme, rule, sensing, cfg, trials, master_seed,
                          cell_index=cell_index, workers=workers, cache=cache)
        table.append((alpha, est))
        logger.debug("%s alpha=%.2f pe=%.4g", scheme.value, alpha, est.pe_hat)
    best = int(np.argmin([est.pe_hat for _, est in table]))
    return table, table[best][0]


@dataclass
class ExperimentConfig:
    """Grid of operating points; every combination becomes one CSV row."""

    schemes: List[str] = field(default_factory=lambda: [s.value for s in SchemeKind])
    rule: str = "lrt"
    snr_c_db: List[float] = field(default_factory=lambda: [6.0])
    snr_h_db: List[float] = field(default_factory=lambda: [10.0])
    rho: List[float] = field(default_factory=lambda: [0.0])
    pi0: float = 0.6
    K: int = 10
    alpha: Union[str, float, List[float]] = "auto"
    alpha_grid: List[float] = field(default_factory=lambda: list(DEFAULT_ALPHA_GRID))
    sweep_trials: int = 200_000
    trials: int = 1_000_000
    master_seed: int = 0
    prior_method: str = "auto"
    prior_samples: int = 1_000_000
    bounds: bool = False
    output: Optional[str] = None
    workers: Optional[int] = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("schemes", "snr_c_db", "snr_h_db", "rho"):
            if not getattr(self, name):
                raise ValueError(f"grid {name} is empty")
        for s in self.schemes:
            SchemeKind.parse(s)
        _check_rule(self.rule)
        if self.trials < 10_000:
            raise ValueError("trials must be at least 10000")
        if self.K < 2 or self.K % 2:
            raise ValueError("K must be even and at least 2")
        if isinstance(self.alpha, str):
            if self.alpha != "auto":
                raise ValueError("alpha must be 'auto', a number or a list of numbers")
        else:
            values = self.alpha if isinstance(self.alpha, list) else [self.alpha]
            if not values or any(not 0.0 < float(a) < 1.0 for a in values):
                raise ValueError("alpha entries must lie in (0, 1)")
        if self.prior_method not in ("auto", "closed", "montecarlo"):
            raise ValueError("prior_method must be auto, closed or montecarlo")
        if not 0.0 < self.pi0 < 1.0:
            raise ValueError("pi0 must lie in (0, 1)")

    def alpha_values(self):
        if isinstance(self.alpha, str):
            return ["auto"]
        return [float(a) for a in (self.alpha if isinstance(self.alpha, list) else [self.alpha])]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """Build from JSON-like data; unknown keys and ill-typed values raise ``ValueError``."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        clean = {}
        for key, value in data.items():
            try:
                clean[key] = _COERCE[key](value)
            except (TypeError, ValueError) as exc:
                raise ValueError(f"bad value for {key}: {value!r} ({exc})") from None
        return cls(**clean)


def _as_list(item_type):
    def convert(value):
        if isinstance(value, (list, tuple)):
            return [item_type(v) for v in value]
        return [item_type(value)]

    return convert


def _as_int(value):
    if isinstance(value, bool) or float(value) != int(value):
        raise ValueError("expected an integer")
    return int(value)


def _as_bool(value):
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "false"):
        return value.lower() == "true"
    raise ValueError("expected true or false")


def _as_alpha(value):
    if isinstance(value, str):
        if value == "auto":
            return value
        return float(value)
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return float(value)


def _optional(convert):
    return lambda value: None if value is None else convert(value)


_COERCE = {
    "schemes": _as_list(str),
    "rule": str,
    "snr_c_db": _as_list(float),
    "snr_h_db": _as_list(float),
    "rho": _as_list(float),
    "pi0": float,
    "K": _as_int,
    "alpha": _as_alpha,
    "alpha_grid": _as_list(float),
    "sweep_trials": _as_int,
    "trials": _as_int,
    "master_seed": _as_int,
    "prior_method": str,
    "prior_samples": _as_int,
    "bounds": _as_bool,
    "output": _optional(str),
    "workers": _optional(_as_int),
}


def _prior_method(config: ExperimentConfig, scheme: SchemeKind, rho: float):
    if config.prior_method == "closed":
        return ClosedForm()
    if config.prior_method == "montecarlo":
        return MonteCarlo(config.prior_samples, seed=config.master_seed)
    return None


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        # shortest string that round-trips exactly
        return repr(float(value))
    return str(value)


def _analytic_columns(scheme, sensing, net, prior):
    """Bound and floor where they are defined (identical, uncorrelated sensors)."""
    from . import analysis

    if sensing.rho != 0.0 or not sensing.is_homogeneous:
        return None, None
    op = analysis.HomogeneousOperatingPoint.from_models(sensing, net)
    floor = analysis.error_floor(op.Pd, op.Pf, op.pi0, op.K)
    try:
        bound = analysis.bound_for(scheme, op).Pe_bar
    except analysis.BoundTooLarge:
        bound = None
    return bound, floor


def run_experiment(config: ExperimentConfig, stream=None) -> List[dict]:
    """Evaluate every grid cell and write the CSV to ``config.output`` (or ``stream``)."""
    config.validate()
    cache = PriorCache()
    rows = []
    cells = itertools.product(config.schemes, config.snr_c_db, config.snr_h_db, config.rho, config.alpha_values())
    for cell_index, (name, snr_c, snr_h, rho, alpha) in enumerate(cells):
        started = time.perf_counter()
        scheme = SchemeKind.parse(name)
        sensing = SensingModel.homogeneous(config.K, snr_c, config.pi0, rho)
        net = NetworkConfig.homogeneous(config.K, snr_h)
        method = _prior_method(config, scheme, rho)
        if scheme.uses_alpha:
            if alpha == "auto":
                _, alpha = sweep_alpha(scheme, config.rule, sensing, net, config.alpha_grid,
                                       config.sweep_trials, config.master_seed,
                                       cell_index=cell_index, workers=config.workers, cache=cache)
            net = net.with_alpha(alpha)
        else:
            alpha = None
        prior = cache.get(scheme, sensing, net, method) if config.rule == "lrt" else None
        est = estimate_pe(scheme, config.rule, sensing, net, config.trials, config.master_seed,
                          cell_index=cell_index, prior=prior, workers=config.workers)
        bound = floor = None
        if config.bounds:
            bound, floor = _analytic_columns(scheme, sensing, net, prior)
        logger.info("%s snr_c=%g snr_h=%g rho=%g: pe=%.4g (%.1f s)", scheme.value, snr_c, snr_h, rho,
                    est.pe_hat, time.perf_counter() - started)
        rows.append({
            "scheme": scheme.value, "rule": config.rule, "K": config.K, "rho": float(rho),
            "pi0": float(config.pi0), "snr_c_db": float(snr_c), "snr_h_db": float(snr_h),
            "alpha": alpha, "trials": est.trials, "pe_hat": est.pe_hat, "stderr": est.stderr,
            "pe_bound": bound, "error_floor": floor, "seed": config.master_seed,
        })
    text = rows_to_csv(rows)
    if config.output:
        with open(config.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    elif stream is not None:
        stream.write(text)
    return rows


def rows_to_csv(rows: List[dict], columns: Sequence[str] = CSV_COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()
