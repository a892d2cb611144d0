"""Command-line front end.

Every subcommand resolves one :class:`~decifuse.harness.ExperimentConfig`
from defaults, an optional JSON file, ``--set key=value`` overrides and the
explicit flags (in that order). Payloads go to standard output; errors go to
standard error prefixed with ``error:``. Exit status is 0 on success, 1 on a
computational failure and 2 on a usage or configuration problem.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from typing import List, Optional

from . import __version__, analysis, harness
from .channel import NetworkConfig
from .harness import ExperimentConfig
from .schemes import SchemeKind
from .sensing import SensingModel, detection_probs

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# parsed flag attribute -> config key
_FLAG_KEYS = {
    "schemes": "schemes",
    "rule": "rule",
    "snr_c": "snr_c_db",
    "snr_h": "snr_h_db",
    "rho": "rho",
    "pi0": "pi0",
    "K": "K",
    "alpha": "alpha",
    "alpha_grid": "alpha_grid",
    "trials": "trials",
    "sweep_trials": "sweep_trials",
    "seed": "master_seed",
    "workers": "workers",
    "output": "output",
}


def _split_list(text: str):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    values = []
    for p in parts:
        try:
            values.append(json.loads(p))
        except json.JSONDecodeError:
            values.append(p)
    return values if len(values) != 1 else values[0]


def _parse_override(item: str):
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise UsageError(f"override {item!r} is not of the form key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = _split_list(raw) if "," in raw else raw
    return key.strip(), value


def _common(sub: argparse.ArgumentParser, grid: bool = True) -> None:
    sub.add_argument("--config", help="JSON file with ExperimentConfig keys")
    sub.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                     help="override one config key (repeatable)")
    sub.add_argument("--dump-config", action="store_true", help="print the resolved config as JSON and exit")
    sub.add_argument("--output", "-o", help="write the payload to this file instead of standard output")
    sub.add_argument("--snr-c", dest="snr_c", help="sensing SNR in dB (comma list for grids)")
    sub.add_argument("--snr-h", dest="snr_h", help="sensor-to-FC SNR in dB (comma list for grids)")
    sub.add_argument("--pi0", help="prior probability of H0")
    sub.add_argument("--K", help="number of sensors (even)")
    sub.add_argument("--alpha", help="power fraction for the FC link, a comma list or 'auto'")
    if grid:
        sub.add_argument("--schemes", "--scheme", dest="schemes", help="comma list of schemes")
        sub.add_argument("--rule", help="fusion rule: lrt or majority")
        sub.add_argument("--rho", help="sensing noise correlation (comma list for grids)")
        sub.add_argument("--trials", help="Monte Carlo trials per cell")
        sub.add_argument("--sweep-trials", dest="sweep_trials", help="trials per alpha grid point")
        sub.add_argument("--alpha-grid", dest="alpha_grid", help="comma list of alpha values to sweep")
        sub.add_argument("--seed", help="master seed")
        sub.add_argument("--workers", help="worker processes (0 = all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="decifuse", description="Distributed detection over fading channels.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    subs = parser.add_subparsers(dest="command", parser_class=_Parser)
    subs.required = True
    _common(subs.add_parser("simulate", help="Monte Carlo error probability over a grid of operating points"))
    _common(subs.add_parser("sweep-alpha", help="error probability across power splits"))
    sub = subs.add_parser("bound", help="analytical upper bound at a homogeneous operating point")
    _common(sub)
    sub = subs.add_parser("floor", help="error floor with error-free channels")
    _common(sub, grid=False)
    sub = subs.add_parser("asymptotics", help="large-network exponent terms")
    _common(sub)
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    _common(subs.add_parser("compare", help="Monte Carlo next to the bound, flagging violations"))
    return parser


def resolve_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
    for item in args.overrides:
        key, value = _parse_override(item)
        data[key] = value
    for flag, key in _FLAG_KEYS.items():
        raw = getattr(args, flag, None)
        if raw is not None:
            data[key] = _split_list(raw)
    try:
        return ExperimentConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _emit(text: str, path: Optional[str], stdout) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([harness._fmt(v) for v in row])
    return buf.getvalue()


def _points(config: ExperimentConfig):
    for snr_c in config.snr_c_db:
        for snr_h in config.snr_h_db:
            yield float(snr_c), float(snr_h)


def _single_alpha(config: ExperimentConfig) -> float:
    values = config.alpha_values()
    if values == ["auto"]:
        return 0.5
    if len(values) != 1:
        raise UsageError("this subcommand takes a single alpha value")
    return values[0]


def _operating_point(config, snr_c, snr_h, alpha):
    sensing = SensingModel.homogeneous(config.K, snr_c, config.pi0, 0.0)
    net = NetworkConfig.homogeneous(config.K, snr_h, alpha=alpha)
    return analysis.HomogeneousOperatingPoint.from_models(sensing, net)


def cmd_simulate(config, args, stdout):
    rows = harness.run_experiment(config)
    if not config.output:
        stdout.write(harness.rows_to_csv(rows))


def cmd_sweep_alpha(config, args, stdout):
    header = ("scheme", "rule", "K", "rho", "pi0", "snr_c_db", "snr_h_db", "alpha",
              "trials", "pe_hat", "stderr", "is_best")
    rows = []
    cell = 0
    for name in config.schemes:
        scheme = SchemeKind.parse(name)
        for snr_c, snr_h in _points(config):
            for rho in config.rho:
                sensing = SensingModel.homogeneous(config.K, snr_c, config.pi0, rho)
                net = NetworkConfig.homogeneous(config.K, snr_h)
                table, best = harness.sweep_alpha(scheme, config.rule, sensing, net, config.alpha_grid,
                                                  config.sweep_trials, config.master_seed,
                                                  cell_index=cell, workers=config.workers)
                cell += 1
                for alpha, est in table:
                    rows.append((scheme.value, config.rule, config.K, float(rho), config.pi0, snr_c, snr_h,
                                 alpha, est.trials, est.pe_hat, est.stderr, int(alpha == best)))
    _emit(_csv(header, rows), config.output, stdout)


def _bound_rows(config):
    alpha = _single_alpha(config)
    for snr_c, snr_h in _points(config):
        op = _operating_point(config, snr_c, snr_h, alpha)
        for name in config.schemes:
            scheme = SchemeKind.parse(name)
            res = analysis.bound_for(scheme, op)
            yield (scheme.value, config.K, config.pi0, snr_c, snr_h,
                   alpha if scheme.uses_alpha else None,
                   res.Pe11, res.Pe12, res.Pe21, res.Pe22, res.Pe_bar, res.t_star)


def cmd_bound(config, args, stdout):
    header = ("scheme", "K", "pi0", "snr_c_db", "snr_h_db", "alpha",
              "Pe11", "Pe12", "Pe21", "Pe22", "pe_bound", "t_star")
    _emit(_csv(header, list(_bound_rows(config))), config.output, stdout)


def cmd_floor(config, args, stdout):
    header = ("K", "pi0", "snr_c_db", "Pd", "Pf", "M", "error_floor")
    rows = []
    for snr_c in config.snr_c_db:
        sensing = SensingModel.homogeneous(config.K, float(snr_c), config.pi0, 0.0)
        pd, pf = detection_probs(sensing.sigma[0], sensing.tau[0])
        M = analysis.find_M(pd, pf, config.pi0, config.K)
        rows.append((config.K, config.pi0, float(snr_c), float(pd), float(pf), M,
                     analysis.error_floor(pd, pf, config.pi0, config.K)))
    _emit(_csv(header, rows), config.output, stdout)


def cmd_asymptotics(config, args, stdout):
    alpha = _single_alpha(config)
    reports = []
    for snr_c, snr_h in _points(config):
        op = _operating_point(config, snr_c, snr_h, alpha)
        point = [analysis.asymptotic_terms(name, op) for name in config.schemes]
        reports.append({
            "snr_c_db": snr_c, "snr_h_db": snr_h, "pi0": config.pi0, "K": config.K, "alpha": alpha,
            "schemes": [r.to_dict() for r in point],
            "gamma_differences": analysis.exponent_differences(point),
        })
    if args.format == "json":
        text = json.dumps(reports, indent=2) + "\n"
    else:
        header = ("snr_c_db", "snr_h_db", "scheme", "term", "mu", "sigma2", "kappa", "rate", "gamma_x", "t0")
        rows = []
        for rep in reports:
            for sch in rep["schemes"]:
                for term, vals in sch["terms"].items():
                    rows.append((rep["snr_c_db"], rep["snr_h_db"], sch["scheme"], term, vals["mu"],
                                 vals["sigma2"], vals["kappa"], sch["rates"][term], sch["gamma_x"], sch["t0"]))
        text = _csv(header, rows)
    _emit(text, config.output, stdout)


def cmd_compare(config, args, stdout):
    output = config.output
    config.output = None
    config.bounds = True
    rows = harness.run_experiment(config)
    columns = harness.CSV_COLUMNS + ("bound_violation",)
    for row in rows:
        bound = row.get("pe_bound")
        if bound is None:
            row["bound_violation"] = None
        else:
            row["bound_violation"] = int(bound < row["pe_hat"] - 3 * row["stderr"])
    _emit(harness.rows_to_csv(rows, columns), output, stdout)


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep-alpha": cmd_sweep_alpha,
    "bound": cmd_bound,
    "floor": cmd_floor,
    "asymptotics": cmd_asymptotics,
    "compare": cmd_compare,
}


def main(argv: Optional[List[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(message)s", stream=stderr)
        config = resolve_config(args)
        if args.dump_config:
            stdout.write(json.dumps(config.to_dict(), indent=2) + "\n")
            return EXIT_OK
        COMMANDS[args.command](config, args, stdout)
    except UsageError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_USAGE
    except (analysis.BoundTooLarge, analysis.DegenerateOperatingPoint, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_COMPUTE
    except ValueError as exc:
        # invalid operating points are reported only once the models are built
        print(f"error: {exc}", file=stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_COMPUTE
    return EXIT_OK


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
