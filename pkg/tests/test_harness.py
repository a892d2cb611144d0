import io

import numpy as np
import pytest

from decifuse.analysis import error_floor
from decifuse.channel import NetworkConfig, draw_complex_gaussian
from decifuse.harness import (
    CSV_COLUMNS,
    ErrorEstimate,
    ExperimentConfig,
    block_rng,
    estimate_pe,
    rows_to_csv,
    run_experiment,
    sweep_alpha,
)
from decifuse.sensing import SensingModel, detection_probs
from oracles import local_probs, parallel_pair_conditional_error


def small_config(**overrides):
    base = dict(schemes=["parallel"], snr_c_db=[6.0], snr_h_db=[10.0], K=4, alpha=0.6,
                trials=20_000, master_seed=3)
    base.update(overrides)
    return ExperimentConfig(**base)


class TestEstimatePe:
    def test_noiseless_is_error_free(self):
        sensing = SensingModel.homogeneous(4, 300.0, 0.6)
        base = NetworkConfig.homogeneous(4, 10.0)
        net = NetworkConfig(P=base.P, G=base.G, epsilon=base.epsilon, d=base.d, d0=base.d0,
                            sigma_v2=base.sigma_v2 * 1e-14, sigma_eta2=base.sigma_eta2 * 1e-14, alpha=0.5)
        for scheme in ("parallel", "stc", "fusion"):
            assert estimate_pe(scheme, "lrt", sensing, net, 20_000, 1).errors_h0 == 0
            assert estimate_pe(scheme, "lrt", sensing, net, 20_000, 1).pe_hat == 0.0

    def test_two_sensor_parallel_matches_semi_analytic(self):
        snr_c, snr_h, pi0 = 6.0, 5.0, 0.6
        sensing = SensingModel.homogeneous(2, snr_c, pi0)
        net = NetworkConfig.homogeneous(2, snr_h)
        Pd, Pf, _, _ = local_probs(snr_c, pi0)
        h = draw_complex_gaussian(np.tile(net.sigma_h2, (10_000, 1)), np.random.default_rng(99))
        cond = parallel_pair_conditional_error(np.abs(h) / np.sqrt(net.sigma_v2), Pd, Pf, pi0)
        oracle, oracle_se = cond.mean(), cond.std(ddof=1) / np.sqrt(len(cond))
        est = estimate_pe("parallel", "lrt", sensing, net, 1_000_000, 5)
        assert abs(est.pe_hat - oracle) < 4 * np.hypot(est.stderr, oracle_se)

    def test_error_floor_at_strong_links(self):
        sensing = SensingModel.homogeneous(10, 6.0, 0.6)
        net = NetworkConfig.homogeneous(10, 40.0)
        Pd, Pf = detection_probs(sensing.sigma[0], sensing.tau[0])
        floor = error_floor(Pd, Pf, 0.6, 10)
        est = estimate_pe("parallel", "lrt", sensing, net, 1_000_000, 2)
        assert abs(est.pe_hat - floor) <= max(3 * est.stderr, 0.05 * floor)

    def test_stderr_scaling(self):
        sensing = SensingModel.homogeneous(4, 2.0, 0.6)
        net = NetworkConfig.homogeneous(4, 5.0)
        small = estimate_pe("parallel", "majority", sensing, net, 40_000, 4)
        large = estimate_pe("parallel", "majority", sensing, net, 160_000, 4)
        assert small.stderr / large.stderr == pytest.approx(2.0, rel=0.1)

    def test_worker_count_does_not_matter(self):
        sensing = SensingModel.homogeneous(4, 6.0, 0.6)
        net = NetworkConfig.homogeneous(4, 5.0, alpha=0.6)
        one = estimate_pe("stc", "lrt", sensing, net, 100_000, 8, workers=1)
        two = estimate_pe("stc", "lrt", sensing, net, 100_000, 8, workers=2)
        assert one == two

    def test_rejects_bad_rule(self):
        with pytest.raises(ValueError):
            estimate_pe("parallel", "median", SensingModel.homogeneous(2, 6.0, 0.6),
                        NetworkConfig.homogeneous(2, 5.0), 10, 0)

    def test_streams_are_distinct(self):
        a = block_rng(1, 0, 0).random(4)
        assert not np.array_equal(a, block_rng(1, 0, 1).random(4))
        assert not np.array_equal(a, block_rng(1, 1, 0).random(4))
        assert np.array_equal(a, block_rng(1, 0, 0).random(4))

    def test_from_counts(self):
        est = ErrorEstimate.from_counts((6, 600, 4, 400), 0.6)
        assert est.pe_hat == pytest.approx(0.6 * 0.01 + 0.4 * 0.01)
        assert est.trials == 1000 and est.p_err_h1 == 0.01


class TestSweep:
    def test_flat_curve_picks_smallest(self):
        sensing = SensingModel.homogeneous(4, 6.0, 0.6)
        net = NetworkConfig.homogeneous(4, -200.0)
        table, best = sweep_alpha("stc", "lrt", sensing, net, [0.3, 0.5, 0.7], 20_000, 0)
        assert len({est.pe_hat for _, est in table}) == 1
        assert best == 0.3

    def test_rejects_parallel(self):
        with pytest.raises(ValueError):
            sweep_alpha("parallel", "lrt", SensingModel.homogeneous(2, 6.0, 0.6),
                        NetworkConfig.homogeneous(2, 5.0), [0.5], 10_000, 0)

    def test_rejects_bad_grid(self):
        with pytest.raises(ValueError):
            sweep_alpha("fusion", "lrt", SensingModel.homogeneous(2, 6.0, 0.6),
                        NetworkConfig.homogeneous(2, 5.0), [0.0, 0.5], 10_000, 0)


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown"):
            ExperimentConfig.from_dict({"schemes": ["stc"], "snr": 3})

    @pytest.mark.parametrize("data", [{"K": 3}, {"K": "ten"}, {"trials": 5}, {"alpha": "best"},
                                      {"alpha": 1.5}, {"rule": "median"}, {"schemes": []},
                                      {"bounds": "maybe"}, {"pi0": 1.0}])
    def test_invalid_values(self, data):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(data)

    def test_round_trip(self):
        config = small_config(rho=[0.0, 0.3], bounds=True)
        assert ExperimentConfig.from_dict(config.to_dict()) == config

    def test_scalars_become_lists(self):
        config = ExperimentConfig.from_dict({"snr_c_db": 2, "schemes": "fusion"})
        assert config.snr_c_db == [2.0] and config.schemes == ["fusion"]


class TestRunExperiment:
    def test_one_cell_equals_estimate(self):
        config = small_config()
        row = run_experiment(config)[0]
        est = estimate_pe("parallel", "lrt", SensingModel.homogeneous(4, 6.0, 0.6),
                          NetworkConfig.homogeneous(4, 10.0), 20_000, 3)
        assert row["pe_hat"] == est.pe_hat and row["stderr"] == est.stderr

    def test_full_grid(self, tmp_path):
        out = tmp_path / "grid.csv"
        config = small_config(schemes=["parallel", "stc", "fusion", "threshold"], snr_c_db=[2.0, 6.0, 10.0],
                              snr_h_db=[5.0, 10.0, 15.0], trials=10_000, output=str(out))
        rows = run_experiment(config)
        assert len(rows) == 36
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS) and len(lines) == 37
        for line, row in zip(lines[1:], rows):
            values = dict(zip(CSV_COLUMNS, line.split(",")))
            assert float(values["pe_hat"]) == row["pe_hat"]
            assert values["alpha"] == ("0.6" if row["scheme"] in ("stc", "fusion") else "")

    def test_bounds_columns(self):
        rows = run_experiment(small_config(schemes=["parallel", "threshold"], bounds=True))
        parallel = rows[0]
        assert parallel["error_floor"] < parallel["pe_bound"]
        assert rows[1]["pe_bound"] is not None

    def test_reruns_are_identical(self):
        first, second = io.StringIO(), io.StringIO()
        run_experiment(small_config(schemes=["stc", "fusion"]), stream=first)
        run_experiment(small_config(schemes=["stc", "fusion"]), stream=second)
        assert first.getvalue() == second.getvalue()

    def test_csv_writer_handles_missing(self):
        text = rows_to_csv([{"scheme": "parallel", "pe_hat": 0.1}])
        assert text.splitlines()[1].startswith("parallel,")
