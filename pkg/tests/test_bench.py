"""Benchmark harness: configuration, calibration, trial records, persistence."""

import csv
import dataclasses
import json

import numpy as np
import pytest

from gridshield.bench import (
    ExperimentSpec,
    Thresholds,
    _check_thresholds,
    calibrate_thresholds,
    emit_results,
    f_score,
    load_results,
    run_experiment,
)
from gridshield import build_topology, ieee30
from gridshield.attack_model import ConfigurationError


class TestFScore:
    def test_both_empty_is_perfect(self):
        assert f_score((), ()) == 1.0

    def test_exact_match(self):
        assert f_score((3, 7), (7, 3)) == 1.0

    def test_disjoint_is_zero(self):
        assert f_score((1, 2), (3, 4)) == 0.0

    def test_partial_overlap(self):
        # tp=1, fp=1, fn=1 gives 2/(2+1+1)
        assert f_score((1, 2), (2, 3)) == pytest.approx(0.5)

    def test_missed_detection(self):
        assert f_score((1, 2), ()) == 0.0

    def test_superset_selection(self):
        assert f_score((1,), (1, 2, 3)) == pytest.approx(0.5)


class TestExperimentSpec:
    def test_scalars_promote_to_tuples(self):
        spec = ExperimentSpec(methods="gic", k_a=3, attack_norm=1.0, sigma_s2=0.1)
        assert spec.methods == ("gic",)
        assert spec.k_a == (3,)
        assert spec.attack_norm == (1.0,)
        assert spec.sigma_s2 == (0.1,)

    def test_unknown_method_rejected(self):
        with pytest.raises(ConfigurationError, match="unknown methods"):
            ExperimentSpec(methods=("gic", "magic"))

    def test_no_methods_rejected(self):
        with pytest.raises(ConfigurationError, match="at least one method"):
            ExperimentSpec(methods=())

    def test_both_norm_fields_rejected(self):
        with pytest.raises(ConfigurationError, match="exactly one"):
            ExperimentSpec(attack_norm=(1.0,), attack_norm_per_node=(0.1,))

    def test_neither_norm_field_rejected(self):
        with pytest.raises(ConfigurationError, match="exactly one"):
            ExperimentSpec(attack_norm=None, attack_norm_per_node=None)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"attack_norm": (0.0,)},
            {"attack_norm": (-1.0,)},
            {"k_a": (0,)},
            {"sigma_s2": (-0.1,)},
            {"sigma_e2": 0.0},
            {"n_trials": 0},
            {"n_null": 0},
            {"alpha": 0.0},
            {"alpha": 1.0},
            {"k_c": 0},
            {"zeta": -0.5},
            {"ground": "everything"},
            {"rho_method": "holm"},
            {"threads": 0},
        ],
    )
    def test_invalid_settings_rejected(self, kwargs):
        with pytest.raises(ConfigurationError):
            ExperimentSpec(**kwargs)

    def test_grid_points_fixed_norm(self):
        spec = ExperimentSpec(k_a=(2, 4), attack_norm=(1.0, 2.0), sigma_s2=(0.1,))
        points = spec.grid_points()
        assert points == (
            (2, 1.0, 0.1),
            (2, 2.0, 0.1),
            (4, 1.0, 0.1),
            (4, 2.0, 0.1),
        )

    def test_grid_points_per_node_norm_scales(self):
        spec = ExperimentSpec(
            k_a=(2, 4), attack_norm=None, attack_norm_per_node=(0.3,)
        )
        assert spec.grid_points() == ((2, 0.6, 0.05), (4, 1.2, 0.05))

    def test_from_mapping_round_trip(self):
        doc = {
            "methods": ["gic", "omp"],
            "k_a": [2, 3],
            "attack_norm": [1.5],
            "sigma_s2": [0.05],
            "n_trials": 10,
            "seed": 9,
        }
        spec = ExperimentSpec.from_mapping(doc)
        assert spec.methods == ("gic", "omp")
        assert spec.k_a == (2, 3)
        assert spec.seed == 9

    def test_from_mapping_per_node_drops_default_norm(self):
        spec = ExperimentSpec.from_mapping({"attack_norm_per_node": [0.2]})
        assert spec.attack_norm is None
        assert spec.attack_norm_per_node == (0.2,)

    def test_from_mapping_unknown_key_rejected(self):
        with pytest.raises(ConfigurationError, match="attack_size"):
            ExperimentSpec.from_mapping({"attack_size": 4})

    def test_from_file_toml(self, tmp_path):
        path = tmp_path / "exp.toml"
        path.write_text(
            'methods = ["omp"]\nk_a = [2]\nattack_norm = [1.0]\n'
            "n_trials = 5\nseed = 3\n",
            encoding="utf-8",
        )
        spec = ExperimentSpec.from_file(path)
        assert spec.methods == ("omp",)
        assert spec.n_trials == 5

    def test_from_file_json(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text(json.dumps({"methods": ["bdd"], "seed": 2}), encoding="utf-8")
        spec = ExperimentSpec.from_file(path)
        assert spec.methods == ("bdd",)
        assert spec.seed == 2

    def test_from_file_non_table_root_rejected(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text("[1, 2, 3]", encoding="utf-8")
        with pytest.raises(ConfigurationError, match="table"):
            ExperimentSpec.from_file(path)


def _handmade_thresholds(**overrides) -> Thresholds:
    base = dict(
        gamma_bdd=1.0,
        gamma_eng=2.0,
        gamma_gic=3.0,
        gamma_omp=4.0,
        gamma_oracle=5.0,
        rho=0.5,
        alpha=0.05,
        n_null=100,
        seed=0,
        sigma_e2=0.01,
        sigma_s2=0.05,
        zeta=2.0,
        k_c=6,
        ground="restricted",
        rho_method="family-max",
    )
    base.update(overrides)
    return Thresholds(**base)


class TestThresholds:
    def test_file_round_trip_is_exact(self, tmp_path):
        th = _handmade_thresholds(gamma_gic=6.0360104372815, rho=0.06531772)
        path = tmp_path / "thresholds.json"
        th.to_file(path)
        assert Thresholds.from_file(path) == th

    def test_unknown_key_rejected(self):
        doc = json.loads(_handmade_thresholds().to_json())
        doc["gamma_extra"] = 1.0
        with pytest.raises(ConfigurationError, match="unknown threshold keys"):
            Thresholds.from_json(json.dumps(doc))

    def test_missing_key_rejected(self):
        doc = json.loads(_handmade_thresholds().to_json())
        del doc["rho"]
        with pytest.raises(ConfigurationError, match="missing threshold keys"):
            Thresholds.from_json(json.dumps(doc))

    def test_non_object_document_rejected(self):
        with pytest.raises(ConfigurationError, match="object"):
            Thresholds.from_json("[]")

    def test_check_rejects_mismatched_noise(self):
        spec = ExperimentSpec(sigma_e2=0.02)
        with pytest.raises(ConfigurationError, match="sigma_e2"):
            _check_thresholds(spec, _handmade_thresholds())

    def test_check_rejects_mismatched_penalty(self):
        spec = ExperimentSpec(zeta=3.0)
        with pytest.raises(ConfigurationError, match="zeta"):
            _check_thresholds(spec, _handmade_thresholds())

    def test_check_allows_different_load_variance(self):
        # load variance is a scenario axis, not part of the statistic
        spec = ExperimentSpec(sigma_s2=(1.0,))
        _check_thresholds(spec, _handmade_thresholds())


SMALL_SPEC = ExperimentSpec(
    methods=("gic", "omp", "gmgic", "oracle-gic", "eng", "bdd"),
    k_a=(2,),
    attack_norm=(1.0,),
    sigma_s2=(0.05,),
    n_trials=200,
    n_null=400,
    seed=123,
)


@pytest.fixture(scope="module")
def small_table():
    return run_experiment(SMALL_SPEC)


class TestRunExperiment:
    def test_record_count_and_labels(self, small_table):
        spec = small_table.spec
        assert len(small_table.records) == len(spec.methods) * spec.n_trials
        assert {r.method for r in small_table.records} == set(spec.methods)
        for r in small_table.records:
            assert r.k_a == 2
            assert len(r.true_support) == 2
            assert r.runtime_ns > 0
            assert r.eta >= 0.0

    def test_false_alarm_rates_match_nominal_level(self, small_table):
        # every threshold is an empirical null quantile at the same alpha
        spec = small_table.spec
        sigma3 = 3.0 * np.sqrt(spec.alpha * (1 - spec.alpha) / spec.n_trials)
        for method in spec.methods:
            recs = [r for r in small_table.records if r.method == method]
            rate = np.mean([r.false_alarm for r in recs])
            assert abs(rate - spec.alpha) <= sigma3, (method, rate)

    def test_bdd_is_blind_to_the_attack(self, small_table):
        recs = [r for r in small_table.records if r.method == "bdd"]
        diffs = [abs(r.statistic_attacked - r.statistic_null) for r in recs]
        assert max(diffs) < 1e-8
        det = np.mean([r.detected for r in recs])
        fa = np.mean([r.false_alarm for r in recs])
        assert det == pytest.approx(fa, abs=0.01)

    def test_selectors_beat_chance(self, small_table):
        for method in ("gic", "omp", "gmgic", "oracle-gic"):
            recs = [r for r in small_table.records if r.method == method]
            assert np.mean([r.f_score for r in recs]) > 0.5, method

    def test_correction_reduces_state_error(self, small_table):
        recs = [r for r in small_table.records if r.method == "oracle-gic"]
        mse_c = np.mean([r.mse_corrected for r in recs])
        mse_p = np.mean([r.mse_plain for r in recs])
        assert mse_c < mse_p

    def test_roc_starts_at_accept_all_and_is_monotone(self, small_table):
        for method in ("gic", "bdd"):
            fa, det = small_table.roc(method)
            assert fa[0] == 1.0 and det[0] == 1.0
            assert np.all(np.diff(fa) <= 0)
            assert np.all(np.diff(det) <= 0)

    def test_roc_bdd_hugs_the_diagonal(self, small_table):
        # an unobservable attack gives the residual test no operating gain
        fa, det = small_table.roc("bdd")
        assert np.max(np.abs(det - fa)) <= 0.02

    def test_roc_slice_filters(self, small_table):
        fa, det = small_table.roc("gic", k_a=2, attack_norm=1.0, sigma_s2=0.05)
        assert fa.shape == det.shape
        with pytest.raises(ValueError, match="no records"):
            small_table.roc("gic", k_a=9)

    def test_aggregate_rows(self, small_table):
        rows = small_table.aggregates()
        assert len(rows) == len(small_table.spec.methods)
        assert [row["method"] for row in rows] == sorted(small_table.spec.methods)
        for row in rows:
            assert row["n_trials"] == small_table.spec.n_trials
            assert 0.0 <= row["detection_rate"] <= 1.0
            assert 0.0 <= row["false_alarm_rate"] <= 1.0
            assert 0.0 <= row["f_score_mean"] <= 1.0
            assert row["runtime_ns_median"] > 0


class TestDeterminism:
    SPEC = ExperimentSpec(
        methods=("gic", "omp"),
        k_a=(2,),
        attack_norm=(1.0,),
        sigma_s2=(0.05,),
        n_trials=12,
        n_null=60,
        seed=7,
    )

    @staticmethod
    def _strip_runtime(records):
        return [
            {k: v for k, v in dataclasses.asdict(r).items() if k != "runtime_ns"}
            for r in records
        ]

    def test_repeat_runs_agree(self):
        a = run_experiment(self.SPEC)
        b = run_experiment(self.SPEC)
        assert a.thresholds == b.thresholds
        assert self._strip_runtime(a.records) == self._strip_runtime(b.records)

    def test_thread_count_does_not_change_results(self):
        serial = run_experiment(self.SPEC)
        threaded = run_experiment(dataclasses.replace(self.SPEC, threads=3))
        assert serial.thresholds == threaded.thresholds
        assert self._strip_runtime(serial.records) == self._strip_runtime(
            threaded.records
        )

    def test_explicit_thresholds_skip_calibration(self):
        network = ieee30()
        topology = build_topology(network)
        th = calibrate_thresholds(network, topology, self.SPEC)
        direct = run_experiment(self.SPEC, thresholds=th)
        assert direct.thresholds == th


class TestPersistence:
    def test_emit_and_load_round_trip(self, small_table, tmp_path):
        paths = emit_results(small_table, tmp_path / "out")
        assert paths["aggregates"].name == "aggregates.csv"
        assert paths["results"].name == "results.json"
        loaded = load_results(paths["results"])
        assert loaded.spec == small_table.spec
        assert loaded.thresholds == small_table.thresholds
        assert loaded.records == small_table.records

    def test_results_manifest_carries_settings(self, small_table, tmp_path):
        paths = emit_results(small_table, tmp_path / "out")
        doc = json.loads(paths["results"].read_text(encoding="utf-8"))
        assert doc["spec"]["seed"] == small_table.spec.seed
        assert doc["thresholds"]["alpha"] == small_table.spec.alpha
        assert "version" in doc

    def test_aggregates_csv_matches_table(self, small_table, tmp_path):
        paths = emit_results(small_table, tmp_path / "out")
        with open(paths["aggregates"], newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        expected = small_table.aggregates()
        assert len(rows) == len(expected)
        for got, want in zip(rows, expected):
            assert got["method"] == want["method"]
            assert float(got["detection_rate"]) == pytest.approx(
                want["detection_rate"]
            )
            assert float(got["f_score_mean"]) == pytest.approx(want["f_score_mean"])
