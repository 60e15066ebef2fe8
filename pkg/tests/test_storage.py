import json

import numpy as np
import pytest

from hocroute.calibrator import calibrate, estimate_decomposition
from hocroute.core import InvalidInputError
from hocroute.evaluation import cost_sweep, multi_loss_report
from hocroute.losses import LossSpec
from hocroute.partition import assign_many, fit
from hocroute.storage import (
    header_path,
    ingest,
    load_model,
    parse_query,
    read_header,
    read_scores_csv,
    save_model,
    sha256_file,
    write_curves_csv,
    write_dataset,
    write_manifest,
    write_sweep_csv,
)
brier = LossSpec("brier")


@pytest.fixture(scope="module")
def dataset(tmp_path_factory, small_run):
    path = tmp_path_factory.mktemp("data") / "cal.jsonl"
    write_dataset(path, small_run.calibration[:500])
    return path


class TestDatasetRoundTrip:
    def test_snapshot_means_bit_exact(self, dataset, small_run):
        loaded = ingest(dataset)
        for orig, back in zip(small_run.calibration[:500], loaded):
            assert orig.id == back.id
            np.testing.assert_array_equal(orig.snapshot_mean.probs, back.snapshot_mean.probs)
            np.testing.assert_array_equal(orig.weak_pred.probs, back.weak_pred.probs)
            np.testing.assert_array_equal(orig.labels, back.labels)

    def test_exact_conditional_survives(self, tmp_path, small_run):
        path = tmp_path / "test.jsonl"
        write_dataset(path, small_run.test[:50])
        loaded = ingest(path)
        for orig, back in zip(small_run.test[:50], loaded):
            np.testing.assert_array_equal(orig.p_star.probs, back.p_star.probs)

    def test_header_sidecar(self, dataset):
        header = read_header(dataset)
        assert header["num_classes"] == 2
        assert header_path(dataset).name == "cal.jsonl.header.json"


class TestIngestValidation:
    def write_lines(self, tmp_path, lines, num_classes=2):
        path = tmp_path / "bad.jsonl"
        header_path(path).write_text(
            json.dumps({"format": "snapshot-dataset", "version": 1, "num_classes": num_classes})
        )
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_small_probability_drift_renormalized(self, tmp_path):
        path = self.write_lines(
            tmp_path, [json.dumps({"id": "a", "weak_probs": [0.5, 0.5000005], "labels": [0]})]
        )
        (example,) = ingest(path)
        assert example.weak_pred.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_bad_probability_mass_rejected_with_line(self, tmp_path):
        path = self.write_lines(
            tmp_path,
            [
                json.dumps({"id": "a", "weak_probs": [0.5, 0.5], "labels": [0]}),
                json.dumps({"id": "b", "weak_probs": [0.5, 0.4], "labels": [0]}),
            ],
        )
        with pytest.raises(InvalidInputError, match="line 2.*weak_probs"):
            ingest(path)

    def test_labels_validated(self, tmp_path):
        path = self.write_lines(
            tmp_path, [json.dumps({"id": "a", "weak_probs": [0.5, 0.5], "labels": []})]
        )
        with pytest.raises(InvalidInputError, match="line 1.*labels"):
            ingest(path)
        path = self.write_lines(
            tmp_path, [json.dumps({"id": "a", "weak_probs": [0.5, 0.5], "labels": [2]})]
        )
        with pytest.raises(InvalidInputError, match="labels"):
            ingest(path)

    def test_malformed_json_names_line(self, tmp_path):
        path = self.write_lines(tmp_path, ["{not json"])
        with pytest.raises(InvalidInputError, match="line 1"):
            ingest(path)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "orphan.jsonl"
        path.write_text(json.dumps({"id": "a", "weak_probs": [0.5, 0.5], "labels": [0]}) + "\n")
        with pytest.raises(InvalidInputError, match="header"):
            ingest(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidInputError, match="does not exist"):
            ingest(tmp_path / "nope.jsonl")


class TestQueryParsing:
    def test_labels_optional_at_routing_time(self):
        query = parse_query(json.dumps({"id": "q1", "weak_probs": [0.7, 0.3]}), 2, 1)
        assert query.id == "q1" and query.features is None

    def test_query_validation(self):
        with pytest.raises(InvalidInputError, match="weak_probs"):
            parse_query(json.dumps({"id": "q1", "weak_probs": [0.7, 0.2]}), 2, 3)


class TestModelFile:
    def test_bit_exact_round_trip(self, tmp_path, small_run):
        data = small_run.calibration[:800]
        model = calibrate(fit("topclass", data, buckets=7), data, recalibrate=True)
        first = tmp_path / "model.json"
        second = tmp_path / "model2.json"
        save_model(first, model)
        loaded = load_model(first)
        save_model(second, loaded)
        assert first.read_bytes() == second.read_bytes()
        for b in model.mixtures:
            np.testing.assert_array_equal(model.mixtures[b].means, loaded.mixtures[b].means)
            np.testing.assert_array_equal(model.mixtures[b].preds, loaded.mixtures[b].preds)
        np.testing.assert_array_equal(model.global_mixture.means, loaded.global_mixture.means)
        for b in model.centroids:
            np.testing.assert_array_equal(model.centroids[b].probs, loaded.centroids[b].probs)
        sample = small_run.test[:100]
        assert assign_many(model.partition, sample) == assign_many(loaded.partition, sample)
        assert estimate_decomposition(model, "c0:b0", brier) == estimate_decomposition(loaded, "c0:b0", brier)

    def test_version_guard(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"format": "hoc-router-model", "version": 99}))
        with pytest.raises(InvalidInputError, match="version"):
            load_model(path)
        path.write_text(json.dumps({"format": "something-else"}))
        with pytest.raises(InvalidInputError, match="not a"):
            load_model(path)


class TestReports:
    def test_curves_csv_deterministic(self, tmp_path, small_run):
        data = small_run.calibration
        model = calibrate(fit("topclass", data, buckets=10), data, recalibrate=True)
        test = small_run.test[:500]
        report = multi_loss_report(model, test, [brier], random_seed=1)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_curves_csv(a, report["brier"])
        write_curves_csv(b, multi_loss_report(model, test, [brier], random_seed=1)["brier"])
        assert a.read_bytes() == b.read_bytes()
        rows = a.read_text().splitlines()
        assert rows[0] == "policy,loss,fraction,mean_loss"
        assert len(rows) == 1 + 101 * len(report["brier"])

    def test_sweep_csv(self, tmp_path, small_run):
        data = small_run.calibration
        model = calibrate(fit("topclass", data, buckets=10), data, recalibrate=True)
        sweep = cost_sweep(model, small_run.test[:500], brier, alpha=0.05, betas=[0.2, 0.4])
        path = tmp_path / "sweep.csv"
        write_sweep_csv(path, sweep)
        rows = path.read_text().splitlines()
        assert rows[0] == "alpha,beta,policy,mean_cost"
        assert len(rows) == 1 + 2 * 3

    def test_scores_csv(self, tmp_path):
        path = tmp_path / "scores.csv"
        path.write_text("id,score\na,0.5\nb,1.5\n")
        assert read_scores_csv(path) == {"a": 0.5, "b": 1.5}
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        with pytest.raises(InvalidInputError):
            read_scores_csv(empty)

    def test_manifest_hashes_inputs(self, tmp_path):
        data = tmp_path / "in.txt"
        data.write_text("hello")
        manifest_path = tmp_path / "m.json"
        manifest = write_manifest(manifest_path, command="demo", args={"x": 1}, inputs=[data], seed=7)
        assert manifest["inputs"][str(data)] == sha256_file(data)
        on_disk = json.loads(manifest_path.read_text())
        assert on_disk["seed"] == 7 and on_disk["command"] == "demo"
