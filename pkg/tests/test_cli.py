import json
import os

import pytest

from gridtab.cli import main
from gridtab.serialize import read_jsonl


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def synth_files(tmp_path):
    t, l, p = tmp_path / "t.jsonl", tmp_path / "l.jsonl", tmp_path / "p.jsonl"
    code = run(
        "synth", "--count", 12, "--seed", 5, "--emit", "tables,labels,predictions",
        "--tables-out", t, "--labels-out", l, "--predictions-out", p,
        "--merge-prob", 0.3, "--rotation", -10, 10, "--deterministic",
    )
    assert code == 0
    return t, l, p


class TestSynthCommand:
    def test_outputs_exist_with_manifests(self, synth_files):
        t, l, p = synth_files
        for path in (t, l, p):
            assert path.exists()
            manifest = json.loads((path.parent / (path.name + ".manifest.json")).read_text())
            assert manifest["schema"] == "run_manifest.v1"
            assert manifest["counts"] == {"read": 12, "written": 12, "errors": 0}
            assert "timestamp" not in manifest

    def test_deterministic_rerun_is_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (out1, out2):
            assert run("synth", "--count", 6, "--seed", 9, "--emit", "tables",
                       "--tables-out", out, "--deterministic") == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_missing_out_flag_is_usage_error(self, tmp_path):
        assert run("synth", "--emit", "labels", "--deterministic") == 2


class TestPipelineCommands:
    def test_labelgen_matches_synth_labels(self, synth_files, tmp_path):
        t, l, _ = synth_files
        regenerated = tmp_path / "l2.jsonl"
        assert run("labelgen", "--in", t, "--out", regenerated, "--deterministic") == 0
        assert regenerated.read_text() == l.read_text()

    def test_reconstruct_and_eval_teds_struct(self, synth_files, tmp_path):
        t, _, p = synth_files
        rec = tmp_path / "rec.jsonl"
        assert run("reconstruct", "--in", p, "--out", rec, "--deterministic") == 0
        report_path = tmp_path / "report.json"
        csv_path = tmp_path / "report.csv"
        plots = tmp_path / "plots"
        code = run(
            "eval", "teds-struct", "--pred", rec, "--gt", t,
            "--out", report_path, "--csv", csv_path, "--plots", plots, "--deterministic",
        )
        assert code == 0
        report = json.loads(report_path.read_text())
        assert report["aggregate"]["mean_score"] == 1.0
        assert report["aggregate"]["errors"] == 0
        assert csv_path.exists()
        assert (plots / "eval_teds-struct.png").exists()

    def test_reconstruct_html_flag(self, synth_files, tmp_path):
        _, _, p = synth_files
        rec = tmp_path / "rec.jsonl"
        assert run("reconstruct", "--in", p, "--out", rec, "--html", "--deterministic") == 0
        doc = next(read_jsonl(rec))
        assert doc["html"][0] == "<table>"

    def test_eval_loss(self, synth_files, tmp_path):
        _, l, p = synth_files
        out = tmp_path / "loss.json"
        assert run("eval", "loss", "--pred", p, "--gt", l, "--out", out, "--deterministic") == 0
        report = json.loads(out.read_text())
        assert report["aggregate"]["mean_total"] < 0.01  # binary-confidence predictions

    def test_eval_adjacency_and_fscore(self, synth_files, tmp_path):
        t, _, p = synth_files
        rec = tmp_path / "rec.jsonl"
        run("reconstruct", "--in", p, "--out", rec, "--deterministic")
        for mode in ("adjacency", "fscore"):
            out = tmp_path / f"{mode}.json"
            assert run("eval", mode, "--pred", rec, "--gt", t, "--out", out, "--deterministic") == 0
            report = json.loads(out.read_text())
            assert report["aggregate"]["micro_f1"] == 1.0

    def test_parallel_equals_serial(self, synth_files, tmp_path):
        _, _, p = synth_files
        serial, parallel = tmp_path / "s.jsonl", tmp_path / "par.jsonl"
        assert run("reconstruct", "--in", p, "--out", serial, "--deterministic") == 0
        assert run("reconstruct", "--in", p, "--out", parallel, "--workers", 3, "--deterministic") == 0
        assert serial.read_text() == parallel.read_text()


class TestRoundtripCommand:
    def test_reports_success_and_plots(self, tmp_path):
        out = tmp_path / "rt.json"
        csv_path = tmp_path / "rt.csv"
        plots = tmp_path / "plots"
        code = run(
            "roundtrip", "--seeds", 25, "--seed", 3, "--merge-prob", 0.4,
            "--rotation", -20, 20, "--curve-amp", 0.02,
            "--out", out, "--csv", csv_path, "--plots", plots, "--deterministic",
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["success"] == 25
        assert report["teds_struct_mean"] == 1.0
        assert csv_path.exists() and (plots / "roundtrip_teds_struct.png").exists()


class TestErrorHandling:
    def test_schema_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n")
        out = tmp_path / "out.jsonl"
        assert run("labelgen", "--in", bad, "--out", out) == 2

    def test_missing_input_file(self, tmp_path):
        assert run("labelgen", "--in", tmp_path / "absent.jsonl", "--out", tmp_path / "o.jsonl") == 2

    def test_per_document_failures_as_records(self, synth_files, tmp_path):
        t, _, _ = synth_files
        docs = list(read_jsonl(t))
        docs[1] = {"schema": "logical_table.v1", "doc_id": "broken"}  # missing fields
        mixed = tmp_path / "mixed.jsonl"
        with open(mixed, "w") as handle:
            for doc in docs:
                handle.write(json.dumps(doc) + "\n")
        out = tmp_path / "labels.jsonl"
        assert run("labelgen", "--in", mixed, "--out", out) == 0  # lenient by default
        results = list(read_jsonl(out))
        errors = [r for r in results if r.get("schema") == "error.v1"]
        assert len(errors) == 1 and errors[0]["doc_id"] == "broken"
        assert run("labelgen", "--in", mixed, "--out", out, "--strict") == 1

    def test_eval_pairing_requires_consistent_ids(self, synth_files, tmp_path):
        t, _, _ = synth_files
        docs = list(read_jsonl(t))
        del docs[0]["doc_id"]
        partial = tmp_path / "partial.jsonl"
        with open(partial, "w") as handle:
            for doc in docs:
                handle.write(json.dumps(doc) + "\n")
        assert run("eval", "teds-struct", "--pred", partial, "--gt", t) == 2


class TestConfigPrecedence:
    def test_config_file_overrides_defaults(self, synth_files, tmp_path):
        _, _, p = synth_files
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"tau1": 0.99}))
        out = tmp_path / "rec.jsonl"
        assert run("reconstruct", "--in", p, "--out", out, "--config", cfg, "--deterministic") == 0
        manifest = json.loads((tmp_path / "rec.jsonl.manifest.json").read_text())
        assert manifest["config"]["tau1"] == 0.99

    def test_flag_beats_config_file(self, synth_files, tmp_path):
        _, _, p = synth_files
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"tau1": 0.99}))
        out = tmp_path / "rec.jsonl"
        assert run("reconstruct", "--in", p, "--out", out, "--config", cfg,
                   "--tau1", 0.5, "--deterministic") == 0
        manifest = json.loads((tmp_path / "rec.jsonl.manifest.json").read_text())
        assert manifest["config"]["tau1"] == 0.5

    def test_env_var_config(self, synth_files, tmp_path, monkeypatch):
        _, _, p = synth_files
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"tau2": 0.45}))
        monkeypatch.setenv("GRIDTAB_CONFIG", str(cfg))
        out = tmp_path / "rec.jsonl"
        assert run("reconstruct", "--in", p, "--out", out, "--deterministic") == 0
        manifest = json.loads((tmp_path / "rec.jsonl.manifest.json").read_text())
        assert manifest["config"]["tau2"] == 0.45

    def test_defaults_recorded_in_manifest(self, synth_files, tmp_path):
        _, _, p = synth_files
        out = tmp_path / "rec.jsonl"
        assert run("reconstruct", "--in", p, "--out", out, "--deterministic") == 0
        config = json.loads((tmp_path / "rec.jsonl.manifest.json").read_text())["config"]
        assert config["m"] == 50 and config["n"] == 50
        assert config["tau1"] == 0.5 and config["tau2"] == 0.4
        assert config["iou_thresh"] == 0.6
        assert [config[k] for k in ("lambda_cls", "lambda_coord", "lambda_ref", "lambda_edge")] == [1, 5, 5, 5]
        assert config["gamma_iou"] == 0.1
        assert config["focal_alpha"] == 0.25 and config["focal_gamma"] == 2.0
