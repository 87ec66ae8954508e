import json
from datetime import datetime, timezone

import pytest

import alertpredict as ap
from alertpredict.cli import main, parse_values
from alertpredict.pipeline import load_sequence


def _write_corpus(path, n=12, templates=3, duplicates=True):
    alerts = []
    for i in range(n):
        t = i % templates
        alerts.append(
            ap.Alert(
                timestamp=datetime(2000, 4, 16, 11, i // 60, i % 60, tzinfo=timezone.utc),
                src_ip=f"10.1.{t}.1",
                dst_ip=f"192.168.{t}.9",
                src_port=2000 + t,
                dst_port=80,
                signature=str(700 + t),
                category=f"kind-{t}",
            )
        )
    if duplicates:
        alerts += alerts[:2]
    ap.write_alert_file(ap.AlertLog.from_alerts(alerts), path)
    return path


class TestParseValues:
    def test_range(self):
        assert parse_values("2..5") == [2, 3, 4, 5]

    def test_range_with_step(self):
        assert parse_values("500..2000:500") == [500, 1000, 1500, 2000]

    def test_comma_list(self):
        assert parse_values("5,10,20") == [5, 10, 20]

    def test_single(self):
        assert parse_values("7") == [7]

    def test_bad_step(self):
        with pytest.raises(ValueError, match="step"):
            parse_values("1..5:0")


class TestExitCodes:
    def test_usage_error_exits_one(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["bogus-command"])
        assert err.value.code == 1

    def test_missing_subcommand_exits_one(self):
        with pytest.raises(SystemExit) as err:
            main(["cluster"])
        assert err.value.code == 1

    def test_data_error_exits_two(self, tmp_path, capsys):
        rc = main(["ingest", str(tmp_path / "missing.csv"), "-o", str(tmp_path / "out.csv")])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_malformed_line_exits_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("2000-01-01T00:00:00Z,1.2.3.999,,5.6.7.8,,650,cat\n")
        rc = main(["ingest", str(bad), "-o", str(tmp_path / "out.csv")])
        assert rc == 2
        assert "octet" in capsys.readouterr().err


class TestEndToEnd:
    def test_full_chain(self, tmp_path, capsys):
        raw = _write_corpus(tmp_path / "raw.csv")
        clean = tmp_path / "clean.csv"
        assert main(["ingest", str(raw), "-o", str(clean)]) == 0
        assert len(ap.parse_alert_file(clean)) == 12  # duplicates removed

        vocab = tmp_path / "vocab.json"
        assert main(["bow", "build", str(clean), "-o", str(vocab)]) == 0

        cmodel = tmp_path / "cmodel.json"
        assert main([
            "cluster", "fit", str(clean), "--vocab", str(vocab),
            "--k", "3", "--seed", "1", "-o", str(cmodel),
        ]) == 0

        seq = tmp_path / "seq.json"
        assert main([
            "cluster", "assign", str(clean), "--vocab", str(vocab),
            "--model", str(cmodel), "-o", str(seq),
        ]) == 0
        symbols, n_symbols = load_sequence(seq)
        assert n_symbols == 3 and len(symbols) == 12

        capsys.readouterr()
        assert main([
            "cluster", "describe", "--model", str(cmodel), "--vocab", str(vocab),
            "--id", "0", "--top", "4",
        ]) == 0
        assert len(capsys.readouterr().out.strip().splitlines()) == 4

        hmm = tmp_path / "hmm.json"
        assert main([
            "hmm", "train", str(seq), "--states", "2", "--seed", "3", "-o", str(hmm),
        ]) == 0

        assert main([
            "eval", "run", str(seq), "--hmm", str(hmm), "--train-len", "8",
            "--horizon", "1",
        ]) == 0
        out = capsys.readouterr().out
        assert "level1=" in out

        assert main([
            "hmm", "predict", str(clean), "--hmm", str(hmm), "--model", str(cmodel),
            "--vocab", str(vocab), "--horizon", "2", "--top", "2",
            "-o", str(tmp_path / "forecast.json"),
        ]) == 0
        forecast = json.loads((tmp_path / "forecast.json").read_text())
        assert len(forecast["steps"]) == 2

    def test_eval_run_aggregate_and_window_flags(self, tmp_path, capsys):
        seq = tmp_path / "seq.json"
        main(["eval", "synth", "--states", "2", "--symbols", "3", "--length", "60",
              "--seed", "3", "--peak", "0.85", "-o", str(seq)])
        hmm = tmp_path / "hmm.json"
        main(["hmm", "train", str(seq), "--states", "2", "--seed", "1",
              "--train-len", "40", "-o", str(hmm)])
        capsys.readouterr()
        assert main([
            "eval", "run", str(seq), "--hmm", str(hmm), "--train-len", "40",
            "--horizon", "2", "--aggregate", "--window", "20",
            "-o", str(tmp_path / "acc.json"),
        ]) == 0
        acc = json.loads((tmp_path / "acc.json").read_text())
        assert acc["level1"] <= acc["level2"] <= acc["level3"]

    def test_eval_sweep_states_prints_csv(self, tmp_path, capsys):
        clean = _write_corpus(tmp_path / "c.csv", duplicates=False)
        vocab, cmodel, seq = tmp_path / "v.json", tmp_path / "m.json", tmp_path / "s.json"
        main(["bow", "build", str(clean), "-o", str(vocab)])
        main(["cluster", "fit", str(clean), "--vocab", str(vocab), "--k", "3",
              "--seed", "0", "-o", str(cmodel)])
        main(["cluster", "assign", str(clean), "--vocab", str(vocab),
              "--model", str(cmodel), "-o", str(seq)])
        capsys.readouterr()
        assert main([
            "eval", "sweep", str(seq), "--param", "states", "--values", "1..2",
            "--train-len", "8", "--seed", "0",
        ]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "param,value,level1,level2,level3,n"
        assert len(lines) == 3

    def test_eval_sweep_clusters_via_log(self, tmp_path):
        clean = _write_corpus(tmp_path / "c.csv", duplicates=False)
        vocab = tmp_path / "v.json"
        main(["bow", "build", str(clean), "-o", str(vocab)])
        out_csv = tmp_path / "sweep.csv"
        assert main([
            "eval", "sweep", str(clean), "--param", "clusters", "--values", "2,3",
            "--vocab", str(vocab), "--train-len", "8", "--states", "2",
            "--csv", str(out_csv),
        ]) == 0
        assert out_csv.read_text().startswith("param,value")

    def test_eval_synth_generates_sequence(self, tmp_path):
        seq = tmp_path / "synth.json"
        model_out = tmp_path / "gen.json"
        assert main([
            "eval", "synth", "--states", "3", "--symbols", "4", "--length", "100",
            "--seed", "5", "--peak", "0.9", "-o", str(seq), "--model-out", str(model_out),
        ]) == 0
        symbols, n_symbols = load_sequence(seq)
        assert len(symbols) == 100 and n_symbols == 4
        gen = ap.Hmm.load(model_out)
        assert gen.n_states == 3

    def test_eval_synth_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        args = ["eval", "synth", "--states", "2", "--symbols", "3", "--length", "50",
                "--seed", "9"]
        assert main(args + ["-o", str(a)]) == 0
        assert main(args + ["-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_pipeline_run_with_overrides(self, tmp_path, capsys):
        clean = _write_corpus(tmp_path / "c.csv", duplicates=False)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "train_log": str(clean), "k": 3, "n_states": 2,
            "train_len": 8, "horizons": [1],
        }))
        out = tmp_path / "out"
        assert main([
            "pipeline", "run", "--config", str(cfg), "--out", str(out), "--seed", "4",
        ]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 4
        assert "pipeline complete" in capsys.readouterr().out

    def test_ingest_no_dedup_and_format_conversion(self, tmp_path):
        raw = _write_corpus(tmp_path / "raw.csv")  # 14 rows incl. 2 duplicates
        out = tmp_path / "all.jsonl"
        assert main(["ingest", str(raw), "-o", str(out), "--no-dedup",
                     "--out-format", "canonical-jsonl"]) == 0
        assert len(ap.parse_alert_file(out)) == 14

    def test_eval_sweep_train_len_and_json_output(self, tmp_path):
        seq = tmp_path / "seq.json"
        main(["eval", "synth", "--states", "2", "--symbols", "3", "--length", "200",
              "--seed", "4", "--peak", "0.9", "-o", str(seq)])
        out_json = tmp_path / "sweep.json"
        assert main([
            "eval", "sweep", str(seq), "--param", "train-len", "--values", "50..150:50",
            "--states", "2", "--seed", "0", "--json", str(out_json),
        ]) == 0
        rows = json.loads(out_json.read_text())["rows"]
        assert [r["value"] for r in rows] == [50, 100, 150]

    def test_eval_sweep_horizon_trains_internally(self, tmp_path, capsys):
        seq = tmp_path / "seq.json"
        main(["eval", "synth", "--states", "3", "--symbols", "3", "--length", "120",
              "--seed", "8", "--peak", "1.0", "-o", str(seq)])
        capsys.readouterr()
        assert main([
            "eval", "sweep", str(seq), "--param", "horizon", "--values", "1..3",
            "--train-len", "60", "--states", "3", "--seed", "1",
        ]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 4  # header + one row per horizon

    def test_eval_sweep_clusters_requires_vocab(self, tmp_path, capsys):
        clean = _write_corpus(tmp_path / "c.csv", duplicates=False)
        rc = main(["eval", "sweep", str(clean), "--param", "clusters",
                   "--values", "2,3", "--train-len", "8"])
        assert rc == 2
        assert "--vocab" in capsys.readouterr().err

    def test_cluster_fit_binary_and_normalize_flags(self, tmp_path):
        clean = _write_corpus(tmp_path / "c.csv", duplicates=False)
        vocab = tmp_path / "v.json"
        main(["bow", "build", str(clean), "-o", str(vocab)])
        model_path = tmp_path / "m.json"
        assert main([
            "cluster", "fit", str(clean), "--vocab", str(vocab), "--k", "3",
            "--seed", "0", "--bow-binary", "--normalize-l2", "-o", str(model_path),
        ]) == 0
        model = ap.ClusterModel.load(model_path)
        assert model.binary and model.normalize

    def test_hmm_predict_posterior_flag(self, tmp_path, capsys):
        clean = _write_corpus(tmp_path / "c.csv", duplicates=False)
        vocab, cmodel, seq = tmp_path / "v.json", tmp_path / "m.json", tmp_path / "s.json"
        main(["bow", "build", str(clean), "-o", str(vocab)])
        main(["cluster", "fit", str(clean), "--vocab", str(vocab), "--k", "3",
              "--seed", "0", "-o", str(cmodel)])
        main(["cluster", "assign", str(clean), "--vocab", str(vocab),
              "--model", str(cmodel), "-o", str(seq)])
        hmm = tmp_path / "h.json"
        main(["hmm", "train", str(seq), "--states", "2", "--seed", "0", "-o", str(hmm)])
        out = tmp_path / "pred.json"
        assert main([
            "hmm", "predict", str(clean), "--hmm", str(hmm), "--model", str(cmodel),
            "--vocab", str(vocab), "--posterior", "--top", "1", "-o", str(out),
        ]) == 0
        assert json.loads(out.read_text())["posterior"] is True

    def test_pipeline_horizons_and_sweeps_overrides(self, tmp_path):
        clean = _write_corpus(tmp_path / "c.csv", duplicates=False)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "train_log": str(clean), "k": 3, "n_states": 2,
            "train_len": 8, "horizons": [1, 2, 3],
        }))
        out = tmp_path / "out"
        assert main([
            "pipeline", "run", "--config", str(cfg), "--out", str(out),
            "--horizons", "1..2", "--sweeps",
        ]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["horizons"] == [1, 2]
        assert manifest["config"]["sweeps"] is True
        assert (out / "report_states_cluster.csv").exists()

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["--version"])
        assert err.value.code == 0
        assert "alertpredict" in capsys.readouterr().out

    def test_pipeline_train_len_too_big_is_data_error(self, tmp_path, capsys):
        clean = _write_corpus(tmp_path / "c.csv", duplicates=False)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "train_log": str(clean), "k": 3, "n_states": 2,
            "train_len": 9999, "horizons": [1],
        }))
        rc = main(["pipeline", "run", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "hmm-cluster" in capsys.readouterr().err
