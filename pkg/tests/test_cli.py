import json

from guiscout.cli import main
from conftest import write_funnel_dirs


def test_run_smoke(tmp_path, capsys):
    out = tmp_path / "runs"
    code = main(["run", "--backend", "sim", "--controller", "scripted",
                 "--evaluator", "oracle", "--runs", "1", "--out", str(out)])
    assert code == 0
    assert (out / "run-000" / "header.json").is_file()
    assert "1 run(s)" in capsys.readouterr().out


def test_run_rejects_zero_runs(tmp_path, capsys):
    code = main(["run", "--runs", "0", "--out", str(tmp_path)])
    assert code == 1
    assert "--runs" in capsys.readouterr().err


def test_run_live_without_credential_names_the_variable(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("GUISCOUT_API_KEY", raising=False)
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"remote": {"endpoint": "http://127.0.0.1:9/x",
                                             "model": "m"}}), encoding="utf-8")
    code = main(["run", "--backend", "live", "--config", str(config),
                 "--out", str(tmp_path / "runs")])
    assert code == 1
    assert "GUISCOUT_API_KEY" in capsys.readouterr().err


def test_unknown_flag_is_a_usage_error(capsys):
    assert main(["run", "--frobnicate"]) == 1
    assert "error:" in capsys.readouterr().err


def test_replay_round_trip(tmp_path, capsys):
    out = tmp_path / "runs"
    assert main(["run", "--out", str(out), "--runs", "1"]) == 0
    code = main(["replay", "--record", str(out / "run-000")])
    assert code == 0
    assert "byte-equal" in capsys.readouterr().out


def test_replay_corrupt_record_exits_one(tmp_path, capsys):
    out = tmp_path / "runs"
    main(["run", "--out", str(out), "--runs", "1"])
    iterations = out / "run-000" / "iterations.jsonl"
    text = iterations.read_text("utf-8")
    iterations.write_text(text[: len(text) // 2], encoding="utf-8")
    assert main(["replay", "--record", str(out / "run-000")]) == 1


def test_replay_with_altered_faults_exits_four(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "faults": [{"kind": "misaligned_rect", "page": "inputs_outputs",
                    "label": "Add Input..."}]}), encoding="utf-8")
    out = tmp_path / "runs"
    assert main(["run", "--config", str(config), "--out", str(out), "--runs", "1"]) == 0
    header_path = out / "run-000" / "header.json"
    header = json.loads(header_path.read_text("utf-8"))
    header["config"]["faults"] = []
    header_path.write_text(json.dumps(header), encoding="utf-8")
    code = main(["replay", "--record", str(out / "run-000")])
    assert code == 4
    assert "divergence at iteration" in capsys.readouterr().err


def test_label_creates_prefilled_file(tmp_path, capsys):
    out = tmp_path / "runs"
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "faults": [{"kind": "generic_error_message", "page": "launch_settings",
                    "label": "Working Directory"}]}), encoding="utf-8")
    main(["run", "--config", str(config), "--out", str(out), "--runs", "1"])
    labels = tmp_path / "labels.txt"
    assert main(["label", "--runs", str(out), "--labels", str(labels)]) == 0
    content = labels.read_text("utf-8")
    assert "unknown" in content
    assert "1 unlabeled" in capsys.readouterr().out


def test_report_unlabeled_exits_three_naming_findings(tmp_path, capsys):
    runs_dir, _ = write_funnel_dirs(tmp_path)
    code = main(["report", "--runs", str(runs_dir)])
    assert code == 3
    err = capsys.readouterr().err
    assert "unlabeled findings" in err
    assert "(run-000, 0)" in err


def test_report_funnel_fixture_text(tmp_path, capsys):
    runs_dir, labels_path = write_funnel_dirs(tmp_path)
    code = main(["report", "--runs", str(runs_dir), "--labels", str(labels_path),
                 "--format", "text"])
    assert code == 0
    out = capsys.readouterr().out
    for number in ("9", "752", "72", "7", "5"):
        assert number in out


def test_report_json_format(tmp_path, capsys):
    runs_dir, labels_path = write_funnel_dirs(tmp_path)
    code = main(["report", "--runs", str(runs_dir), "--labels", str(labels_path),
                 "--format", "json"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["runs"] == 9
    assert payload["actions"] == 752
    assert payload["positives"] == 72
    assert payload["true_positives"] == 7
    assert payload["unique_issues"] == 5


def test_report_empty_runs_dir_is_all_zeros(tmp_path, capsys):
    empty = tmp_path / "nothing"
    empty.mkdir()
    code = main(["report", "--runs", str(empty)])
    assert code == 0
    assert "runs:           0" in capsys.readouterr().out


def test_report_assume_unlabeled_false(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "faults": [{"kind": "missing_title", "page": "cpacs_properties",
                    "label": "title"}]}), encoding="utf-8")
    out = tmp_path / "runs"
    main(["run", "--config", str(config), "--out", str(out), "--runs", "1"])
    code = main(["report", "--runs", str(out), "--assume-unlabeled-false"])
    assert code == 0
    assert "positives:      1" in capsys.readouterr().out


def test_demo_prints_a_one_issue_report(tmp_path, capsys):
    code = main(["demo", "--out", str(tmp_path / "demo-runs")])
    assert code == 0
    out = capsys.readouterr().out
    assert "unique issues:  1" in out
    assert "true positives: 1" in out


def test_run_with_custom_wizard_config(tmp_path):
    config = tmp_path / "config.json"
    from guiscout.simulator import default_wizard_config

    wizard = default_wizard_config()
    wizard["pages"][0]["fields"][1]["label"] = "Component Name"
    config.write_text(json.dumps({
        "wizard": wizard,
        "controller_script": [json.dumps({"action": "click(999)",
                                          "explanation": "probe"})],
    }), encoding="utf-8")
    out = tmp_path / "runs"
    assert main(["run", "--config", str(config), "--out", str(out), "--runs", "1"]) == 0
    record = json.loads((out / "run-000" / "header.json").read_text("utf-8"))
    assert record["config"]["wizard_config"]["pages"][0]["fields"][1]["label"] == \
        "Component Name"
