import json

import pytest

from vesselsim.cli import main
from vesselsim.triallog import load_jsonl


@pytest.fixture()
def fast_easy_config(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"task": {"tier": "easy"}, "policy": {"id": "context"}}))
    return str(p)


class TestRunCommand:
    def test_successful_trial_exit_zero(self, fast_easy_config, tmp_path):
        out = tmp_path / "out"
        code = main(["run", "--config", fast_easy_config, "--out", str(out)])
        assert code == 0
        logs = list(out.glob("*.jsonl"))
        assert len(logs) == 1
        metrics = json.loads(next(out.glob("*.metrics.json")).read_text())
        assert set(metrics) >= {"CT", "PL", "Va", "S", "CC", "success"}
        log = load_jsonl(logs[0].read_text())
        assert log.status == "reached"

    def test_unknown_key_exit_one_names_key(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"simulator": {"dt": 0.01}}))
        code = main(["run", "--config", str(p), "--out", str(tmp_path / "o")])
        assert code == 1
        assert "simulator" in capsys.readouterr().err

    def test_seed_override_changes_hash(self, fast_easy_config, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main(["run", "--config", fast_easy_config, "--out", str(out_a)]) == 0
        assert main(["run", "--config", fast_easy_config, "--out", str(out_b), "--seed", "3"]) == 0
        log_a = load_jsonl(next(out_a.glob("*.jsonl")).read_text())
        log_b = load_jsonl(next(out_b.glob("*.jsonl")).read_text())
        assert log_a.config_hash != log_b.config_hash

    def test_infeasible_trial_exit_two(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(
            json.dumps(
                {"task": {"tier": None, "start": [11.0, 5.0], "goal": [1.2, 1.2]}}
            )
        )
        code = main(["run", "--config", str(p), "--out", str(tmp_path / "o")])
        assert code == 2


class TestPlanCommand:
    def test_exports(self, tmp_path):
        out = tmp_path / "plan"
        code = main(["plan", "--out", str(out), "--set", "task.tier=hard"])
        assert code == 0
        for name in ("occupancy.pgm", "distance.pgm", "costmap.pgm", "plan.json"):
            assert (out / name).exists()
        payload = json.loads((out / "plan.json").read_text())
        assert payload["rod_length_mm"] == 4.0
        assert (out / "occupancy.pgm").read_bytes().startswith(b"P5")


class TestBatchCommand:
    def test_small_grid_and_manifest(self, tmp_path):
        p = tmp_path / "batch.json"
        p.write_text(
            json.dumps(
                {
                    "conditions": [{"id": "fixed"}, {"id": "context"}],
                    "tiers": ["easy"],
                    "seeds": [0, 1],
                }
            )
        )
        out = tmp_path / "out"
        code = main(["batch", "--config", str(p), "--out", str(out)])
        assert code == 0
        assert len(list((out / "logs").glob("*.jsonl"))) == 4
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["logs"] == 4 and manifest["failures"] == []
        report = json.loads((out / "report.json").read_text())
        assert set(report["conditions"][0]["mean"]) == {"CT", "PL", "Va", "S", "CC"}
        csv_text = (out / "report.csv").read_text()
        assert csv_text.splitlines()[0].startswith("condition,n,CT_mean")

    def test_rerun_byte_identical(self, tmp_path):
        p = tmp_path / "batch.json"
        p.write_text(
            json.dumps(
                {"conditions": [{"id": "fixed"}], "tiers": ["easy"], "seeds": [0, 1]}
            )
        )
        out1 = tmp_path / "o1"
        out2 = tmp_path / "o2"
        assert main(["batch", "--config", str(p), "--out", str(out1)]) == 0
        assert main(["batch", "--config", str(p), "--out", str(out2)]) == 0
        assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()

    def test_partial_failure_manifest(self, tmp_path):
        # the external condition points at an unreachable adapter, so its cells
        # fail while the fixed condition still produces logs
        p = tmp_path / "batch.json"
        p.write_text(
            json.dumps(
                {
                    "conditions": [
                        {"id": "fixed"},
                        {"id": "external", "adapter_port": 1, "adapter_timeout_ms": 20},
                    ],
                    "tiers": ["easy"],
                    "seeds": [0],
                }
            )
        )
        out = tmp_path / "out"
        code = main(["batch", "--config", str(p), "--out", str(out)])
        manifest = json.loads((out / "manifest.json").read_text())
        assert code == 2
        assert manifest["logs"] == 1
        assert len(manifest["failures"]) == 1
        assert manifest["failures"][0]["condition"] == "external"
        report = json.loads((out / "report.json").read_text())
        assert [c["name"] for c in report["conditions"]] == ["fixed"]
