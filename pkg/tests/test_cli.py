"""CLI surface: subcommands, exit codes, output artifacts, reproducibility."""

import csv
import io
import json

import pytest

import splitwire as sw
from splitwire.cli import EXIT_INFEASIBLE, EXIT_IO, EXIT_OK, EXIT_PROTOCOL, main
from splitwire.planner import bundled_table_path
from splitwire.wire import FeatureServer, SessionConfig


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestProfile:
    def test_all_splits_table(self, capsys):
        code, out, _ = run_cli(
            capsys, "profile", "--model", "resnet34", "--variant", "cifar", "--classes", "100", "--all-splits"
        )
        assert code == EXIT_OK
        for key in ("SP-1", "SP-2", "SP-3", "SP-4", "SP-5"):
            assert key in out

    def test_all_splits_csv_matches_accounting(self, capsys, tmp_path):
        outdir = tmp_path / "prof"
        code, _, _ = run_cli(capsys, "profile", "--all-splits", "--output-dir", str(outdir), "--format", "csv")
        assert code == EXIT_OK
        rows = list(csv.DictReader((outdir / "profile.csv").open()))
        assert len(rows) == 5
        sp2 = next(r for r in rows if r["split"] == "SP-2")
        assert float(sp2["flops_prop_t"]) == pytest.approx(9.96, abs=0.05)
        manifest = json.loads((outdir / "run_manifest.json").read_text())
        assert {o["path"] for o in manifest["outputs"]} == {"profile.csv"}

    def test_single_split_proportion(self, capsys):
        code, out, _ = run_cli(capsys, "profile", "--split", "SP-2", "--n-c", "1024", "--stages", "2")
        assert code == EXIT_OK and "9.96%" in out

    def test_vanilla_listing(self, capsys):
        code, out, _ = run_cli(capsys, "profile")
        assert code == EXIT_OK
        assert "conv1" in out and "fc" in out

    def test_unknown_split_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "profile", "--split", "SP-9")
        assert code == 2 and "split" in err

    def test_non_power_of_two_nc_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "profile", "--split", "SP-2", "--n-c", "1000")
        assert code == 2 and "power of two" in err


class TestSweep:
    def test_beta_sweep_csv(self, capsys, tmp_path):
        outdir = tmp_path / "sweep"
        code, out, _ = run_cli(
            capsys, "sweep", "--kind", "beta", "--splits", "SP-2,SP-3,SP-4", "--points", "11",
            "--output-dir", str(outdir),
        )
        assert code == EXIT_OK
        rows = list(csv.DictReader((outdir / "beta_sweep.csv").open()))
        assert len(rows) == 33
        assert set(r["split"] for r in rows) == {"SP-2", "SP-3", "SP-4"}
        # early split strictly cheaper than late for small beta
        first = [r for r in rows if float(r["beta"]) == pytest.approx(1e-5)]
        by_split = {r["split"]: float(r["normalized_tcomp"]) for r in first}
        assert by_split["SP-2"] < by_split["SP-3"] < by_split["SP-4"]

    def test_empty_grid_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "sweep", "--kind", "beta", "--points", "0")
        assert code == 2 and "points" in err

    def test_nc_sweep_reproduces_published_cells(self, capsys):
        code, out, _ = run_cli(
            capsys, "sweep", "--kind", "nc", "--table", "bundled", "--snr", "5", "--floor", "0.66",
            "--model-id", "resnet34",
        )
        assert code == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(out)))
        got = {r["split"]: r["min_nc"] for r in rows}
        assert got == {"SP-2": "512", "SP-3": "32", "SP-4": "16"}

    def test_nc_sweep_without_source_errors_with_both_options(self, capsys):
        code, _, err = run_cli(capsys, "sweep", "--kind", "nc")
        assert code == 2
        assert "--table" in err and "eval-grid" in err


class TestSimulate:
    def test_noiseless_label_matches_monolithic(self, capsys):
        code, out, _ = run_cli(
            capsys, "simulate", "--model", "resnet18", "--classes", "10", "--split", "SP-2",
            "--n-c", "256", "--seed", "3", "--format", "json",
        )
        assert code == EXIT_OK
        result = json.loads(out)
        g = sw.build_resnet(18, "cifar", 10)
        m = sw.apply_split(g, "SP-2", 256, 2)
        w = sw.random_weights(m, seed=3)
        from splitwire.pipeline import random_input, run_monolithic

        logits = run_monolithic(m, w, random_input(g.input_shape, 3))
        assert result["label"] == int(logits.reshape(-1).argmax())

    def test_same_seed_identical_output_files(self, capsys, tmp_path):
        args = (
            "simulate", "--model", "resnet18", "--classes", "10", "--split", "SP-3", "--n-c", "64",
            "--snr", "5", "--seed", "11",
        )
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run_cli(capsys, *args, "--output-dir", str(out_a))[0] == EXIT_OK
        assert run_cli(capsys, *args, "--output-dir", str(out_b))[0] == EXIT_OK
        assert (out_a / "simulate_result.json").read_bytes() == (out_b / "simulate_result.json").read_bytes()
        assert (out_a / "run_manifest.json").read_bytes() == (out_b / "run_manifest.json").read_bytes()

    def test_different_snr_changes_noisy_vector_not_validity(self, capsys):
        base = (
            "simulate", "--model", "resnet18", "--classes", "10", "--split", "SP-3", "--n-c", "64",
            "--seed", "11", "--noise-seed", "5", "--format", "json",
        )
        _, out5, _ = run_cli(capsys, *base, "--snr", "5")
        _, out0, _ = run_cli(capsys, *base, "--snr", "0")
        r5, r0 = json.loads(out5), json.loads(out0)
        assert r5["zhat_sha256"] != r0["zhat_sha256"]
        assert 0 <= r5["label"] < 10 and 0 <= r0["label"] < 10

    def test_cost_report_requires_alphas(self, capsys):
        code, _, err = run_cli(
            capsys, "simulate", "--model", "resnet18", "--classes", "10", "--split", "SP-2",
            "--n-c", "256", "--rate", "1e6",
        )
        assert code == 2 and "alpha" in err

    def test_cost_report_in_output(self, capsys):
        code, out, _ = run_cli(
            capsys, "simulate", "--model", "resnet18", "--classes", "10", "--split", "SP-2", "--n-c", "256",
            "--rate", "1e6", "--alpha-t", "1e-9", "--alpha-r", "1e-12", "--format", "json",
        )
        assert code == EXIT_OK
        cost = json.loads(out)["cost"]
        assert cost["t_task"] == pytest.approx(cost["t_m_t"] + cost["t_m_r"] + cost["t_comm"])


class TestPlan:
    ARGS = ("plan", "--snr", "5", "--alpha-t", "1e-8", "--alpha-r", "1e-12", "--rate", "1e6")

    def test_feasible_plan(self, capsys, tmp_path):
        outdir = tmp_path / "plan"
        code, out, _ = run_cli(capsys, *self.ARGS, "--floor", "0.66", "--model-id", "resnet34",
                               "--output-dir", str(outdir), "--format", "json")
        assert code == EXIT_OK
        result = json.loads(out)
        assert result["feasible"] and result["split"] in {"SP-2", "SP-3", "SP-4", "SP-5"}
        saved = json.loads((outdir / "plan_result.json").read_text())
        assert saved == result

    def test_infeasible_exit_code(self, capsys):
        code, out, _ = run_cli(capsys, *self.ARGS, "--floor", "0.99")
        assert code == EXIT_INFEASIBLE and "infeasible" in out

    def test_explicit_table_path(self, capsys):
        code, out, _ = run_cli(capsys, *self.ARGS, "--floor", "0.66", "--table", str(bundled_table_path()))
        assert code == EXIT_OK

    def test_missing_table_file_is_io_error(self, capsys):
        code, _, err = run_cli(capsys, *self.ARGS, "--floor", "0.5", "--table", "/nonexistent.csv")
        assert code == EXIT_IO


class TestSendServe:
    def test_send_against_live_server_matches_simulate(self, capsys):
        g = sw.build_resnet(18, "cifar", 10)
        m = sw.apply_split(g, "SP-2", 256, 2)
        w = sw.random_weights(m, seed=0)  # cli default --seed 0
        config = SessionConfig(port=0, snr_db=float("inf"), dtype="f32", timeout=10.0)
        with FeatureServer(m, w, config) as server:
            host, port = server.address[:2]
            code, out, _ = run_cli(
                capsys, "send", "--model", "resnet18", "--classes", "10", "--split", "SP-2", "--n-c", "256",
                "--host", host, "--port", str(port), "--seed", "0", "--noise-seed", "42", "--format", "json",
            )
        assert code == EXIT_OK
        sent = json.loads(out)
        code, out, _ = run_cli(
            capsys, "simulate", "--model", "resnet18", "--classes", "10", "--split", "SP-2", "--n-c", "256",
            "--seed", "0", "--noise-seed", "42", "--format", "json",
        )
        assert code == EXIT_OK
        assert sent["label"] == json.loads(out)["label"]

    def test_send_to_closed_port_is_protocol_error(self, capsys):
        code, _, err = run_cli(
            capsys, "send", "--model", "resnet18", "--classes", "10", "--split", "SP-2", "--n-c", "256",
            "--host", "127.0.0.1", "--port", "1", "--timeout", "2",
        )
        assert code == EXIT_PROTOCOL


class TestParser:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0

    def test_missing_subcommand_is_usage(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2
