import json
import math

import numpy as np
import pytest

from headanneal.cli import ALPHA_GRID, ARCH_ALIASES, EXIT_CONFIG, EXIT_DATA, EXIT_PARSE, main


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One small end-to-end pipeline shared by the read-only assertions."""
    root = tmp_path_factory.mktemp("pipeline")
    obj = root / "obj.json"
    corpus = root / "corpus.jsonl"
    assert run_cli("oracle", "make", "--kind", "random", "--n", "12",
                   "--seed", "3", "--out-file", str(obj)) == 0
    assert run_cli("oracle", "corpus", "--objective", str(obj), "--count", "3000",
                   "--n-l", "0", "--n-u", "4", "--seed", "1",
                   "--out-file", str(corpus)) == 0
    assert run_cli("train-surrogate", "--corpus", str(corpus), "--arch", "12,64,32,1",
                   "--seed", "0", "--max-epochs", "120", "--out", str(root / "sur")) == 0
    return root


class TestPipeline:
    def test_training_outputs(self, pipeline):
        report = json.loads((pipeline / "sur" / "mse_report.json").read_text())
        assert report["arch"] == [12, 64, 32, 1]
        assert report["dataset_size"] == 3000
        assert report["bias_val_mse"] < 0.05
        assert (pipeline / "sur" / "theta_bias.npz").exists()
        assert (pipeline / "sur" / "theta_ppl.npz").exists()
        manifest = json.loads((pipeline / "sur" / "manifest.json").read_text())
        assert manifest["command"] == "train-surrogate"
        assert len(manifest["inputs"]) == 1
        assert any(p.endswith("theta_bias.npz") for p in manifest["outputs"])

    def test_anneal_and_result(self, pipeline):
        out = pipeline / "run"
        assert run_cli(
            "anneal", "--theta-bias", str(pipeline / "sur" / "theta_bias.npz"),
            "--theta-ppl", str(pipeline / "sur" / "theta_ppl.npz"),
            "--epsilon", "0.5", "--n-l", "0", "--n-u", "4",
            "--iterations", "8000", "--seeds", "0,1,2",
            "--objective", str(pipeline / "obj.json"), "--out", str(out),
        ) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert len(summary["runs"]) == 3
        assert {r["seed"] for r in summary["runs"]} == {0, 1, 2}
        agg = summary["aggregate"]
        assert agg["best_cost"] == min(r["best_cost"] for r in summary["runs"])
        assert "cost_std" in agg and "true_bias_mean" in agg
        result = json.loads((out / "result.json").read_text())
        assert result["bias"] == agg["true_bias"]
        assert (out / "run_seed0.trace.jsonl").exists()

    def test_eta_bound_uses_ceiling(self, pipeline):
        out = pipeline / "run_eta"
        assert run_cli(
            "anneal", "--theta-bias", str(pipeline / "sur" / "theta_bias.npz"),
            "--theta-ppl", str(pipeline / "sur" / "theta_ppl.npz"),
            "--n-l", "2", "--eta", "0.3", "--iterations", "500",
            "--seeds", "0", "--no-trace", "--out", str(out),
        ) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_u"] == math.ceil(0.3 * 12) == 4

    def test_exhaustive_and_effects_and_fasp(self, pipeline):
        obj = str(pipeline / "obj.json")
        ex = pipeline / "ex"
        assert run_cli("oracle", "exhaustive", "--objective", obj, "--epsilon", "0.5",
                       "--n-l", "0", "--n-u", "4", "--out", str(ex)) == 0
        payload = json.loads((ex / "exhaustive.json").read_text())
        assert payload["states_enumerated"] == 794
        pareto = (ex / "pareto.tsv").read_text().splitlines()
        assert pareto[0] == "bias\tppl\tmask"
        assert len(pareto) > 2

        effects = pipeline / "effects.csv"
        assert run_cli("oracle", "effects", "--objective", obj,
                       "--out-file", str(effects)) == 0

        fasp_out = pipeline / "fasp"
        assert run_cli("fasp", "--effects", str(effects), "--sweep-alpha",
                       "--gamma", "0.3", "--objective", obj, "--out", str(fasp_out)) == 0
        fasp = json.loads((fasp_out / "fasp.json").read_text())
        assert [g["alpha"] for g in fasp["grid"]] == ALPHA_GRID
        assert fasp["chosen_alpha"] in ALPHA_GRID
        assert fasp["bias"] == min(g["bias"] for g in fasp["grid"])

    def test_select_and_compare(self, pipeline):
        obj = str(pipeline / "obj.json")
        rnd = pipeline / "rnd"
        assert run_cli("select", "--random", "--n", "12", "--alpha-max", "0.25",
                       "--seed", "7", "--objective", obj, "--out", str(rnd)) == 0
        sel = json.loads((rnd / "selection.json").read_text())
        assert 1 <= sel["weight"] <= 3

        scores = pipeline / "scores.csv"
        lines = ["head_index,score"] + [f"{i},{float(i)}" for i in range(12)]
        scores.write_text("\n".join(lines) + "\n")
        ranked = pipeline / "ranked"
        assert run_cli("select", "--scores", str(scores), "--alpha", "0.25",
                       "--direction", "prune-lowest", "--objective", obj,
                       "--out", str(ranked)) == 0
        sel = json.loads((ranked / "selection.json").read_text())
        assert sel["mask"] == "111000000000"

        cmp_out = pipeline / "cmp"
        assert run_cli("compare", str(rnd / "result.json"), str(ranked / "result.json"),
                       "--out", str(cmp_out)) == 0
        comparison = json.loads((cmp_out / "comparison.json").read_text())
        assert len(comparison["entries"]) == 2

    def test_sweep_single_epsilon_matches_anneal(self, pipeline):
        args = [
            "--theta-bias", str(pipeline / "sur" / "theta_bias.npz"),
            "--theta-ppl", str(pipeline / "sur" / "theta_ppl.npz"),
            "--n-l", "0", "--n-u", "4", "--iterations", "4000",
            "--seeds", "5", "--no-trace",
        ]
        a_out = pipeline / "a_single"
        s_out = pipeline / "s_single"
        assert run_cli("anneal", "--epsilon", "0.4", *args, "--out", str(a_out)) == 0
        assert run_cli("sweep-epsilon", "--epsilons", "0.4", *args, "--out", str(s_out)) == 0
        single = json.loads((a_out / "summary.json").read_text())["aggregate"]
        sweep = json.loads((s_out / "summary.json").read_text())["per_epsilon"]["0.4"]
        assert sweep["best_mask"] == single["best_mask"]
        assert sweep["best_cost"] == single["best_cost"]


class TestReproducibility:
    def test_same_seed_same_outputs(self, pipeline):
        args = [
            "anneal",
            "--theta-bias", str(pipeline / "sur" / "theta_bias.npz"),
            "--theta-ppl", str(pipeline / "sur" / "theta_ppl.npz"),
            "--epsilon", "0.5", "--n-l", "0", "--n-u", "4",
            "--iterations", "3000", "--seeds", "0,1", "--no-trace",
        ]
        out1, out2 = pipeline / "rep1", pipeline / "rep2"
        assert run_cli(*args, "--out", str(out1)) == 0
        assert run_cli(*args, "--out", str(out2)) == 0
        s1 = json.loads((out1 / "summary.json").read_text())
        s2 = json.loads((out2 / "summary.json").read_text())
        for r1, r2 in zip(s1["runs"], s2["runs"]):
            # identical search outcome; wall-clock throughput naturally varies
            for key in ("seed", "best_mask", "best_cost", "t0", "iterations"):
                assert r1[key] == r2[key]


class TestEvaluateCommand:
    def test_bias_and_perplexity(self, tmp_path):
        tox = tmp_path / "tox.csv"
        tox.write_text(
            "prompt_id,subgroup,toxicity\np0,a,0.2\np1,b,0.4\n"
        )
        loss = tmp_path / "loss.csv"
        loss.write_text("sequence_id,mean_nll,token_count\ns0,1.0,10\ns1,2.0,30\n")
        out = tmp_path / "eval"
        assert run_cli("evaluate", "--toxicity", str(tox), "--losses", str(loss),
                       "--group", "gender", "--out", str(out)) == 0
        payload = json.loads((out / "evaluation.json").read_text())
        assert payload["bias_report"]["bias"] == pytest.approx(0.2, rel=1e-12)
        assert payload["perplexity"] == pytest.approx(math.exp(1.75), rel=1e-12)


class TestCompareMath:
    def test_relative_improvement_reference_numbers(self, tmp_path, capsys):
        base = tmp_path / "base.json"
        base.write_text(json.dumps({"method": "baseline", "bias": 0.446, "ppl": 11.695}))
        other = tmp_path / "pruned.json"
        other.write_text(json.dumps({"method": "pruned", "bias": 0.264, "ppl": 13.17}))
        out = tmp_path / "cmp"
        assert run_cli("compare", str(base), str(other), "--out", str(out)) == 0
        entries = json.loads((out / "comparison.json").read_text())["entries"]
        pruned = entries[1]
        assert pruned["bias_improvement_abs"] == pytest.approx(0.182, abs=1e-12)
        assert 100 * pruned["bias_improvement_rel"] == pytest.approx(40.8, abs=0.05)
        assert pruned["wins_bias"] and not pruned["wins_ppl"]

    def test_dominance_flag_matches_pairwise_oracle(self, tmp_path):
        rng = np.random.default_rng(0)
        paths = []
        points = []
        for i in range(6):
            b, p = float(rng.uniform(0.2, 0.6)), float(rng.uniform(5, 20))
            points.append((b, p))
            path = tmp_path / f"m{i}.json"
            path.write_text(json.dumps({"method": f"m{i}", "bias": b, "ppl": p}))
            paths.append(str(path))
        out = tmp_path / "cmp"
        assert run_cli("compare", *paths, "--out", str(out)) == 0
        entries = json.loads((out / "comparison.json").read_text())["entries"]
        for i, e in enumerate(entries):
            bi, pi = points[i]
            expected = any(
                (bj <= bi and pj <= pi and (bj < bi or pj < pi))
                for j, (bj, pj) in enumerate(points)
                if j != i
            )
            assert e["dominated"] == expected

    def test_identical_inputs_zero_improvement(self, tmp_path):
        a = tmp_path / "a.json"
        a.write_text(json.dumps({"method": "x", "bias": 0.3, "ppl": 10.0}))
        b = tmp_path / "b.json"
        b.write_text(json.dumps({"method": "y", "bias": 0.3, "ppl": 10.0}))
        out = tmp_path / "cmp"
        assert run_cli("compare", str(a), str(b), "--out", str(out)) == 0
        entries = json.loads((out / "comparison.json").read_text())["entries"]
        assert entries[1]["bias_improvement_rel"] == 0.0


class TestConfigFile:
    def test_config_provides_defaults_flags_override(self, tmp_path, pipeline):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "epsilon = 0.5\nn-l = 0\nn-u = 4\niterations = 500\n"
            "seeds = 3\nno-trace = true\n"
        )
        common = [
            "anneal", "--config", str(cfg),
            "--theta-bias", str(pipeline / "sur" / "theta_bias.npz"),
            "--theta-ppl", str(pipeline / "sur" / "theta_ppl.npz"),
        ]
        out1 = tmp_path / "from_config"
        assert run_cli(*common, "--out", str(out1)) == 0
        assert json.loads((out1 / "summary.json").read_text())["runs"][0]["iterations"] == 500
        out2 = tmp_path / "overridden"
        assert run_cli(*common, "--iterations", "250", "--out", str(out2)) == 0
        assert json.loads((out2 / "summary.json").read_text())["runs"][0]["iterations"] == 250

    def test_missing_config(self):
        assert run_cli("anneal", "--config", "/nonexistent.cfg", "--out", "x") == EXIT_PARSE


class TestExitCodes:
    def test_missing_input_file(self, tmp_path):
        code = run_cli("train-surrogate", "--corpus", str(tmp_path / "nope.jsonl"),
                       "--out", str(tmp_path / "o"))
        assert code == EXIT_PARSE

    def test_configuration_error(self, pipeline, tmp_path):
        code = run_cli(
            "anneal", "--theta-bias", str(pipeline / "sur" / "theta_bias.npz"),
            "--theta-ppl", str(pipeline / "sur" / "theta_ppl.npz"),
            "--epsilon", "1.5", "--n-l", "0", "--n-u", "4",
            "--iterations", "10", "--out", str(tmp_path / "o"),
        )
        assert code == EXIT_CONFIG

    def test_data_error(self, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        code = run_cli("train-surrogate", "--corpus", str(empty),
                       "--out", str(tmp_path / "o"))
        assert code == EXIT_DATA

    def test_compare_needs_two(self, tmp_path):
        one = tmp_path / "one.json"
        one.write_text(json.dumps({"method": "m", "bias": 0.1, "ppl": 1.0}))
        assert run_cli("compare", str(one)) == EXIT_CONFIG


class TestReferenceArchitectures:
    def test_model_alias_table(self):
        assert ARCH_ALIASES["distilgpt-2"] == [72, 64, 32, 1]
        assert ARCH_ALIASES["gpt-2"] == [144, 64, 32, 1]
        assert ARCH_ALIASES["gpt-neo-125m"] == [144, 64, 32, 1]
        assert ARCH_ALIASES["gpt-neo-1.3b"] == [384, 256, 128, 1]
        assert ARCH_ALIASES["gpt-j-6b"] == [448, 256, 128, 1]
        assert ARCH_ALIASES["llama-2-7b"] == [1024, 256, 128, 1]

    def test_alpha_grid(self):
        assert ALPHA_GRID == [0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20]
