"""Command-line pipeline: corpus generation, surrogate training, annealing,
baselines, epsilon sweeps, evaluation, and comparisons.

Precedence for settings is command-line flag over config file over
built-in default. A config file is flat `key = value` text whose keys are
the long option names (dashes or underscores); it is injected before the
explicit flags so the flags win.

Exit codes: 0 success, 2 parse/usage, 3 configuration, 4 data/validation,
5 runtime.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, baselines, metrics, oracle, records, surrogate
from .annealing import AnnealConfig, export_trace_jsonl
from .annealing import run as run_chain
from .errors import (
    ConfigurationError,
    DataError,
    HeadAnnealError,
    ParseError,
    TrainingDivergenceError,
)
from .manifest import RunManifest, atomic_write_json, atomic_write_text
from .masks import HeadMask, WeightBounds

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_RUNTIME = 5

# reference surrogate architectures per model family
ARCH_ALIASES = {
    "distilgpt-2": [72, 64, 32, 1],
    "gpt-2": [144, 64, 32, 1],
    "gpt-neo-125m": [144, 64, 32, 1],
    "gpt-neo-1.3b": [384, 256, 128, 1],
    "gpt-j-6b": [448, 256, 128, 1],
    "llama-2-7b": [1024, 256, 128, 1],
}

ALPHA_GRID = [round(0.02 * k, 2) for k in range(1, 11)]  # 0.02 .. 0.20
DEFAULT_EPSILON = 0.5
DEFAULT_GAMMA = 0.3
DEFAULT_N_L = 2


def _config_snapshot(args) -> dict:
    return {k: v for k, v in vars(args).items() if not callable(v)}


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _ensure_out(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _load_config_args(path: str) -> list[str]:
    """Flat key=value file to an argv fragment."""
    if not os.path.exists(path):
        raise ParseError(f"config file not found: {path}")
    extra: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ParseError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in stripped.split("=", 1))
            flag = "--" + key.replace("_", "-")
            if value.lower() in ("true", "yes", "on"):
                extra.append(flag)
            elif value.lower() in ("false", "no", "off"):
                continue
            else:
                extra.extend([flag, value])
    return extra


def _inject_config(argv: list[str]) -> list[str]:
    """Pull --config out of argv and splice its values in after the command."""
    out = list(argv)
    path = None
    i = 0
    while i < len(out):
        if out[i] == "--config":
            if i + 1 >= len(out):
                raise ParseError("--config needs a path")
            path = out[i + 1]
            del out[i : i + 2]
        elif out[i].startswith("--config="):
            path = out[i].split("=", 1)[1]
            del out[i]
        else:
            i += 1
    if path is None:
        return out
    if not out:
        raise ParseError("--config requires a command")
    return [out[0]] + _load_config_args(path) + out[1:]


def _resolve_bounds(args, n: int) -> WeightBounds:
    n_u = args.n_u
    if getattr(args, "eta", None) is not None:
        if n_u is not None:
            raise ConfigurationError("give either --n-u or --eta, not both")
        n_u = int(np.ceil(args.eta * n))
    if n_u is None:
        raise ConfigurationError("one of --n-u or --eta is required")
    bounds = WeightBounds(args.n_l, n_u)
    bounds.validate_for(n)
    return bounds


def _load_pair(args):
    theta_bias = surrogate.load_regressor(args.theta_bias)
    theta_ppl = surrogate.load_regressor(args.theta_ppl)
    if theta_bias.n != theta_ppl.n:
        raise ConfigurationError(
            f"surrogate widths differ: {theta_bias.n} vs {theta_ppl.n}"
        )
    return theta_bias, theta_ppl


def _true_eval(objective_path, mask: HeadMask):
    obj = oracle.load_objective(objective_path)
    return oracle.evaluate(obj, mask)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_train_surrogate(args) -> int:
    out = _ensure_out(args.out)
    manifest = RunManifest("train-surrogate", __version__, _config_snapshot(args))
    manifest.add_input(args.corpus)
    recs = records.load_corpus(args.corpus)
    corpus = surrogate.preprocess(recs, sigma=args.sigma)
    if args.model is not None:
        if args.model not in ARCH_ALIASES:
            raise ConfigurationError(
                f"unknown model alias {args.model!r}; known: {sorted(ARCH_ALIASES)}"
            )
        arch = ARCH_ALIASES[args.model]
    elif args.arch is not None:
        arch = _parse_int_list(args.arch)
    else:
        arch = surrogate.default_arch(corpus.n)
    theta_bias, theta_ppl = surrogate.train_pair(
        corpus,
        arch=arch,
        split=args.split,
        rng_seed=args.seed,
        lr=args.lr,
        batch_size=args.batch_size,
        patience=args.patience,
        max_epochs=args.max_epochs,
    )
    bias_path = os.path.join(out, "theta_bias.npz")
    ppl_path = os.path.join(out, "theta_ppl.npz")
    surrogate.save_regressor(theta_bias, bias_path)
    surrogate.save_regressor(theta_ppl, ppl_path)
    report = {
        "arch": arch,
        "dataset_size": len(recs),
        "bias_val_mse": theta_bias.meta["best_val_mse"],
        "ppl_val_mse": theta_ppl.meta["best_val_mse"],
        "bias_epochs": theta_bias.meta["epochs_run"],
        "ppl_epochs": theta_ppl.meta["epochs_run"],
        "scaling": corpus.scaling.to_dict(),
        "seed": args.seed,
        "split": args.split,
    }
    report_path = os.path.join(out, "mse_report.json")
    atomic_write_json(report_path, report)
    for p in (bias_path, ppl_path, report_path):
        manifest.add_output(p)
    manifest.write(out)
    print(f"trained pair on {len(recs)} samples, arch {arch}")
    print(
        f"validation MSE: bias {report['bias_val_mse']:.6f}  "
        f"ppl {report['ppl_val_mse']:.6f}"
    )
    return EXIT_OK


def _run_chains(theta_bias, theta_ppl, args, epsilon, seeds, out, manifest, prefix=""):
    bounds = _resolve_bounds(args, theta_bias.n)
    runs = []
    for seed in sorted(seeds):
        config = AnnealConfig(
            epsilon=epsilon,
            bounds=bounds,
            iterations=args.iterations,
            time_limit_s=args.time_limit_s,
            t0=args.t0,
            seed=seed,
            record_trace=not args.no_trace,
            backend=args.backend,
        )
        result = run_chain(config, theta_bias, theta_ppl)
        if not args.no_trace:
            trace_path = os.path.join(out, f"{prefix}run_seed{seed}.trace.jsonl")
            export_trace_jsonl(result, trace_path)
            manifest.add_output(trace_path)
        entry = {
            "seed": seed,
            "epsilon": epsilon,
            "best_mask": result.best_mask.to_text(),
            "best_cost": result.best_cost,
            "t0": result.t0,
            "iterations": result.iterations,
            "states_per_second": result.states_per_second,
            "neighbor_mode": result.neighbor_mode,
            **result.extras,
        }
        if args.objective:
            true_bias, true_ppl = _true_eval(args.objective, result.best_mask)
            entry["true_bias"] = true_bias
            entry["true_ppl"] = true_ppl
        runs.append(entry)
    return bounds, runs


def _aggregate(runs):
    best = min(runs, key=lambda r: r["best_cost"])
    costs = np.array([r["best_cost"] for r in runs])
    agg = {
        "best_seed": best["seed"],
        "best_mask": best["best_mask"],
        "best_cost": best["best_cost"],
        "cost_mean": float(costs.mean()),
        "cost_std": float(costs.std()),
    }
    for key in ("pred_bias", "pred_ppl", "true_bias", "true_ppl"):
        if all(key in r for r in runs):
            vals = np.array([r[key] for r in runs])
            agg[f"{key}_mean"] = float(vals.mean())
            agg[f"{key}_std"] = float(vals.std())
            agg[key] = best.get(key)
    return agg


def cmd_anneal(args) -> int:
    out = _ensure_out(args.out)
    manifest = RunManifest("anneal", __version__, _config_snapshot(args))
    manifest.add_input(args.theta_bias)
    manifest.add_input(args.theta_ppl)
    if args.objective:
        manifest.add_input(args.objective)
    theta_bias, theta_ppl = _load_pair(args)
    seeds = _parse_int_list(args.seeds)
    bounds, runs = _run_chains(
        theta_bias, theta_ppl, args, args.epsilon, seeds, out, manifest
    )
    agg = _aggregate(runs)
    summary = {
        "epsilon": args.epsilon,
        "n_l": bounds.n_l,
        "n_u": bounds.n_u,
        "seeds": sorted(seeds),
        "runs": runs,
        "aggregate": agg,
    }
    summary_path = os.path.join(out, "summary.json")
    atomic_write_json(summary_path, summary)
    manifest.add_output(summary_path)
    result = {
        "method": f"anneal(eps={args.epsilon})",
        "bias": agg.get("true_bias", agg.get("pred_bias")),
        "ppl": agg.get("true_ppl", agg.get("pred_ppl")),
        "mask": agg["best_mask"],
    }
    result_path = os.path.join(out, "result.json")
    atomic_write_json(result_path, result)
    manifest.add_output(result_path)
    manifest.write(out)
    print(f"best mask ({agg['best_mask'].count('1')} heads): {agg['best_mask']}")
    print(
        f"cost {agg['best_cost']:.3f} (mean {agg['cost_mean']:.3f} "
        f"+/- {agg['cost_std']:.3f} over {len(runs)} seeds)"
    )
    if "pred_bias" in agg and agg.get("pred_bias") is not None:
        line = f"predicted bias {agg['pred_bias']:.3f}"
        if "pred_bias_std" in agg:
            line += f" (mean {agg['pred_bias_mean']:.3f} +/- {agg['pred_bias_std']:.3f})"
        print(line)
    if "pred_ppl" in agg and agg.get("pred_ppl") is not None:
        print(f"predicted ppl {agg['pred_ppl']:.3f}")
    if "true_bias" in agg:
        print(f"oracle bias {agg['true_bias']:.3f}  oracle ppl {agg['true_ppl']:.3f}")
    return EXIT_OK


def cmd_sweep_epsilon(args) -> int:
    out = _ensure_out(args.out)
    manifest = RunManifest("sweep-epsilon", __version__, _config_snapshot(args))
    manifest.add_input(args.theta_bias)
    manifest.add_input(args.theta_ppl)
    if args.objective:
        manifest.add_input(args.objective)
    theta_bias, theta_ppl = _load_pair(args)
    seeds = _parse_int_list(args.seeds)
    eps_values = _parse_float_list(args.epsilons)
    for eps in eps_values:
        if not (0.0 <= eps <= 1.0):
            raise ConfigurationError(f"epsilon {eps} outside [0, 1]")
    rows = []
    per_eps = {}
    for eps in eps_values:
        _, runs = _run_chains(
            theta_bias, theta_ppl, args, eps, seeds, out, manifest,
            prefix=f"eps{eps:g}_",
        )
        rows.extend(runs)
        per_eps[eps] = _aggregate(runs)

    columns = ["epsilon", "seed", "best_mask", "best_cost", "pred_bias", "pred_ppl"]
    if args.objective:
        columns += ["true_bias", "true_ppl"]
    lines = ["\t".join(columns)]
    for r in rows:
        lines.append("\t".join(str(r.get(c, "")) for c in columns))
    table_path = os.path.join(out, "sweep.tsv")
    atomic_write_text(table_path, "\n".join(lines) + "\n")
    manifest.add_output(table_path)
    summary_path = os.path.join(out, "summary.json")
    atomic_write_json(
        summary_path,
        {"epsilons": eps_values, "per_epsilon": {str(k): v for k, v in per_eps.items()}},
    )
    manifest.add_output(summary_path)
    manifest.write(out)
    for eps in eps_values:
        agg = per_eps[eps]
        tail = ""
        if "true_bias" in agg:
            tail = f"  bias {agg['true_bias']:.3f}  ppl {agg['true_ppl']:.3f}"
        print(f"eps {eps:.2f}: cost {agg['best_cost']:.3f}{tail}")
    return EXIT_OK


def cmd_fasp(args) -> int:
    out = _ensure_out(args.out)
    manifest = RunManifest("fasp", __version__, _config_snapshot(args))
    manifest.add_input(args.effects)
    if args.objective:
        manifest.add_input(args.objective)
    effects = baselines.load_effect_table(args.effects)
    obj = oracle.load_objective(args.objective) if args.objective else None

    def evaluate_mask(mask):
        if obj is None:
            return None, None
        return oracle.evaluate(obj, mask)

    if args.sweep_alpha:
        if obj is None and args.theta_bias is None:
            raise ConfigurationError(
                "--sweep-alpha needs an evaluator: --objective or --theta-bias"
            )
        theta_bias = surrogate.load_regressor(args.theta_bias) if args.theta_bias else None
        grid = []
        for alpha in ALPHA_GRID:
            cfg = baselines.FaspConfig(alpha=alpha, gamma=args.gamma)
            try:
                mask = baselines.fasp_select(effects, cfg)
            except ConfigurationError:
                continue  # infeasible corner of the grid
            if obj is not None:
                bias, ppl = oracle.evaluate(obj, mask)
            else:
                bias, ppl = theta_bias.predict(mask), None
            grid.append({"alpha": alpha, "mask": mask.to_text(), "bias": bias, "ppl": ppl})
        if not grid:
            raise ConfigurationError("no feasible alpha in the sweep grid")
        chosen = min(grid, key=lambda g: g["bias"])
        payload = {
            "gamma": args.gamma,
            "grid": grid,
            "chosen_alpha": chosen["alpha"],
            "mask": chosen["mask"],
            "bias": chosen["bias"],
            "ppl": chosen["ppl"],
        }
        mask_text = chosen["mask"]
        bias, ppl = chosen["bias"], chosen["ppl"]
        print(f"alpha sweep ({len(grid)} feasible): picked alpha={chosen['alpha']}")
    else:
        if args.alpha is None:
            raise ConfigurationError("give --alpha or --sweep-alpha")
        cfg = baselines.FaspConfig(alpha=args.alpha, gamma=args.gamma)
        mask = baselines.fasp_select(effects, cfg)
        bias, ppl = evaluate_mask(mask)
        protected = baselines.fasp_protected_set(effects, cfg)
        payload = {
            "alpha": args.alpha,
            "gamma": args.gamma,
            "mask": mask.to_text(),
            "protected_heads": protected,
            "bias": bias,
            "ppl": ppl,
        }
        mask_text = mask.to_text()
    fasp_path = os.path.join(out, "fasp.json")
    atomic_write_json(fasp_path, payload)
    manifest.add_output(fasp_path)
    if bias is not None:
        result_path = os.path.join(out, "result.json")
        atomic_write_json(
            result_path,
            {"method": f"fasp(gamma={args.gamma})", "bias": bias, "ppl": ppl, "mask": mask_text},
        )
        manifest.add_output(result_path)
    manifest.write(out)
    print(f"mask ({mask_text.count('1')} heads): {mask_text}")
    if bias is not None:
        tail = f"  ppl {ppl:.3f}" if ppl is not None else ""
        print(f"bias {bias:.3f}{tail}")
    return EXIT_OK


def cmd_select(args) -> int:
    out = _ensure_out(args.out)
    manifest = RunManifest("select", __version__, _config_snapshot(args))
    if args.random:
        if args.n is None:
            raise ConfigurationError("--random needs --n")
        mask = baselines.random_select(args.n, args.alpha_max, args.seed)
        method = f"random(alpha_max={args.alpha_max})"
    else:
        if args.scores is None:
            raise ConfigurationError("give --scores or --random")
        manifest.add_input(args.scores)
        scores = baselines.load_score_file(args.scores)
        if args.alpha is None:
            raise ConfigurationError("score-ranked selection needs --alpha")
        mask = baselines.score_ranked_select(scores, args.alpha, args.direction)
        method = f"score-ranked({args.direction}, alpha={args.alpha})"
    payload = {"method": method, "mask": mask.to_text(), "weight": mask.weight()}
    if args.objective:
        manifest.add_input(args.objective)
        bias, ppl = _true_eval(args.objective, mask)
        payload["bias"] = bias
        payload["ppl"] = ppl
        result_path = os.path.join(out, "result.json")
        atomic_write_json(
            result_path, {"method": method, "bias": bias, "ppl": ppl, "mask": mask.to_text()}
        )
        manifest.add_output(result_path)
    sel_path = os.path.join(out, "selection.json")
    atomic_write_json(sel_path, payload)
    manifest.add_output(sel_path)
    manifest.write(out)
    print(f"mask ({mask.weight()} heads): {mask.to_text()}")
    return EXIT_OK


def _dominates(a, b) -> bool:
    return (
        a["bias"] <= b["bias"]
        and a["ppl"] <= b["ppl"]
        and (a["bias"] < b["bias"] or a["ppl"] < b["ppl"])
    )


def cmd_compare(args) -> int:
    if len(args.results) < 2:
        raise ConfigurationError("compare needs at least two result files")
    entries = []
    for path in args.results:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: bad JSON: {exc}") from exc
        for key in ("method", "bias", "ppl"):
            if key not in data or data[key] is None:
                raise DataError(f"{path}: result file lacks {key!r}")
        entries.append(
            {"method": str(data["method"]), "bias": float(data["bias"]), "ppl": float(data["ppl"])}
        )
    baseline = entries[0]
    for e in entries:
        e["bias_improvement_abs"] = baseline["bias"] - e["bias"]
        e["bias_improvement_rel"] = (
            (baseline["bias"] - e["bias"]) / baseline["bias"] if baseline["bias"] else 0.0
        )
        e["ppl_change"] = e["ppl"] - baseline["ppl"]
        e["wins_bias"] = e["bias"] < baseline["bias"]
        e["wins_ppl"] = e["ppl"] < baseline["ppl"]
    for e in entries:
        e["dominated"] = any(o is not e and _dominates(o, e) for o in entries)
    header = f"{'method':<32} {'bias':>8} {'ppl':>10} {'d_bias%':>8} {'dominated':>9}"
    print(header)
    for e in entries:
        print(
            f"{e['method']:<32} {e['bias']:>8.3f} {e['ppl']:>10.3f} "
            f"{100 * e['bias_improvement_rel']:>8.1f} {'yes' if e['dominated'] else 'no':>9}"
        )
    if args.out:
        out = _ensure_out(args.out)
        manifest = RunManifest("compare", __version__, _config_snapshot(args))
        for path in args.results:
            manifest.add_input(path)
        cmp_path = os.path.join(out, "comparison.json")
        atomic_write_json(cmp_path, {"baseline": baseline["method"], "entries": entries})
        manifest.add_output(cmp_path)
        manifest.write(out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.toxicity is None and args.losses is None:
        raise ConfigurationError("give --toxicity and/or --losses")
    payload = {}
    if args.toxicity:
        table = metrics.load_toxicity_table(args.toxicity, group_name=args.group)
        if args.subsample is not None:
            table = metrics.stratified_subsample(table, args.subsample, args.seed)
        report = metrics.compute_bias(table)
        payload["bias_report"] = report.to_dict()
        print(f"bias {report.bias:.3f}  mean toxicity {report.mean_toxicity:.3f}")
        for g, t in sorted(report.per_subgroup_toxicity.items()):
            print(f"  {g}: {t:.3f} (n={report.subgroup_sizes[g]})")
    if args.losses:
        table = metrics.load_loss_table(args.losses)
        ppl = metrics.compute_perplexity(table)
        payload["perplexity"] = ppl
        print(f"perplexity {ppl:.3f}")
    if args.out:
        out = _ensure_out(args.out)
        manifest = RunManifest("evaluate", __version__, _config_snapshot(args))
        if args.toxicity:
            manifest.add_input(args.toxicity)
        if args.losses:
            manifest.add_input(args.losses)
        report_path = os.path.join(out, "evaluation.json")
        atomic_write_json(report_path, payload)
        manifest.add_output(report_path)
        manifest.write(out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    if args.oracle_action == "make":
        maker = oracle.OBJECTIVE_KINDS[args.kind]
        kwargs = {"noise_sigma": args.noise_sigma}
        if args.kind == "random" and args.pair_count is not None:
            kwargs["pair_count"] = args.pair_count
        obj = maker(args.n, args.seed, **kwargs)
        oracle.save_objective(obj, args.out_file)
        print(f"wrote {args.kind} objective (n={args.n}) to {args.out_file}")
        return EXIT_OK
    obj = oracle.load_objective(args.objective)
    if args.oracle_action == "corpus":
        bounds = WeightBounds(args.n_l, args.n_u)
        recs = oracle.generate_corpus(obj, bounds, args.count, args.seed)
        records.save_corpus(recs, args.out_file)
        print(f"wrote {len(recs)} samples to {args.out_file}")
        return EXIT_OK
    if args.oracle_action == "exhaustive":
        bounds = WeightBounds(args.n_l, args.n_u)
        res = oracle.exhaustive_search(obj, bounds, args.epsilon)
        out = _ensure_out(args.out)
        payload = {
            "optimal_mask": res.optimal_mask.to_text(),
            "optimal_cost": res.optimal_cost,
            "optimal_bias": res.optimal_bias,
            "optimal_ppl": res.optimal_ppl,
            "states_enumerated": res.states_enumerated,
            "epsilon": args.epsilon,
            "n_l": bounds.n_l,
            "n_u": bounds.n_u,
        }
        atomic_write_json(os.path.join(out, "exhaustive.json"), payload)
        lines = ["bias\tppl\tmask"]
        for bias, ppl, mask in res.pareto:
            lines.append(f"{bias}\t{ppl}\t{mask.to_text()}")
        atomic_write_text(os.path.join(out, "pareto.tsv"), "\n".join(lines) + "\n")
        print(
            f"enumerated {res.states_enumerated} states; optimum cost "
            f"{res.optimal_cost:.3f} at {res.optimal_mask.to_text()}"
        )
        print(f"pareto frontier: {len(res.pareto)} points")
        return EXIT_OK
    if args.oracle_action == "effects":
        effects = oracle.head_effects(obj)
        baselines.save_effect_table(effects, args.out_file)
        print(f"wrote {effects.n} head effects to {args.out_file}")
        return EXIT_OK
    if args.oracle_action == "eval":
        mask = HeadMask.from_text(args.mask)
        bias, ppl = oracle.evaluate(obj, mask, args.seed)
        print(json.dumps({"mask": mask.to_text(), "bias": bias, "ppl": ppl}))
        return EXIT_OK
    raise ConfigurationError(f"unknown oracle action {args.oracle_action!r}")


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common_anneal_opts(p):
    p.add_argument("--theta-bias", required=True, help="bias regressor .npz")
    p.add_argument("--theta-ppl", required=True, help="perplexity regressor .npz")
    p.add_argument("--n-l", type=int, default=DEFAULT_N_L)
    p.add_argument("--n-u", type=int, default=None)
    p.add_argument("--eta", type=float, default=None,
                   help="set n_u = ceil(eta * N) instead of --n-u")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--time-limit-s", type=float, default=None)
    p.add_argument("--t0", type=float, default=None,
                   help="fixed initial temperature (default: estimated)")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--backend", default="auto", choices=["auto", "compiled", "numpy"])
    p.add_argument("--no-trace", action="store_true")
    p.add_argument("--objective", default=None,
                   help="synthetic objective file for ground-truth evaluation")
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="headanneal",
        description="Surrogate simulated annealing for fairness-aware head pruning",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-surrogate", help="train the bias/ppl regressor pair")
    p.add_argument("--corpus", required=True, help="JSON-lines of mask/bias/ppl samples")
    p.add_argument("--arch", default=None, help="layer sizes, e.g. 64,64,32,1")
    p.add_argument("--model", default=None, help=f"arch alias: {', '.join(ARCH_ALIASES)}")
    p.add_argument("--sigma", type=float, default=surrogate.DEFAULT_SIGMA,
                   help="std budget for the perplexity clamp")
    p.add_argument("--split", type=float, default=surrogate.DEFAULT_SPLIT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=surrogate.DEFAULT_LR)
    p.add_argument("--batch-size", type=int, default=surrogate.DEFAULT_BATCH)
    p.add_argument("--patience", type=int, default=surrogate.DEFAULT_PATIENCE)
    p.add_argument("--max-epochs", type=int, default=surrogate.DEFAULT_MAX_EPOCHS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_surrogate)

    p = sub.add_parser("anneal", help="search for a pruning mask with SA")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    _add_common_anneal_opts(p)
    p.set_defaults(func=cmd_anneal)

    p = sub.add_parser("sweep-epsilon", help="anneal across a grid of epsilon values")
    p.add_argument("--epsilons", default="0.3,0.4,0.5,0.6,0.7")
    _add_common_anneal_opts(p)
    p.set_defaults(func=cmd_sweep_epsilon)

    p = sub.add_parser("fasp", help="effect-ranked pruning with a protected set")
    p.add_argument("--effects", required=True, help="CSV of head_index,z_bias,z_ppl")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--sweep-alpha", action="store_true",
                   help=f"evaluate alpha in {{{ALPHA_GRID[0]}..{ALPHA_GRID[-1]}}} and pick min bias")
    p.add_argument("--objective", default=None)
    p.add_argument("--theta-bias", default=None,
                   help="bias regressor as the sweep evaluator instead of --objective")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fasp)

    p = sub.add_parser("select", help="score-ranked or random pruning baseline")
    p.add_argument("--scores", default=None, help="CSV of head_index,score")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--direction", default="prune-lowest",
                   choices=["prune-lowest", "prune-highest"])
    p.add_argument("--random", action="store_true")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--alpha-max", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objective", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("compare", help="side-by-side comparison of result files")
    p.add_argument("results", nargs="+")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("evaluate", help="bias/perplexity from pre-scored tables")
    p.add_argument("--toxicity", default=None)
    p.add_argument("--losses", default=None)
    p.add_argument("--group", default="")
    p.add_argument("--subsample", type=float, default=None,
                   help="stratified subsample fraction before scoring")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("oracle", help="synthetic objectives: generate and solve")
    osub = p.add_subparsers(dest="oracle_action", required=True)
    q = osub.add_parser("make")
    q.add_argument("--kind", choices=sorted(oracle.OBJECTIVE_KINDS), default="random")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--noise-sigma", type=float, default=0.0)
    q.add_argument("--pair-count", type=int, default=None)
    q.add_argument("--out-file", required=True)
    q = osub.add_parser("corpus")
    q.add_argument("--objective", required=True)
    q.add_argument("--count", type=int, required=True)
    q.add_argument("--n-l", type=int, default=0)
    q.add_argument("--n-u", type=int, required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out-file", required=True)
    q = osub.add_parser("exhaustive")
    q.add_argument("--objective", required=True)
    q.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    q.add_argument("--n-l", type=int, default=0)
    q.add_argument("--n-u", type=int, required=True)
    q.add_argument("--out", required=True)
    q = osub.add_parser("effects")
    q.add_argument("--objective", required=True)
    q.add_argument("--out-file", required=True)
    q = osub.add_parser("eval")
    q.add_argument("--objective", required=True)
    q.add_argument("--mask", required=True)
    q.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _inject_config(argv)
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except HeadAnnealError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
