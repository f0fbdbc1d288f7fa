"""Command line for the collection harness.

    headcollect samples --prompts prompts.csv --corpus corpus.txt --out DIR ...
    headcollect effects --prompts prompts.csv --corpus corpus.txt --out DIR ...

The default model is the built-in seeded tiny model ('tiny-random'), which
runs on CPU with no downloads; pass --model PATH_OR_NAME for a real
GPT-2-family checkpoint.
"""

from __future__ import annotations

import argparse
import sys

from .collect import CollectorConfig, collect_head_effects, collect_samples
from .modeling import build_tiny_model, load_pretrained_model
from .textdata import load_corpus_lines, load_prompts


def add_common(p):
    p.add_argument("--prompts", required=True, help="CSV/JSONL: prompt_id, subgroup, text")
    p.add_argument("--corpus", required=True, help="plain text, one sequence per line")
    p.add_argument("--model", default="tiny-random")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--embd", type=int, default=64)
    p.add_argument("--model-seed", type=int, default=0)
    p.add_argument("--eta-bias", type=float, default=0.2)
    p.add_argument("--eta-ppl", type=float, default=1.0)
    p.add_argument("--gen-tokens", type=int, default=16)
    p.add_argument("--top-k", type=int, default=20)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scorer", default="lexicon", choices=["lexicon", "none"])
    p.add_argument("--out", required=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="headcollect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("samples", help="collect mask/bias/ppl sample records")
    add_common(p)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--n-l", type=int, default=0)
    p.add_argument("--n-u", type=int, default=2)
    p.add_argument("--no-baseline", action="store_true",
                   help="do not force the first record to the all-zero mask")
    p = sub.add_parser("effects", help="single-head ablation effect table")
    add_common(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    prompts = load_prompts(args.prompts)
    corpus = load_corpus_lines(args.corpus)
    if args.model == "tiny-random":
        model = build_tiny_model(
            prompts.texts + corpus,
            layers=args.layers,
            heads=args.heads,
            embd=args.embd,
            seed=args.model_seed,
        )
    else:
        model = load_pretrained_model(args.model)
    cfg = CollectorConfig(
        model_spec=args.model,
        layers=model.n_layer,
        heads=model.n_head,
        embd=args.embd,
        model_seed=args.model_seed,
        eta_bias=args.eta_bias,
        eta_ppl=args.eta_ppl,
        n_l=getattr(args, "n_l", 0),
        n_u=getattr(args, "n_u", 0),
        count=getattr(args, "count", 1),
        gen_tokens=args.gen_tokens,
        top_k=args.top_k,
        temperature=args.temperature,
        seed=args.seed,
        scorer=args.scorer,
        include_baseline=not getattr(args, "no_baseline", False),
    )
    if args.command == "samples":
        manifest = collect_samples(model, prompts, corpus, cfg, args.out)
        print(
            f"wrote {manifest['records']} records "
            f"(baseline ppl {manifest['baseline_ppl']:.3f}) to {args.out}"
        )
    else:
        manifest = collect_head_effects(model, prompts, corpus, cfg, args.out)
        print(
            f"wrote {manifest['head_count']} head effects "
            f"(baseline bias {manifest['baseline_bias']:.3f}, "
            f"ppl {manifest['baseline_ppl']:.3f}) to {args.out}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
