"""Model wrapper: head masking, perplexity scoring, and generation.

Masks are applied without touching weights: a forward pre-hook on each
attention block's output projection zeroes the channel slice belonging to
every pruned head. Head h of layer l occupies channels
[h*head_dim, (h+1)*head_dim) of the projection input, so zeroing them is
exactly equivalent to dropping that head's contribution. Hooks are removed
when the context exits, leaving the model untouched.

Head indices flatten layer-major: index = layer * heads_per_layer + head.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np
import torch
import transformers

from .textdata import WordTokenizer

transformers.logging.set_verbosity_error()


class MaskableModel:
    """A causal LM plus tokenizer that can score and generate under a mask."""

    def __init__(self, model, encode, decode, n_layer, n_head, n_positions):
        self.model = model.eval()
        self.encode = encode
        self.decode = decode
        self.n_layer = n_layer
        self.n_head = n_head
        self.n_positions = n_positions
        self.head_dim = model.config.n_embd // n_head

    @property
    def n(self) -> int:
        return self.n_layer * self.n_head

    def _attention_blocks(self):
        return [block.attn.c_proj for block in self.model.transformer.h]

    @contextmanager
    def masked(self, bits):
        """Temporarily drop the heads whose bits are 1."""
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.size != self.n:
            raise ValueError(f"mask width {bits.size} != head count {self.n}")
        handles = []
        hd = self.head_dim
        try:
            for layer, proj in enumerate(self._attention_blocks()):
                dropped = [
                    h for h in range(self.n_head) if bits[layer * self.n_head + h]
                ]
                if not dropped:
                    continue

                def zero_heads(module, args, dropped=tuple(dropped)):
                    x = args[0].clone()
                    for h in dropped:
                        x[..., h * hd : (h + 1) * hd] = 0.0
                    return (x,) + args[1:]

                handles.append(proj.register_forward_pre_hook(zero_heads))
            yield
        finally:
            for handle in handles:
                handle.remove()

    def sequence_nll(self, ids) -> tuple[float, int]:
        """(mean negative log-likelihood, predicted token count) of one line."""
        ids = ids[: self.n_positions]
        if len(ids) < 2:
            return 0.0, 0
        tensor = torch.tensor([ids], dtype=torch.long)
        with torch.no_grad():
            out = self.model(tensor, labels=tensor)
        return float(out.loss), len(ids) - 1

    def corpus_perplexity(self, lines, bits) -> float:
        """Token-weighted perplexity over text lines under the mask."""
        total_nll = 0.0
        total_tokens = 0
        with self.masked(bits):
            for line in lines:
                nll, count = self.sequence_nll(self.encode(line))
                total_nll += nll * count
                total_tokens += count
        if total_tokens == 0:
            raise ValueError("corpus contributed no scorable tokens")
        return math.exp(total_nll / total_tokens)

    def generate(self, prompt_ids, bits, gen_tokens, top_k, temperature, seed) -> list[int]:
        """Sample a continuation under the mask; returns new token ids only."""
        generator = torch.Generator().manual_seed(int(seed))
        max_prompt = self.n_positions - gen_tokens
        ids = list(prompt_ids[-max_prompt:]) if max_prompt > 0 else []
        produced = []
        with self.masked(bits), torch.no_grad():
            for _ in range(gen_tokens):
                tensor = torch.tensor([ids], dtype=torch.long)
                logits = self.model(tensor).logits[0, -1, :] / temperature
                if top_k and top_k < logits.shape[-1]:
                    kth = torch.topk(logits, top_k).values[-1]
                    logits = logits.masked_fill(logits < kth, -float("inf"))
                probs = torch.softmax(logits, dim=-1)
                nxt = int(torch.multinomial(probs, 1, generator=generator))
                ids.append(nxt)
                produced.append(nxt)
                if len(ids) >= self.n_positions:
                    break
        return produced


def build_tiny_model(texts, layers=2, heads=4, embd=64, seed=0, n_positions=128):
    """Randomly initialized small GPT-2-family model over a local vocabulary.

    Needs no downloads: the tokenizer vocabulary comes from the provided
    texts and the weights from the seed, so runs are fully reproducible.
    """
    from transformers import GPT2Config, GPT2LMHeadModel

    tokenizer = WordTokenizer(texts)
    torch.manual_seed(seed)
    config = GPT2Config(
        vocab_size=tokenizer.vocab_size,
        n_positions=n_positions,
        n_embd=embd,
        n_layer=layers,
        n_head=heads,
        bos_token_id=None,
        eos_token_id=None,
    )
    model = GPT2LMHeadModel(config)
    return MaskableModel(
        model, tokenizer.encode, tokenizer.decode, layers, heads, n_positions
    )


def load_pretrained_model(name_or_path):
    """A GPT-2-family checkpoint from a local path or the hub."""
    from transformers import AutoModelForCausalLM, AutoTokenizer

    tok = AutoTokenizer.from_pretrained(name_or_path)
    model = AutoModelForCausalLM.from_pretrained(name_or_path)
    config = model.config
    if not hasattr(model, "transformer") or not hasattr(model.transformer, "h"):
        raise ValueError(
            f"{name_or_path}: unsupported architecture; need a GPT-2-family stack"
        )
    return MaskableModel(
        model,
        lambda text: tok.encode(text),
        lambda ids: tok.decode(ids),
        config.n_layer,
        config.n_head,
        config.n_positions,
    )


def load_model(spec, **tiny_kwargs):
    if spec == "tiny-random":
        return build_tiny_model(**tiny_kwargs)
    return load_pretrained_model(spec)
