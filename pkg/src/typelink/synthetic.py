"""Synthetic typing corpora with known structure, for tests and benchmarks."""

from __future__ import annotations

import random
from typing import Sequence

from .typer import TrainingExample


def separable_corpus(groups: Sequence[str], per_group: int, seed: int = 42, vocab_size: int = 30,
                     context_len: int = 6, mention_vocab: int = 50) -> list[TrainingExample]:
    """Single-label examples whose context words come from a per-group vocabulary.

    Context vocabularies are disjoint across groups, so the labels are
    linearly separable on the context features alone. Mention tokens are drawn
    from a shared pool and carry no signal.
    """
    rng = random.Random(seed)
    out = []
    for gi, g in enumerate(groups):
        vocab = [f"g{gi}w{i}" for i in range(vocab_size)]
        for _ in range(per_group):
            left = tuple(rng.choice(vocab) for _ in range(context_len))
            right = tuple(rng.choice(vocab) for _ in range(context_len))
            mention = tuple(f"term{rng.randrange(mention_vocab)}" for _ in range(rng.randint(1, 3)))
            out.append(TrainingExample(left, mention, right, frozenset({g})))
    rng.shuffle(out)
    return out


def noisy_corpus(groups: Sequence[str], per_group: int, seed: int, vocab_size: int = 60,
                 cue_tokens: int = 2, noise_tokens: int = 6, noise_vocab: int = 400) -> list[TrainingExample]:
    """Examples carrying a few group-specific cue words among shared noise words.

    With a large cue vocabulary, a handful of examples per group covers only a
    fraction of the cues; a model pretrained on a larger sample of the same
    distribution has seen most of them.
    """
    rng = random.Random(seed)
    out = []
    for gi, g in enumerate(groups):
        vocab = [f"g{gi}c{i}" for i in range(vocab_size)]
        for _ in range(per_group):
            ctx = [rng.choice(vocab) for _ in range(cue_tokens)]
            ctx += [f"n{rng.randrange(noise_vocab)}" for _ in range(noise_tokens)]
            rng.shuffle(ctx)
            half = len(ctx) // 2
            mention = (f"term{rng.randrange(200)}",)
            out.append(TrainingExample(tuple(ctx[:half]), mention, tuple(ctx[half:]), frozenset({g})))
    rng.shuffle(out)
    return out


def split(examples: Sequence[TrainingExample], train_fraction: float = 0.8
          ) -> tuple[list[TrainingExample], list[TrainingExample]]:
    cut = int(round(len(examples) * train_fraction))
    return list(examples[:cut]), list(examples[cut:])
