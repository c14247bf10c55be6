from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .metrics import bleu


@dataclass
class RobustnessMatrix:
    """``cells[J][i]``: BLEU of the model fine-tuned on domain ``J`` on test domain ``i``."""

    domains: list[str]
    cells: np.ndarray
    baseline: np.ndarray

    @property
    def avg_diff(self) -> float:
        return float(np.mean(self.cells - self.baseline[None, :]))

    def to_dict(self) -> dict:
        return {"domains": self.domains, "cells": self.cells.tolist(), "baseline": self.baseline.tolist(),
                "avg_diff": self.avg_diff}


def robustness_matrix(models: dict, test_sets: dict[str, tuple[Sequence[str], Sequence[str]]], baseline,
                      translate: Callable[[object, Sequence[str]], list[str]],
                      domains: Sequence[str] | None = None) -> RobustnessMatrix:
    """Evaluate every fine-tuned model on every domain's test set.

    ``test_sets[d]`` is ``(sources, references)``; ``translate(model, sources)``
    returns hypotheses.  ``baseline`` is a model evaluated the same way.
    """
    domains = list(domains if domains is not None else test_sets)
    missing = [d for d in domains if d not in models or d not in test_sets]
    if missing:
        raise ValueError(f"no fine-tuned model or test set for domains {missing}")
    cells = np.zeros((len(domains), len(domains)))
    for j, dj in enumerate(domains):
        for i, di in enumerate(domains):
            src, ref = test_sets[di]
            cells[j, i] = bleu(translate(models[dj], src), ref)
    base = np.array([bleu(translate(baseline, test_sets[d][0]), test_sets[d][1]) for d in domains])
    return RobustnessMatrix(domains, cells, base)
