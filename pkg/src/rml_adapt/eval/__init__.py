"""Decoding, translation metrics and the cross-domain robustness matrix."""
from .beam import (
    BeamConfig, Hypothesis, beam_decode, beam_decode_batch, beam_search, greedy_decode, greedy_search,
    model_step_fn,
)
from .metrics import bleu, bleu_stats, chrf, ngrams
from .robustness import RobustnessMatrix, robustness_matrix

__all__ = ["BeamConfig", "Hypothesis", "RobustnessMatrix", "beam_decode", "beam_decode_batch", "beam_search",
           "bleu", "bleu_stats", "chrf", "greedy_decode", "greedy_search", "model_step_fn", "ngrams",
           "robustness_matrix"]
