"""Sentence-domain classifier whose general-domain probability drives the curriculum."""
from .model import ClassifierConfig, SentenceClassifier, load_classifier, save_classifier, score, train_classifier

__all__ = ["ClassifierConfig", "SentenceClassifier", "load_classifier", "save_classifier", "score",
           "train_classifier"]
