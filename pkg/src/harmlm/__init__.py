"""Harmful-content detection for web corpora with n-gram language models.

A modified Kneser-Ney model trained on harmful text only assigns low
perplexity to harmful documents; documents scoring at or below a
threshold are labeled harmful.
"""

from ._score import BACKEND
from .arpa import read_arpa, write_arpa
from .corpus import Document, Label, LabelRule, filter_by_annotation, read_jsonlines, split_dataset
from .metrics import ConfusionCounts, EvalReport, confusion, report
from .ngram import (
    KneserNeyModel,
    PerplexityScore,
    count_ngrams,
    estimate_discounts,
    estimate_model,
    logprob,
    perplexity,
    train,
)
from .textproc import Pipeline, lm_tokenize, run_pipeline
from .threshold import classify_by_threshold, summarize_distributions, sweep_thresholds

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfusionCounts",
    "Document",
    "EvalReport",
    "KneserNeyModel",
    "Label",
    "LabelRule",
    "PerplexityScore",
    "Pipeline",
    "classify_by_threshold",
    "confusion",
    "count_ngrams",
    "estimate_discounts",
    "estimate_model",
    "filter_by_annotation",
    "lm_tokenize",
    "logprob",
    "perplexity",
    "read_arpa",
    "read_jsonlines",
    "report",
    "run_pipeline",
    "split_dataset",
    "summarize_distributions",
    "sweep_thresholds",
    "train",
    "write_arpa",
]
