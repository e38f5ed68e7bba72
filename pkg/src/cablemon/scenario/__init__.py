"""Scenario runs, labeled corpora and accuracy scoring."""

from .corpus import LABELS, CorpusEntry, LabeledCorpus, generate_corpus, load_corpus
from .evaluate import AccuracyReport, evaluate_accuracy
from .harness import ComponentError, Pipeline, SocketPipeline
from .runner import Check, TrialReport, ground_truth, run_scenario, tick_times
from .trial import replay_trial, trial_scenario, trial_scenario_text

__all__ = [
    "LABELS",
    "AccuracyReport",
    "Check",
    "ComponentError",
    "CorpusEntry",
    "LabeledCorpus",
    "Pipeline",
    "SocketPipeline",
    "TrialReport",
    "evaluate_accuracy",
    "generate_corpus",
    "ground_truth",
    "load_corpus",
    "replay_trial",
    "run_scenario",
    "tick_times",
    "trial_scenario",
    "trial_scenario_text",
]
