"""Edge server: rule engine, fault classification, archival, publishing and notification."""

from importlib import resources

from .diagnosis import FaultDiagnosis, classify_fault
from .engine import Event, RuleEngine, evaluate_rules
from .notify import FileSink, Notifier, WebhookSink, notify
from .rules import Action, Rule, RuleSet, RuleSyntaxError, Severity, parse_rules
from .server import CircuitInfo, EdgeConfig, EdgeServer, ImuEndpoint, events_topic, kpi_topic, poll_loop
from .store import CorruptSegment, OutOfOrderAppend, TimeSeriesStore, store_append, store_query


def default_rules() -> RuleSet:
    return parse_rules(resources.files("cablemon.data").joinpath("default.rules").read_text())


__all__ = [
    "Action",
    "CircuitInfo",
    "CorruptSegment",
    "EdgeConfig",
    "EdgeServer",
    "Event",
    "FaultDiagnosis",
    "FileSink",
    "ImuEndpoint",
    "Notifier",
    "OutOfOrderAppend",
    "Rule",
    "RuleEngine",
    "RuleSet",
    "RuleSyntaxError",
    "Severity",
    "TimeSeriesStore",
    "WebhookSink",
    "classify_fault",
    "default_rules",
    "evaluate_rules",
    "events_topic",
    "kpi_topic",
    "notify",
    "parse_rules",
    "poll_loop",
    "store_append",
    "store_query",
]
