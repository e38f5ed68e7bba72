"""Expert rule language.

::

    RULE <name> WHEN <expr> [FOR <n>s] THEN <severity> <action>
    expr := and_expr ("OR" and_expr)*
    and_expr := cmp ("AND" cmp)*
    cmp := metric (">" | "<" | ">=" | "<=") number

Keywords are upper case. ``#`` starts a comment that runs to the end of the
line. Line breaks carry no meaning, so a rule may span several lines.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Union

METRICS = (
    "pd_magnitude_pc",
    "pd_rate_pps",
    "temp_c",
    "temp_rise_c_per_min",
    "temp_gradient_c_per_m",
    "current_a",
    "load_factor_pct",
    "thermal_margin_pct",
    "vibration_rms",
)
OPERATORS = (">=", "<=", ">", "<")


class Severity(str, Enum):
    INFO = "INFO"
    WARNING = "WARNING"
    CRITICAL = "CRITICAL"


class Action(str, Enum):
    RAISE_EVENT = "RAISE_EVENT"
    NOTIFY = "NOTIFY"
    RAISE_AND_NOTIFY = "RAISE_AND_NOTIFY"

    @property
    def notifies(self) -> bool:
        return self is not Action.RAISE_EVENT


# diagnosis category per metric
METRIC_LABEL = {
    "pd_magnitude_pc": "PartialDischarge",
    "pd_rate_pps": "PartialDischarge",
    "temp_c": "Overheating",
    "temp_rise_c_per_min": "Overheating",
    "temp_gradient_c_per_m": "Overheating",
    "current_a": "Overheating",
    "load_factor_pct": "Overheating",
    "thermal_margin_pct": "Overheating",
    "vibration_rms": "MechanicalStress",
}
LABEL_ORDER = ("PartialDischarge", "Overheating", "MechanicalStress")


class RuleSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int, expected: tuple[str, ...] = ()):
        self.line = line
        self.column = column
        self.expected = expected
        detail = f"; expected one of: {', '.join(expected)}" if expected else ""
        super().__init__(f"line {line}, column {column}: {message}{detail}")


@dataclass(frozen=True)
class Comparison:
    metric: str
    op: str
    threshold: float

    def holds(self, metrics: dict[str, float]) -> bool:
        v = metrics.get(self.metric)
        if v is None or math.isnan(v):
            return False
        if self.op == ">":
            return v > self.threshold
        if self.op == "<":
            return v < self.threshold
        if self.op == ">=":
            return v >= self.threshold
        return v <= self.threshold

    def ratio(self, metrics: dict[str, float]) -> float:
        """How far past the threshold the metric is, as observed/threshold (inverted for < and <=)."""
        v = metrics.get(self.metric, 0.0)
        num, den = (v, self.threshold) if self.op in (">", ">=") else (self.threshold, v)
        if den == 0:
            return math.inf if num > 0 else 1.0
        return num / den


@dataclass(frozen=True)
class And:
    terms: tuple["Condition", ...]


@dataclass(frozen=True)
class Or:
    terms: tuple["Condition", ...]


Condition = Union[Comparison, And, Or]


def holds(cond: Condition, metrics: dict[str, float]) -> bool:
    if isinstance(cond, Comparison):
        return cond.holds(metrics)
    if isinstance(cond, And):
        return all(holds(t, metrics) for t in cond.terms)
    return any(holds(t, metrics) for t in cond.terms)


def ratio(cond: Condition, metrics: dict[str, float]) -> float:
    """Exceedance ratio: min over AND terms, max over the OR terms that hold."""
    if isinstance(cond, Comparison):
        return cond.ratio(metrics)
    if isinstance(cond, And):
        return min(ratio(t, metrics) for t in cond.terms)
    live = [ratio(t, metrics) for t in cond.terms if holds(t, metrics)]
    return max(live) if live else max(ratio(t, metrics) for t in cond.terms)


def comparisons(cond: Condition) -> list[Comparison]:
    if isinstance(cond, Comparison):
        return [cond]
    return [c for t in cond.terms for c in comparisons(t)]


@dataclass(frozen=True)
class Rule:
    name: str
    condition: Condition
    sustain_s: float
    severity: Severity
    action: Action

    @property
    def metrics(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(c.metric for c in comparisons(self.condition)))

    @property
    def label(self) -> str:
        """Diagnosis category: the first in PD, thermal, mechanical order that the rule touches."""
        labels = {METRIC_LABEL[m] for m in self.metrics}
        return next(lbl for lbl in LABEL_ORDER if lbl in labels)

    def score(self, metrics: dict[str, float]) -> float:
        return 100.0 * max(0.0, min(1.0, ratio(self.condition, metrics) - 1.0 + 0.5))


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...] = ()

    def __iter__(self):
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def get(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def max_sustain_s(self) -> float:
        return max((r.sustain_s for r in self.rules), default=0.0)


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<duration>[0-9]+(?:\.[0-9]+)?s\b)
  | (?P<number>[-+]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][-+]?[0-9]+)?)
  | (?P<op>>=|<=|>|<)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise RuleSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, expected: tuple[str, ...], what: str | None = None) -> None:
        t = self.cur
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise RuleSyntaxError(what or f"unexpected {found}", t.line, t.col, expected)

    def keyword(self, kw: str) -> None:
        if self.cur.kind == "word" and self.cur.text == kw:
            self.i += 1
            return
        self.fail((kw,))

    def rules(self) -> RuleSet:
        out: list[Rule] = []
        names: set[str] = set()
        while self.cur.kind != "eof":
            start = self.cur
            rule = self.rule()
            if rule.name in names:
                raise RuleSyntaxError(f"duplicate rule name {rule.name!r}", start.line, start.col)
            names.add(rule.name)
            out.append(rule)
        return RuleSet(tuple(out))

    def rule(self) -> Rule:
        self.keyword("RULE")
        if self.cur.kind != "word":
            self.fail(("<rule name>",))
        name = self.cur.text
        self.i += 1
        self.keyword("WHEN")
        cond = self.expr()
        sustain = 0.0
        if self.cur.kind == "word" and self.cur.text == "FOR":
            self.i += 1
            if self.cur.kind != "duration":
                self.fail(("<seconds>s",))
            sustain = float(self.cur.text[:-1])
            self.i += 1
        elif self.cur.kind == "word" and self.cur.text != "THEN":
            self.fail(("AND", "OR", "FOR", "THEN"))
        self.keyword("THEN")
        severity = self.enum(Severity)
        action = self.enum(Action)
        return Rule(name, cond, sustain, severity, action)

    def enum(self, cls):
        choices = tuple(m.value for m in cls)
        if self.cur.kind == "word" and self.cur.text in choices:
            v = cls(self.cur.text)
            self.i += 1
            return v
        self.fail(choices)

    def expr(self) -> Condition:
        terms = [self.and_expr()]
        while self.cur.kind == "word" and self.cur.text == "OR":
            self.i += 1
            terms.append(self.and_expr())
        return terms[0] if len(terms) == 1 else Or(tuple(terms))

    def and_expr(self) -> Condition:
        terms = [self.cmp()]
        while self.cur.kind == "word" and self.cur.text == "AND":
            self.i += 1
            terms.append(self.cmp())
        return terms[0] if len(terms) == 1 else And(tuple(terms))

    def cmp(self) -> Comparison:
        t = self.cur
        if t.kind != "word":
            self.fail(("<metric>",))
        if t.text not in METRICS:
            raise RuleSyntaxError(f"unknown metric {t.text}", t.line, t.col, METRICS)
        self.i += 1
        if self.cur.kind != "op":
            self.fail(OPERATORS)
        op = self.cur.text
        self.i += 1
        if self.cur.kind != "number":
            self.fail(("<number>",))
        value = float(self.cur.text)
        self.i += 1
        return Comparison(t.text, op, value)


def parse_rules(text: str) -> RuleSet:
    return _Parser(_tokenize(text)).rules()
