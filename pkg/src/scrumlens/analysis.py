"""Research-question analyses over survey responses and development measurements.

Each ``rq*`` function returns a list of :class:`AnalysisEntry` rows; an entry
whose ``result`` is ``None`` was not testable and says why in ``reason``.
:func:`run_analysis` assembles everything into an :class:`AnalysisReport`.

Sign convention: ratings run from 1 (strongly agree) to 5 (strongly disagree),
so agreement with a practice that shows up as *more* of that practice in the
data appears as a negative tau against raw measurement values.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .errors import DataError, UndefinedStatisticError
from .measurements import MEASURES, MeasureId, MeasurementRecord
from .stats import (
    PairwiseResult,
    StatTestResult,
    bonferroni,
    dunn_test,
    friedman_test,
    kendall_tau,
    krippendorff_alpha,
    kruskal_wallis,
    wilcoxon_signed_rank,
)
from .store import Role
from .survey import QUESTIONS, DescriptiveStats, LikertResponse, QuestionId, check_unique, descriptive_stats

DEFAULT_PLAN: tuple[tuple[QuestionId, MeasureId], ...] = (
    (QuestionId.Q1, MeasureId.RTA),
    (QuestionId.Q2, MeasureId.UFE),
    (QuestionId.Q5, MeasureId.LMC),
    (QuestionId.Q6, MeasureId.ALC),
    (QuestionId.Q7, MeasureId.UUS),
    (QuestionId.Q8, MeasureId.PRC),
)
ROLE_ORDER = (Role.PRODUCT_OWNER, Role.SCRUM_MASTER, Role.DEVELOPER)
HISTOGRAM_BINS = 10


def parse_plan(pairs: Iterable[Sequence[str]]) -> tuple[tuple[QuestionId, MeasureId], ...]:
    return tuple((QuestionId(q.upper()), MeasureId(m.upper())) for q, m in pairs)


def load_plan(path: str | os.PathLike) -> tuple[tuple[QuestionId, MeasureId], ...]:
    """Read a pairing plan: a JSON list of ``["Q1", "RTA"]`` pairs."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    try:
        return parse_plan(data)
    except (ValueError, TypeError) as exc:
        raise DataError(f"{path}: invalid pairing plan: {exc}") from exc


@dataclass(frozen=True)
class AnalysisConfig:
    pooling: str = "pooled"  # "pooled" | "per-team" for the Friedman analysis
    exclude_pos: bool = False  # scope of the main team-agreement table
    plan: tuple[tuple[QuestionId, MeasureId], ...] = DEFAULT_PLAN
    alpha_level: float = 0.05  # omnibus gate for post hoc tests
    agreement_units: str = "question_sprint"  # or "question"
    timestamp: str | None = None

    def __post_init__(self) -> None:
        if self.pooling not in ("pooled", "per-team"):
            raise ValueError(f"pooling must be 'pooled' or 'per-team', got {self.pooling!r}")
        if self.agreement_units not in ("question_sprint", "question"):
            raise ValueError(f"agreement_units must be 'question_sprint' or 'question', got {self.agreement_units!r}")

    def canonical(self) -> dict[str, Any]:
        return {
            "pooling": self.pooling,
            "exclude_pos": self.exclude_pos,
            "plan": [[q.value, m.value] for q, m in self.plan],
            "alpha_level": self.alpha_level,
            "agreement_units": self.agreement_units,
        }

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class AnalysisEntry:
    label: str
    result: StatTestResult | None
    reason: str = ""
    n: int = 0
    info: dict[str, Any] = field(default_factory=dict)

    @property
    def testable(self) -> bool:
        return self.result is not None


@dataclass(frozen=True)
class AnalysisReport:
    survey_descriptives: dict[QuestionId, DescriptiveStats]
    perception_change: list[AnalysisEntry]
    value_associations: list[AnalysisEntry]
    role_effects: list[AnalysisEntry]
    team_agreement: list[AnalysisEntry]
    team_agreement_alt: list[AnalysisEntry]
    role_agreement: list[AnalysisEntry]
    measurement_descriptives: dict[MeasureId, DescriptiveStats] | None
    measurement_histograms: dict[MeasureId, tuple[list[float], list[int]]] | None
    survey_measurement_associations: list[AnalysisEntry] | None
    metadata: dict[str, Any]
    config: AnalysisConfig


# --------------------------------------------------------------------------- survey shaping


def _ratings(responses: Iterable[LikertResponse], question: QuestionId) -> list[LikertResponse]:
    return [r for r in responses if r.question == question]


def _by_subject(responses: Iterable[LikertResponse]) -> dict[tuple[str, int], dict[QuestionId, int | None]]:
    out: dict[tuple[str, int], dict[QuestionId, int | None]] = defaultdict(dict)
    for r in responses:
        out[(r.developer_id, r.sprint_id)][r.question] = r.rating
    return out


def survey_descriptives(responses: Sequence[LikertResponse]) -> dict[QuestionId, DescriptiveStats]:
    return {q: descriptive_stats(r.rating for r in _ratings(responses, q)) for q in QUESTIONS}


# --------------------------------------------------------------------------- RQ1


def _friedman_for(responses: Sequence[LikertResponse], question: QuestionId, label: str, alpha: float) -> AnalysisEntry:
    rows = _ratings(responses, question)
    sprints = sorted({r.sprint_id for r in rows})
    if len(sprints) < 2:
        return AnalysisEntry(label, None, "not testable: fewer than 2 sprints")
    series: dict[str, dict[int, int]] = defaultdict(dict)
    for r in rows:
        if r.rating is not None:
            series[r.developer_id][r.sprint_id] = r.rating
    complete = sorted(dev for dev, s in series.items() if all(sp in s for sp in sprints))
    if len(complete) < 2:
        return AnalysisEntry(label, None, "not testable: fewer than 2 complete response series", n=len(complete))
    matrix = np.array([[series[dev][sp] for sp in sprints] for dev in complete], dtype=float)
    result = friedman_test(matrix)
    if result.p_value is not None and result.p_value < alpha:
        pairs = list(itertools.combinations(range(len(sprints)), 2))
        tests = [wilcoxon_signed_rank(matrix[:, i], matrix[:, j]) for i, j in pairs]
        adjusted = bonferroni([t.p_value for t in tests], len(pairs))
        posthoc = tuple(
            PairwiseResult(
                str(sprints[i]), str(sprints[j]), t.extras["z"], t.p_value, pa,
                {"w": t.statistic, "n": t.extras["n"], "exact": t.extras["exact"]},
            )
            for (i, j), t, pa in zip(pairs, tests, adjusted)
        )
        result = replace(result, posthoc=posthoc)
    return AnalysisEntry(label, result, n=len(complete), info={"sprints": sprints})


def rq1_perception_change(
    responses: Sequence[LikertResponse], *, pooling: str = "pooled", alpha: float = 0.05
) -> list[AnalysisEntry]:
    """Friedman test per question with sprints as treatments and respondents as blocks.

    Respondents missing any sprint for a question are dropped for that question.
    Significant questions get Bonferroni-adjusted Wilcoxon tests for every sprint pair.
    With ``pooling="per-team"`` one test is run per (team, question).
    """
    if pooling == "pooled":
        return [_friedman_for(responses, q, q.value, alpha) for q in QUESTIONS]
    out = []
    for team in sorted({r.team_id for r in responses}):
        team_rows = [r for r in responses if r.team_id == team]
        out.extend(_friedman_for(team_rows, q, f"{team}:{q.value}", alpha) for q in QUESTIONS)
    return out


# --------------------------------------------------------------------------- RQ2


def associate_questions(responses: Sequence[LikertResponse], qa: QuestionId, qb: QuestionId) -> AnalysisEntry:
    label = f"{qa.value} to {qb.value}"
    subjects = _by_subject(responses)
    keys = sorted(subjects)
    x = [subjects[k].get(qa) for k in keys]
    y = [subjects[k].get(qb) for k in keys]
    n = sum(1 for a, b in zip(x, y) if a is not None and b is not None)
    try:
        return AnalysisEntry(label, kendall_tau(x, y), n=n)
    except UndefinedStatisticError as exc:
        return AnalysisEntry(label, None, f"undefined: {exc}", n=n)


def rq2_value_associations(
    responses: Sequence[LikertResponse], target: QuestionId = QuestionId.Q9
) -> list[AnalysisEntry]:
    """Kendall's tau of each practice claim against the agile-values claim."""
    return [associate_questions(responses, q, target) for q in QUESTIONS if q != target]


# --------------------------------------------------------------------------- RQ3


def rq3_role_effects(responses: Sequence[LikertResponse], *, alpha: float = 0.05) -> list[AnalysisEntry]:
    """Kruskal-Wallis across Scrum roles per question, Dunn post hoc when significant.

    Roles without any valid rating for a question are left out of that test; the
    per-role valid and missing counts are kept in ``info``.
    """
    out = []
    for q in QUESTIONS:
        rows = _ratings(responses, q)
        valid = {role: [r.rating for r in rows if r.role == role and r.rating is not None] for role in ROLE_ORDER}
        missing = {role.value: sum(1 for r in rows if r.role == role and r.rating is None) for role in ROLE_ORDER}
        info = {"valid_by_role": {role.value: len(v) for role, v in valid.items()}, "missing_by_role": missing}
        present = [role for role in ROLE_ORDER if valid[role]]
        n = sum(len(valid[role]) for role in present)
        if len(present) < 2:
            out.append(AnalysisEntry(q.value, None, "not testable: fewer than 2 roles answered", n=n, info=info))
            continue
        groups = [valid[role] for role in present]
        result = kruskal_wallis(groups)
        if result.p_value is not None and result.p_value < alpha:
            result = replace(result, posthoc=tuple(dunn_test(groups, [role.value for role in present])))
        info["roles"] = [role.value for role in present]
        out.append(AnalysisEntry(q.value, result, n=n, info=info))
    return out


# --------------------------------------------------------------------------- RQ4


def agreement_matrix(
    responses: Sequence[LikertResponse], raters: Sequence[str], units: str = "question_sprint"
) -> list[list[float | None]]:
    """Units x raters rating matrix; units are (question, sprint) cells or questions."""
    cell: dict[tuple[QuestionId, int], dict[str, int]] = defaultdict(dict)
    for r in responses:
        if r.rating is not None:
            cell[(r.question, r.sprint_id)][r.developer_id] = r.rating
    if units == "question_sprint":
        keys = sorted(cell, key=lambda k: (QUESTIONS.index(k[0]), k[1]))
        return [[cell[k].get(d) for d in raters] for k in keys]
    rows = []
    for q in QUESTIONS:
        per_rater = []
        for d in raters:
            vals = [cell[k][d] for k in cell if k[0] == q and d in cell[k]]
            per_rater.append(float(np.median(vals)) if vals else None)
        rows.append(per_rater)
    return rows


def _alpha_entry(label: str, rows: Sequence[LikertResponse], units: str) -> AnalysisEntry:
    raters = sorted({r.developer_id for r in rows if r.rating is not None})
    if len(raters) < 2:
        return AnalysisEntry(label, None, "not computable: fewer than 2 raters", n=len(raters))
    matrix = agreement_matrix(rows, raters, units)
    pairable_units = sum(1 for row in matrix if sum(v is not None for v in row) >= 2)
    if pairable_units < 2:
        return AnalysisEntry(label, None, "not computable: fewer than 2 units rated twice", n=len(raters))
    try:
        result = krippendorff_alpha(matrix)
    except UndefinedStatisticError as exc:
        return AnalysisEntry(label, None, f"not computable: {exc}", n=len(raters))
    return AnalysisEntry(label, result, n=len(raters), info={"units": pairable_units})


def rq4_team_agreement(
    responses: Sequence[LikertResponse],
    *,
    scope: str = "all",
    grouping: str = "team",
    units: str = "question_sprint",
) -> list[AnalysisEntry]:
    """Krippendorff's alpha (ordinal) per team or per role.

    ``scope="exclude_pos"`` drops Product Owners before grouping.
    """
    if scope not in ("all", "exclude_pos"):
        raise ValueError(f"scope must be 'all' or 'exclude_pos', got {scope!r}")
    rows = [r for r in responses if scope == "all" or r.role != Role.PRODUCT_OWNER]
    if grouping == "team":
        groups = sorted({r.team_id for r in responses}, key=_natural_key)
        return [_alpha_entry(t, [r for r in rows if r.team_id == t], units) for t in groups]
    if grouping == "role":
        roles = [role for role in ROLE_ORDER if scope == "all" or role != Role.PRODUCT_OWNER]
        return [_alpha_entry(role.value, [r for r in rows if r.role == role], units) for role in roles]
    raise ValueError(f"grouping must be 'team' or 'role', got {grouping!r}")


def _natural_key(s: str) -> tuple:
    return (0, int(s), "") if s.isdigit() else (1, 0, s)


# --------------------------------------------------------------------------- RQ5 / RQ6


def measurement_descriptives(
    records: Sequence[MeasurementRecord], bins: int = HISTOGRAM_BINS
) -> tuple[dict[MeasureId, DescriptiveStats], dict[MeasureId, tuple[list[float], list[int]]]]:
    """Descriptive statistics and histogram (edges, counts) per measure, in RTA..PRC order."""
    table: dict[MeasureId, DescriptiveStats] = {}
    hist: dict[MeasureId, tuple[list[float], list[int]]] = {}
    for m in MEASURES:
        values = [r.value for r in records if r.measure == m]
        table[m] = descriptive_stats(values)
        present = np.array([v for v in values if v is not None], dtype=float)
        if present.size:
            counts, edges = np.histogram(present, bins=bins)
            hist[m] = (edges.tolist(), counts.tolist())
        else:
            hist[m] = ([], [])
    return table, hist


def rq6_survey_measurement_associations(
    responses: Sequence[LikertResponse],
    records: Sequence[MeasurementRecord],
    plan: Sequence[tuple[QuestionId, MeasureId]] = DEFAULT_PLAN,
) -> list[AnalysisEntry]:
    """Kendall's tau between a claim's ratings and a measurement, joined on (developer, sprint)."""
    survey = _by_subject(responses)
    measured: dict[tuple[str, int], dict[MeasureId, float | None]] = defaultdict(dict)
    for rec in records:
        measured[(rec.developer_id, rec.sprint_id)][rec.measure] = rec.value
    keys = sorted(set(survey) & set(measured))
    if not keys:
        only_s = sorted(set(survey))[:3]
        only_m = sorted(set(measured))[:3]
        raise DataError(
            f"survey and measurements share no (developer, sprint) keys; survey has e.g. {only_s}, "
            f"measurements have e.g. {only_m}"
        )
    out = []
    for q, m in plan:
        label = f"{q.value} - {m.value}"
        x = [survey[k].get(q) for k in keys]
        y = [measured[k].get(m) for k in keys]
        n = sum(1 for a, b in zip(x, y) if a is not None and b is not None)
        info = {"join": len(keys)}
        try:
            out.append(AnalysisEntry(label, kendall_tau(x, y), n=n, info=info))
        except UndefinedStatisticError as exc:
            out.append(AnalysisEntry(label, None, f"undefined: {exc}", n=n, info=info))
    return out


# --------------------------------------------------------------------------- assembly


def dataset_fingerprint(responses: Sequence[LikertResponse], records: Sequence[MeasurementRecord] | None) -> str:
    h = hashlib.sha256()
    for r in sorted(responses, key=lambda r: (r.team_id, r.developer_id, r.sprint_id, r.question.value)):
        h.update(f"{r.team_id}|{r.developer_id}|{r.role.value}|{r.sprint_id}|{r.question.value}|{r.rating}\n".encode())
    h.update(b"--\n")
    for rec in records or ():
        h.update(f"{rec.team_id}|{rec.developer_id}|{rec.sprint_id}|{rec.measure.value}|{rec.value!r}\n".encode())
    return h.hexdigest()[:16]


def run_analysis(
    responses: Sequence[LikertResponse],
    records: Sequence[MeasurementRecord] | None = None,
    config: AnalysisConfig | None = None,
) -> AnalysisReport:
    config = config or AnalysisConfig()
    if not responses:
        raise DataError("survey contains no responses")
    check_unique(responses)
    scope = "exclude_pos" if config.exclude_pos else "all"
    alt_scope = "all" if config.exclude_pos else "exclude_pos"
    meas_table = hist = assoc = None
    if records is not None:
        meas_table, hist = measurement_descriptives(records)
        assoc = rq6_survey_measurement_associations(responses, records, config.plan)
    metadata = {
        "dataset_id": dataset_fingerprint(responses, records),
        "config_hash": config.hash(),
        "timestamp": config.timestamp or os.environ.get("SOURCE_DATE_EPOCH") or "unspecified",
        "responses": len({(r.developer_id, r.sprint_id) for r in responses}),
        "measurement_records": len(records) if records is not None else 0,
    }
    return AnalysisReport(
        survey_descriptives=survey_descriptives(responses),
        perception_change=rq1_perception_change(responses, pooling=config.pooling, alpha=config.alpha_level),
        value_associations=rq2_value_associations(responses),
        role_effects=rq3_role_effects(responses, alpha=config.alpha_level),
        team_agreement=rq4_team_agreement(responses, scope=scope, units=config.agreement_units),
        team_agreement_alt=rq4_team_agreement(responses, scope=alt_scope, units=config.agreement_units),
        role_agreement=rq4_team_agreement(responses, grouping="role", units=config.agreement_units),
        measurement_descriptives=meas_table,
        measurement_histograms=hist,
        survey_measurement_associations=assoc,
        metadata=metadata,
        config=config,
    )
