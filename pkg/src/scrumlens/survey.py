"""Likert survey responses for the nine course claims, and their descriptive statistics.

Ratings are coded 1 = strongly agree ... 5 = strongly disagree, so a lower mean
means more agreement with the claim.
"""

from __future__ import annotations

import csv
import math
import os
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DataError, ParseError, ValidationError
from .store import Role


class QuestionId(str, Enum):
    Q1 = "Q1"
    Q2 = "Q2"
    Q3 = "Q3"
    Q4 = "Q4"
    Q5 = "Q5"
    Q6 = "Q6"
    Q7 = "Q7"
    Q8 = "Q8"
    Q9 = "Q9"

    @property
    def claim(self) -> str:
        return CLAIMS[self]


CLAIMS = {
    QuestionId.Q1: "I wrote code using a test-driven approach",
    QuestionId.Q2: "I practiced collective code ownership",
    QuestionId.Q3: "The user stories of the sprint were too large",
    QuestionId.Q4: "There were duplicates of user stories",
    QuestionId.Q5: "I started implementing only shortly before the deadline",
    QuestionId.Q6: 'We followed the "check in early, check in often" principle',
    QuestionId.Q7: "I worked on too many user stories simultaneously",
    QuestionId.Q8: "We conducted useful code reviews",
    QuestionId.Q9: "Our team has successfully implemented the agile values",
}

QUESTIONS: tuple[QuestionId, ...] = tuple(QuestionId)

LIKERT_LABELS = ("strongly agree", "agree", "neutral", "disagree", "strongly disagree")


def encode_likert(label: str) -> int:
    """Map an agreement label to its rating (strongly agree -> 1, strongly disagree -> 5)."""
    key = " ".join(label.strip().lower().replace("_", " ").split())
    try:
        return LIKERT_LABELS.index(key) + 1
    except ValueError:
        raise ParseError(f"unknown Likert label {label!r}") from None


@dataclass(frozen=True)
class LikertResponse:
    developer_id: str
    team_id: str
    role: Role
    sprint_id: int
    question: QuestionId
    rating: int | None

    def __post_init__(self) -> None:
        if self.rating is not None and self.rating not in (1, 2, 3, 4, 5):
            raise ValidationError(f"rating must be in 1..5, got {self.rating!r}")


SURVEY_COLUMNS = ("team", "developer", "role", "sprint") + tuple(q.value.lower() for q in QUESTIONS)


def _parse_rating(cell: str) -> int | None:
    text = cell.strip()
    if text == "":
        return None
    if text.lstrip("+-").isdigit():
        value = int(text)
    else:
        try:
            value = encode_likert(text)
        except ParseError:
            raise ValidationError(f"rating {cell!r} is not an integer 1..5") from None
    if not 1 <= value <= 5:
        raise ValidationError(f"rating {value} outside 1..5")
    return value


def load_survey(path: str | os.PathLike) -> list[LikertResponse]:
    """Read a survey table: header ``team, developer, role, sprint, q1..q9``; blank = missing."""
    out: list[LikertResponse] = []
    seen: set[tuple[str, int]] = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            return out
        missing_cols = [c for c in SURVEY_COLUMNS if c not in header]
        if missing_cols:
            raise ParseError(f"missing columns {missing_cols}", path=str(path), line=1)
        idx = {c: header.index(c) for c in SURVEY_COLUMNS}
        for lineno, row in enumerate(reader, start=2):
            if not any(cell.strip() for cell in row):
                continue
            try:
                if len(row) < len(header):
                    row = row + [""] * (len(header) - len(row))
                team = row[idx["team"]].strip()
                dev = row[idx["developer"]].strip()
                role = Role.parse(row[idx["role"]])
                sprint = int(row[idx["sprint"]])
                if not team or not dev:
                    raise ValidationError("team and developer must be non-empty")
                if (dev, sprint) in seen:
                    raise ValidationError(f"duplicate response for developer {dev!r}, sprint {sprint}")
                seen.add((dev, sprint))
                for q in QUESTIONS:
                    rating = _parse_rating(row[idx[q.value.lower()]])
                    out.append(LikertResponse(dev, team, role, sprint, q, rating))
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            except ValueError as exc:
                raise ParseError(str(exc), path=str(path), line=lineno) from exc
    return out


def write_survey(responses: Iterable[LikertResponse], path: str | os.PathLike) -> None:
    rows: dict[tuple[str, str, int], dict] = {}
    for r in responses:
        key = (r.team_id, r.developer_id, r.sprint_id)
        row = rows.setdefault(key, {"role": r.role})
        row[r.question] = r.rating
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SURVEY_COLUMNS)
        for (team, dev, sprint), row in sorted(rows.items()):
            ratings = ["" if row.get(q) is None else str(row[q]) for q in QUESTIONS]
            w.writerow([team, dev, row["role"].value, sprint, *ratings])


def check_unique(responses: Sequence[LikertResponse]) -> None:
    keys = [(r.developer_id, r.sprint_id, r.question) for r in responses]
    if len(keys) != len(set(keys)):
        raise DataError("more than one response per (developer, sprint, question)")


# --------------------------------------------------------------------------- descriptives


@dataclass(frozen=True)
class DescriptiveStats:
    valid: int
    missing: int
    mean: float | None = None
    median: float | None = None
    stdev: float | None = None
    variance: float | None = None
    skewness: float | None = None
    stderr_skewness: float | None = None


def stderr_skewness(n: int) -> float | None:
    """Standard error of the sample skewness, sqrt(6n(n-1) / ((n-2)(n+1)(n+3)))."""
    if n < 3:
        return None
    return math.sqrt(6.0 * n * (n - 1) / ((n - 2) * (n + 1) * (n + 3)))


def descriptive_stats(values: Iterable[float | None]) -> DescriptiveStats:
    """Valid/missing counts, mean, median, sample stdev and variance, and G1 skewness.

    ``None`` and NaN entries count as missing. Statistics that need more data than
    available (stdev for n < 2, skewness for n < 3 or a constant sample) are ``None``.
    """
    present = []
    missing = 0
    for v in values:
        if v is None or (isinstance(v, float) and math.isnan(v)):
            missing += 1
        else:
            present.append(float(v))
    n = len(present)
    if n == 0:
        return DescriptiveStats(valid=0, missing=missing)
    x = np.asarray(present, dtype=float)
    mean = float(x.mean())
    median = float(np.median(x))
    variance = stdev = skew = None
    if n >= 2:
        variance = float(x.var(ddof=1))
        stdev = math.sqrt(variance)
    if n >= 3:
        d = x - mean
        m2 = float(np.mean(d**2))
        m3 = float(np.mean(d**3))
        if m2 > 1e-14 * max(1.0, mean * mean):
            g1 = m3 / m2**1.5
            skew = g1 * math.sqrt(n * (n - 1)) / (n - 2)
    return DescriptiveStats(
        valid=n,
        missing=missing,
        mean=mean,
        median=median,
        stdev=stdev,
        variance=variance,
        skewness=skew,
        stderr_skewness=stderr_skewness(n),
    )
