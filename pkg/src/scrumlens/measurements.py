"""Per-developer, per-sprint agile-practice measurements.

======  ============================================================
RTA     test-code line changes / application-code line changes
UFE     unique files edited
LMC     fraction of commits in the final 12 hours before the review
ALC     average changed lines (insertions + deletions) per commit
UUS     unique user-story ids (``#123``) referenced in commit messages
PRC     pull-request comments written
======  ============================================================

RTA, LMC and ALC are missing (``None``) for a developer without commits in
the sprint; UFE, UUS and PRC are counts and are 0 instead.
"""

from __future__ import annotations

import csv
import math
import os
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from datetime import timedelta
from enum import Enum

from .errors import ParseError, WindowLookupError
from .store import (
    Classification,
    Commit,
    PRCommentRecord,
    ProjectDataset,
    SprintWindow,
    classify_path,
    slice_sprint,
)

LAST_MINUTE = timedelta(hours=12)


class MeasureId(str, Enum):
    RTA = "RTA"
    UFE = "UFE"
    LMC = "LMC"
    ALC = "ALC"
    UUS = "UUS"
    PRC = "PRC"


MEASURES: tuple[MeasureId, ...] = tuple(MeasureId)
COUNT_MEASURES = frozenset({MeasureId.UFE, MeasureId.UUS, MeasureId.PRC})


@dataclass(frozen=True)
class MeasurementRecord:
    team_id: str
    developer_id: str
    sprint_id: int
    measure: MeasureId
    value: float | None

    @property
    def missing(self) -> bool:
        return self.value is None


def rta(commits: Sequence[Commit], rules: Mapping[str, Classification] | None = None) -> float | None:
    test = app = 0
    for commit in commits:
        for ch in commit.changes:
            cls = ch.classification if rules is None else classify_path(ch.path, rules)
            if cls is Classification.TEST:
                test += ch.lines_changed
            elif cls is Classification.APPLICATION:
                app += ch.lines_changed
    if not commits or app == 0:
        return None
    return test / app


def ufe(commits: Sequence[Commit]) -> int:
    return len({ch.path for c in commits for ch in c.changes})


def lmc(commits: Sequence[Commit], window: SprintWindow) -> float | None:
    """Share of the developer's in-window commits made within 12h of the review meeting."""
    in_window = [c for c in commits if window.contains(c.timestamp)]
    if not in_window:
        return None
    cutoff = window.review_meeting - LAST_MINUTE
    late = sum(1 for c in in_window if cutoff <= c.timestamp <= window.review_meeting)
    return late / len(in_window)


def alc(commits: Sequence[Commit]) -> float | None:
    if not commits:
        return None
    return sum(c.lines_changed for c in commits) / len(commits)


# "#123" not preceded by a word character or "/" (so owner/repo#1 and abc#1 are ignored)
_STORY_REF = re.compile(r"(?<![\w/])#(\d+)(?!\w)")


def parse_story_refs(message: str) -> set[int]:
    """Issue numbers referenced as ``#n`` in a commit message."""
    return {int(m) for m in _STORY_REF.findall(message or "") if int(m) > 0}


def uus(commits: Sequence[Commit]) -> int:
    refs: set[int] = set()
    for c in commits:
        refs |= parse_story_refs(c.message)
    return len(refs)


def prc(comments: Sequence[PRCommentRecord]) -> int:
    return len(comments)


def compute_all(
    dataset: ProjectDataset,
    *,
    exclude_merges: bool = False,
    path_rules: Mapping[str, Classification] | None = None,
) -> list[MeasurementRecord]:
    """One record per (developer, sprint, measure), in (team, developer, sprint, measure) order.

    Sprints are the union of sprint ids over all windows; a team missing a window
    for one of them raises :class:`~scrumlens.errors.WindowLookupError`.
    """
    teams = sorted({d.team_id for d in dataset.developers})
    if teams and not dataset.sprint_windows:
        raise WindowLookupError("dataset has developers but no sprint windows")
    records: list[MeasurementRecord] = []
    for team in teams:
        for sprint in dataset.sprint_ids:
            sl = slice_sprint(dataset, team, sprint, exclude_merges=exclude_merges)
            for dev in sorted(sl.members, key=lambda d: d.id):
                commits = sl.commits_by(dev.id)
                values = {
                    MeasureId.RTA: rta(commits, path_rules),
                    MeasureId.UFE: ufe(commits),
                    MeasureId.LMC: lmc(commits, sl.window),
                    MeasureId.ALC: alc(commits),
                    MeasureId.UUS: uus(commits),
                    MeasureId.PRC: prc(sl.comments_by(dev.id)),
                }
                for m in MEASURES:
                    v = values[m]
                    records.append(MeasurementRecord(team, dev.id, sprint, m, None if v is None else float(v)))
    records.sort(key=lambda r: (r.team_id, r.developer_id, r.sprint_id, MEASURES.index(r.measure)))
    return records


# --------------------------------------------------------------------------- table I/O

COLUMNS = ("team", "developer", "sprint", "measure", "value", "missing")


def _fmt(v: float | None) -> str:
    if v is None:
        return ""
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def write_measurements(records: Iterable[MeasurementRecord], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in records:
            w.writerow([r.team_id, r.developer_id, r.sprint_id, r.measure.value, _fmt(r.value), str(r.missing).lower()])


def read_measurements(path: str | os.PathLike) -> list[MeasurementRecord]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(COLUMNS) - set(reader.fieldnames):
            raise ParseError(f"measurement table needs columns {', '.join(COLUMNS)}", path=str(path), line=1)
        for lineno, row in enumerate(reader, start=2):
            try:
                missing = row["missing"].strip().lower() in ("true", "1", "yes")
                value = None if missing or row["value"].strip() == "" else float(row["value"])
                if value is not None and not math.isfinite(value):
                    raise ValueError(f"non-finite value {row['value']!r}")
                out.append(
                    MeasurementRecord(row["team"], row["developer"], int(row["sprint"]), MeasureId(row["measure"]), value)
                )
            except (ValueError, KeyError) as exc:
                raise ParseError(str(exc), path=str(path), line=lineno) from exc
    return out
