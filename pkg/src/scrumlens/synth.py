"""Synthetic course data with controllable effects.

Every (developer, sprint) draws a vector of standard-normal latents: one per
measurement and one per survey claim. Couplings set correlations between them,
so association strength is a single parameter. Ratings threshold the claim
latent (plus role/sprint offsets) at fixed cut points; measurement latents
drive how the developer's commits, files, messages and comments are generated,
so the measurement module recovers them from the artifacts, not from the latents.

A ``(question, measure)`` coupling ``c > 0`` means *agreement* with the claim
goes with *more* of the measure. Since 1 = strongly agree, this shows up as a
negative tau between ratings and measurement values. A ``(question, question)``
coupling ``c > 0`` makes the two ratings positively associated.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ValidationError
from .measurements import MEASURES
from .store import (
    Commit,
    Developer,
    FileChange,
    IssueRecord,
    IssueStatus,
    PRCommentRecord,
    ProjectDataset,
    Role,
    SprintWindow,
    write_archive,
    write_windows,
)
from .survey import QUESTIONS, LikertResponse, QuestionId, write_survey

FILE_POOL = 120  # distinct app/ and spec/ files per team
CUTPOINTS = np.array([-1.5, -0.5, 0.5, 1.5])

# log-scale location/spread per measure (RTA ratio, UFE files, ALC lines, UUS refs, PRC comments);
# LMC uses a logistic location/spread for the late fraction
DEFAULT_BASE_RATES: dict[str, dict[str, float]] = {
    "RTA": {"median": 0.5, "spread": 0.8},
    "UFE": {"median": 9.0, "spread": 0.7},
    "LMC": {"median": 0.8, "spread": 1.2},
    "ALC": {"median": 27.0, "spread": 0.7},
    "UUS": {"median": 1.2, "spread": 0.8},
    "PRC": {"median": 3.0, "spread": 1.0},
    "commits": {"mean": 8.0},
}


@dataclass
class EffectConfig:
    seed: int = 0
    teams: int = 6
    devs_per_team: int | list[int] = 7
    sprints: int = 4
    role_shift: dict[str, dict[str, float]] = field(default_factory=dict)
    sprint_shift: dict[str, dict[int, float]] = field(default_factory=dict)
    coupling: dict[tuple[str, str], float] = field(default_factory=dict)
    base_rates: dict[str, dict[str, float]] = field(default_factory=dict)
    question_location: dict[str, float] = field(default_factory=dict)
    missing_rate: float = 0.1
    role_missing_rate: dict[str, float] = field(default_factory=dict)
    no_commit_rate: float = 0.25
    sprint_days: int = 14
    start: str = "2018-10-22T08:00:00+00:00"

    def team_sizes(self) -> list[int]:
        if isinstance(self.devs_per_team, int):
            return [self.devs_per_team] * self.teams
        if len(self.devs_per_team) != self.teams:
            raise ValidationError("devs_per_team list must have one entry per team")
        return list(self.devs_per_team)

    def rates(self, key: str) -> dict[str, float]:
        return {**DEFAULT_BASE_RATES[key], **self.base_rates.get(key, {})}

    def validate(self) -> None:
        if self.teams < 1 or self.sprints < 1 or any(s < 1 for s in self.team_sizes()):
            raise ValidationError("need at least one team, one developer per team and one sprint")
        for key, c in self.coupling.items():
            if not -1.0 <= c <= 1.0:
                raise ValidationError(f"coupling {key} = {c} outside [-1, 1]")
        for name in ("missing_rate", "no_commit_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1]")
        for q, shifts in {**self.role_shift, **self.sprint_shift}.items():
            QuestionId(q)
            for offset in shifts.values():
                if not math.isfinite(offset) or abs(offset) > 10:
                    raise ValidationError(f"offset {offset} for {q} is not clampable to the rating scale")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EffectConfig":
        data = dict(data)
        if "coupling" in data:
            coupling = data["coupling"]
            if isinstance(coupling, dict):
                data["coupling"] = {tuple(k.split(",")): v for k, v in coupling.items()}
            else:
                data["coupling"] = {(a, b): v for a, b, v in coupling}
        if "sprint_shift" in data:
            data["sprint_shift"] = {q: {int(s): v for s, v in m.items()} for q, m in data["sprint_shift"].items()}
        return cls(**data)


@dataclass(frozen=True)
class SyntheticData:
    responses: list[LikertResponse]
    dataset: ProjectDataset


def _latent_names() -> list[str]:
    return [m.value for m in MEASURES] + [q.value for q in QUESTIONS]


def _correlation(config: EffectConfig) -> np.ndarray:
    names = _latent_names()
    idx = {n: i for i, n in enumerate(names)}
    corr = np.eye(len(names))
    for (a, b), c in config.coupling.items():
        a, b = a.upper(), b.upper()
        if a not in idx or b not in idx or a == b:
            raise ValidationError(f"invalid coupling pair ({a}, {b})")
        is_q = [n.startswith("Q") for n in (a, b)]
        # question-measure: rating latent is oriented so that low rating = agreement
        sign = -1.0 if is_q[0] != is_q[1] else 1.0
        corr[idx[a], idx[b]] = corr[idx[b], idx[a]] = sign * c
    try:
        np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        raise ValidationError("coupling strengths do not form a valid correlation matrix") from None
    return corr


def _roles(size: int) -> list[Role]:
    roles = [Role.PRODUCT_OWNER, Role.SCRUM_MASTER] + [Role.DEVELOPER] * max(0, size - 2)
    return roles[:size]


def generate(config: EffectConfig) -> SyntheticData:
    """Draw a survey and an artifact dataset; identical seeds give identical data."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    corr = _correlation(config)
    chol = np.linalg.cholesky(corr)
    names = _latent_names()
    idx = {n: i for i, n in enumerate(names)}
    start = datetime.fromisoformat(config.start).astimezone(timezone.utc)

    developers: list[Developer] = []
    windows: list[SprintWindow] = []
    for t, size in enumerate(config.team_sizes(), start=1):
        team = str(t)
        for j, role in enumerate(_roles(size), start=1):
            developers.append(Developer(f"t{t}-d{j:02d}", team, role))
        for s in range(1, config.sprints + 1):
            s_start = start + timedelta(days=config.sprint_days * (s - 1))
            review = s_start + timedelta(days=config.sprint_days - 1, hours=2)
            windows.append(SprintWindow(team, s, s_start, review))

    issues: list[IssueRecord] = []
    team_issues: dict[str, list[int]] = {}
    team_prs: dict[str, list[int]] = {}
    number = 1
    for t in range(1, config.teams + 1):
        team = str(t)
        members = [d.id for d in developers if d.team_id == team]
        team_issues[team] = []
        for _ in range(12 * config.sprints):
            assignee = members[int(rng.integers(len(members)))]
            issues.append(
                IssueRecord(
                    number=number,
                    labels=frozenset({f"Team {team}"}),
                    assignees=frozenset({assignee}),
                    title=f"User story {number}",
                    status_history=((IssueStatus.OPEN, start),),
                )
            )
            team_issues[team].append(number)
            number += 1
        team_prs[team] = list(range(number, number + 4 * config.sprints))
        number += 4 * config.sprints

    commits: list[Commit] = []
    comments: list[PRCommentRecord] = []
    responses: list[LikertResponse] = []
    sha_counter = 0
    comment_counter = 0
    commits_mean = config.rates("commits")["mean"]

    for w in sorted(windows, key=lambda w: (int(w.team_id), w.sprint_id)):
        members = [d for d in developers if d.team_id == w.team_id]
        app_pool = [f"app/models/model_{w.team_id}_{i}.rb" for i in range(FILE_POOL)]
        test_pool = [f"spec/models/model_{w.team_id}_{i}_spec.rb" for i in range(FILE_POOL)]
        for dev in members:
            latent = chol @ rng.standard_normal(len(names))

            # survey
            miss_p = min(1.0, config.missing_rate + config.role_missing_rate.get(dev.role.value, 0.0))
            for q in QUESTIONS:
                loc = config.question_location.get(q.value, 0.0)
                loc += config.role_shift.get(q.value, {}).get(dev.role.value, 0.0)
                loc += config.sprint_shift.get(q.value, {}).get(w.sprint_id, 0.0)
                value = loc + latent[idx[q.value]]
                rating = int(1 + np.searchsorted(CUTPOINTS, value))
                if rng.random() < miss_p:
                    rating = None
                responses.append(LikertResponse(dev.id, dev.team_id, dev.role, w.sprint_id, q, rating))

            # pull-request comments (independent of committing)
            prc = config.rates("PRC")
            n_comments = max(0, int(round(prc["median"] * math.exp(prc["spread"] * latent[idx["PRC"]]) - 1.0)))
            span = (w.review_meeting - w.start).total_seconds()
            for _ in range(n_comments):
                comment_counter += 1
                ts = w.start + timedelta(seconds=int(rng.uniform(0, span)))
                pr = team_prs[w.team_id][int(rng.integers(len(team_prs[w.team_id])))]
                comments.append(PRCommentRecord(pr, dev.id, ts, "Looks good, one remark.", f"c{comment_counter}", "review"))

            # commits
            if rng.random() < config.no_commit_rate:
                continue
            n_commits = 1 + int(rng.poisson(max(commits_mean - 1.0, 0.0)))

            r = config.rates("RTA")
            ratio = r["median"] * math.exp(r["spread"] * latent[idx["RTA"]])
            u = config.rates("UFE")
            n_files = max(1, int(round(u["median"] * math.exp(u["spread"] * latent[idx["UFE"]]))))
            n_files = min(n_files, FILE_POOL)
            n_test = min(n_files - 1, int(round(n_files * ratio / (1.0 + ratio))))
            n_app = min(n_files - n_test, FILE_POOL)
            a = config.rates("ALC")
            lines_target = a["median"] * math.exp(a["spread"] * latent[idx["ALC"]])
            lm = config.rates("LMC")
            logit = math.log(lm["median"] / (1.0 - lm["median"])) + lm["spread"] * latent[idx["LMC"]]
            n_late = int(round(n_commits / (1.0 + math.exp(-logit))))
            us = config.rates("UUS")
            n_refs = max(0, int(round(us["median"] * math.exp(us["spread"] * latent[idx["UUS"]]) - 0.5)))
            n_refs = min(n_refs, len(team_issues[w.team_id]))

            app_files = [app_pool[i] for i in rng.choice(len(app_pool), size=n_app, replace=False)]
            test_files = [test_pool[i] for i in rng.choice(len(test_pool), size=n_test, replace=False)]
            refs = [team_issues[w.team_id][i] for i in rng.choice(len(team_issues[w.team_id]), size=n_refs, replace=False)]

            late_start = w.review_meeting - timedelta(hours=12)
            early_span = (late_start - w.start).total_seconds()
            for c in range(n_commits):
                if c < n_commits - n_late:
                    ts = w.start + timedelta(seconds=int(rng.uniform(0, early_span - 1)))
                else:
                    ts = late_start + timedelta(seconds=int(rng.uniform(0, 12 * 3600)))
                total = max(2, int(round(lines_target * math.exp(0.25 * rng.standard_normal()))))
                app_lines = max(1, int(round(total / (1.0 + ratio))))
                test_lines = int(round(app_lines * ratio)) if test_files else 0
                touched_app = [app_files[i] for i in range(len(app_files)) if i % n_commits == c] or [app_files[c % n_app]]
                touched_test = [test_files[i] for i in range(len(test_files)) if i % n_commits == c]
                if test_files and not touched_test:
                    touched_test = [test_files[c % len(test_files)]]
                changes = _split_lines(touched_app, app_lines, rng) + _split_lines(touched_test, test_lines, rng)
                mentioned = [refs[i] for i in range(len(refs)) if i % n_commits == c]
                message = "Update " + touched_app[0].rsplit("/", 1)[-1]
                if mentioned:
                    message += "; Fixes " + " ".join(f"#{m}" for m in mentioned)
                sha_counter += 1
                sha = hashlib.sha1(f"{config.seed}:{sha_counter}".encode()).hexdigest()
                commits.append(Commit(sha, dev.id, ts, message, tuple(changes)))

    dataset = ProjectDataset(
        developers=tuple(developers),
        sprint_windows=tuple(windows),
        commits=tuple(commits),
        issues=tuple(issues),
        pr_comments=tuple(comments),
    )
    return SyntheticData(responses=responses, dataset=dataset.validate().sorted())


def _split_lines(paths: list[str], lines: int, rng: np.random.Generator) -> list[FileChange]:
    if not paths:
        return []
    share, rest = divmod(lines, len(paths))
    out = []
    for i, p in enumerate(paths):
        n = share + (1 if i < rest else 0)
        deleted = int(rng.integers(0, n // 3 + 1))
        out.append(FileChange(p, n - deleted, deleted))
    return out


def write_synthetic(data: SyntheticData, out: str | os.PathLike) -> dict[str, Path]:
    """Write ``survey.csv``, ``windows.json`` and an ``archive/`` directory into ``out``."""
    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    survey_path = root / "survey.csv"
    write_survey(data.responses, survey_path)
    archive = write_archive(data.dataset, root / "archive")
    windows_path = root / "windows.json"
    write_windows(windows_path, data.dataset.sprint_windows)
    return {"survey": survey_path, "archive": archive, "windows": windows_path}


def generate_files(config: EffectConfig, out: str | os.PathLike) -> dict[str, Path]:
    return write_synthetic(generate(config), out)


def load_effect_config(path: str | os.PathLike) -> EffectConfig:
    with open(path, encoding="utf-8") as fh:
        return EffectConfig.from_dict(json.load(fh))
