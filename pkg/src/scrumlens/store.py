"""Normalized development-artifact model and the offline archive format.

An archive is a directory of newline-delimited JSON files, one per entity::

    developers.jsonl      {"id", "team_id", "role"}
    sprint_windows.jsonl  {"team_id", "sprint_id", "start", "review_meeting"}
    commits.jsonl         {"sha", "author_id", "timestamp", "message", "is_merge",
                           "changes": [{"path", "lines_added", "lines_deleted"}]}
    issues.jsonl          {"number", "labels", "assignees", "title", "body",
                           "status_history": [{"status", "timestamp"}]}
    pr_comments.jsonl     {"pr_number", "author_id", "timestamp", "body", "comment_id", "kind"}

Timestamps are ISO-8601 strings carrying a zone offset and are normalized to UTC on load.
Sprint windows may instead be supplied as a JSON list in a separate config file.
"""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any

from .errors import ParseError, ReferentialError, ValidationError, WindowLookupError

ARCHIVE_FILES = {
    "developers": "developers.jsonl",
    "sprint_windows": "sprint_windows.jsonl",
    "commits": "commits.jsonl",
    "issues": "issues.jsonl",
    "pr_comments": "pr_comments.jsonl",
}


class Role(str, Enum):
    PRODUCT_OWNER = "ProductOwner"
    SCRUM_MASTER = "ScrumMaster"
    DEVELOPER = "Developer"

    @classmethod
    def parse(cls, value: str) -> "Role":
        key = value.strip().replace(" ", "").replace("_", "").lower()
        aliases = {
            "productowner": cls.PRODUCT_OWNER,
            "po": cls.PRODUCT_OWNER,
            "scrummaster": cls.SCRUM_MASTER,
            "sm": cls.SCRUM_MASTER,
            "developer": cls.DEVELOPER,
            "dev": cls.DEVELOPER,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValidationError(f"unknown role {value!r}") from None


class Classification(str, Enum):
    TEST = "Test"
    APPLICATION = "Application"
    OTHER = "Other"


class IssueStatus(str, Enum):
    OPEN = "Open"
    CLOSED = "Closed"


# first path segment -> classification
DEFAULT_PATH_RULES: Mapping[str, Classification] = {
    "app": Classification.APPLICATION,
    "test": Classification.TEST,
    "spec": Classification.TEST,
}


def classify_path(path: str, rules: Mapping[str, Classification] | None = None) -> Classification:
    """Classify a repository-relative path by its first directory segment.

    ``rules`` overrides the default Rails-style convention (``app/`` is application
    code, ``test/`` and ``spec/`` hold tests). Anything else is ``Other``.
    """
    if not path:
        raise ValidationError("path must be non-empty")
    rules = DEFAULT_PATH_RULES if rules is None else rules
    first = path.lstrip("/").split("/", 1)[0]
    return Classification(rules.get(first, Classification.OTHER))


def parse_timestamp(value: Any) -> datetime:
    """Parse an ISO-8601 timestamp with zone offset into an aware UTC datetime."""
    if isinstance(value, datetime):
        dt = value
    elif isinstance(value, str):
        text = value.strip()
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        try:
            dt = datetime.fromisoformat(text)
        except ValueError:
            raise ValidationError(f"invalid timestamp {value!r}") from None
    else:
        raise ValidationError(f"invalid timestamp {value!r}")
    if dt.tzinfo is None or dt.utcoffset() is None:
        raise ValidationError(f"timestamp {value!r} has no zone offset")
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat()


@dataclass(frozen=True)
class Developer:
    id: str
    team_id: str
    role: Role = Role.DEVELOPER


@dataclass(frozen=True)
class SprintWindow:
    team_id: str
    sprint_id: int
    start: datetime
    review_meeting: datetime

    def __post_init__(self) -> None:
        if not self.start < self.review_meeting:
            raise ValidationError(
                f"window {self.team_id}/{self.sprint_id}: start must precede review_meeting"
            )

    def contains(self, t: datetime) -> bool:
        # closed on both ends: commits made during the review meeting still count
        return self.start <= t <= self.review_meeting


@dataclass(frozen=True)
class FileChange:
    path: str
    lines_added: int
    lines_deleted: int
    classification: Classification = field(init=False)

    def __post_init__(self) -> None:
        for name in ("lines_added", "lines_deleted"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ValidationError(f"{name} must be a non-negative integer, got {v!r}")
        object.__setattr__(self, "classification", classify_path(self.path))

    @property
    def lines_changed(self) -> int:
        return self.lines_added + self.lines_deleted


@dataclass(frozen=True)
class Commit:
    sha: str
    author_id: str
    timestamp: datetime
    message: str = ""
    changes: tuple[FileChange, ...] = ()
    is_merge: bool = False

    @property
    def lines_changed(self) -> int:
        return sum(c.lines_changed for c in self.changes)


@dataclass(frozen=True)
class IssueRecord:
    number: int
    labels: frozenset[str] = frozenset()
    assignees: frozenset[str] = frozenset()
    title: str = ""
    body: str = ""
    status_history: tuple[tuple[IssueStatus, datetime], ...] = ()

    def __post_init__(self) -> None:
        if self.number < 1:
            raise ValidationError(f"issue number must be positive, got {self.number}")
        times = [t for _, t in self.status_history]
        if times != sorted(times):
            raise ValidationError(f"issue #{self.number}: status_history not ordered by time")


@dataclass(frozen=True)
class PRCommentRecord:
    pr_number: int
    author_id: str
    timestamp: datetime
    body: str = ""
    comment_id: str = ""
    kind: str = "review"


@dataclass(frozen=True)
class ProjectDataset:
    developers: tuple[Developer, ...] = ()
    sprint_windows: tuple[SprintWindow, ...] = ()
    commits: tuple[Commit, ...] = ()
    issues: tuple[IssueRecord, ...] = ()
    pr_comments: tuple[PRCommentRecord, ...] = ()

    @property
    def teams(self) -> tuple[str, ...]:
        return tuple(sorted({d.team_id for d in self.developers} | {w.team_id for w in self.sprint_windows}))

    @property
    def sprint_ids(self) -> tuple[int, ...]:
        return tuple(sorted({w.sprint_id for w in self.sprint_windows}))

    def developer(self, developer_id: str) -> Developer:
        for d in self.developers:
            if d.id == developer_id:
                return d
        raise KeyError(developer_id)

    def members(self, team_id: str) -> tuple[Developer, ...]:
        return tuple(d for d in self.developers if d.team_id == team_id)

    def window(self, team_id: str, sprint_id: int) -> SprintWindow:
        for w in self.sprint_windows:
            if w.team_id == team_id and w.sprint_id == sprint_id:
                return w
        raise WindowLookupError(f"no sprint window for team {team_id!r}, sprint {sprint_id}")

    def validate(self) -> "ProjectDataset":
        """Check uniqueness and cross-references; return ``self`` for chaining."""
        ids = [d.id for d in self.developers]
        if len(ids) != len(set(ids)):
            raise ValidationError("duplicate developer id")
        known = set(ids)
        shas = [c.sha for c in self.commits]
        if len(shas) != len(set(shas)):
            raise ValidationError("duplicate commit sha")
        for c in self.commits:
            if c.author_id not in known:
                raise ReferentialError(f"commit {c.sha}: unknown author {c.author_id!r}")
        numbers = [i.number for i in self.issues]
        if len(numbers) != len(set(numbers)):
            raise ValidationError("duplicate issue number")
        for issue in self.issues:
            unknown = sorted(issue.assignees - known)
            if unknown:
                raise ReferentialError(f"issue #{issue.number}: unknown assignee {unknown[0]!r}")
        for pc in self.pr_comments:
            if pc.author_id not in known:
                raise ReferentialError(
                    f"comment {pc.comment_id or '?'} on PR #{pc.pr_number}: unknown author {pc.author_id!r}"
                )
        by_team: dict[str, list[SprintWindow]] = {}
        seen: set[tuple[str, int]] = set()
        for w in self.sprint_windows:
            if (w.team_id, w.sprint_id) in seen:
                raise ValidationError(f"duplicate window {w.team_id}/{w.sprint_id}")
            seen.add((w.team_id, w.sprint_id))
            by_team.setdefault(w.team_id, []).append(w)
        for team, windows in by_team.items():
            windows.sort(key=lambda w: w.sprint_id)
            for a, b in zip(windows, windows[1:]):
                if not a.review_meeting < b.start:
                    raise ValidationError(
                        f"team {team}: sprint {a.sprint_id} overlaps or is out of order with sprint {b.sprint_id}"
                    )
        return self

    def sorted(self) -> "ProjectDataset":
        """Canonical record order: (timestamp, id) for timed records, id otherwise."""
        return ProjectDataset(
            developers=tuple(sorted(self.developers, key=lambda d: d.id)),
            sprint_windows=tuple(sorted(self.sprint_windows, key=lambda w: (w.team_id, w.sprint_id))),
            commits=tuple(sorted(self.commits, key=lambda c: (c.timestamp, c.sha))),
            issues=tuple(sorted(self.issues, key=lambda i: i.number)),
            pr_comments=tuple(
                sorted(self.pr_comments, key=lambda p: (p.timestamp, p.comment_id, p.pr_number, p.author_id, p.body))
            ),
        )


@dataclass(frozen=True)
class SprintSlice:
    """Artifacts of one team inside one sprint window."""

    window: SprintWindow
    members: tuple[Developer, ...]
    commits: tuple[Commit, ...]
    pr_comments: tuple[PRCommentRecord, ...]

    def commits_by(self, developer_id: str) -> tuple[Commit, ...]:
        return tuple(c for c in self.commits if c.author_id == developer_id)

    def comments_by(self, developer_id: str) -> tuple[PRCommentRecord, ...]:
        return tuple(c for c in self.pr_comments if c.author_id == developer_id)


def slice_sprint(
    dataset: ProjectDataset, team_id: str, sprint_id: int, *, exclude_merges: bool = False
) -> SprintSlice:
    window = dataset.window(team_id, sprint_id)
    members = dataset.members(team_id)
    ids = {d.id for d in members}
    commits = tuple(
        c
        for c in dataset.commits
        if c.author_id in ids and window.contains(c.timestamp) and not (exclude_merges and c.is_merge)
    )
    comments = tuple(p for p in dataset.pr_comments if p.author_id in ids and window.contains(p.timestamp))
    return SprintSlice(window=window, members=members, commits=commits, pr_comments=comments)


# --------------------------------------------------------------------------- records


def _require(obj: Mapping[str, Any], key: str, kind: type | tuple[type, ...]) -> Any:
    if key not in obj:
        raise ValidationError(f"missing field {key!r}")
    value = obj[key]
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ValidationError(f"field {key!r} has wrong type {type(value).__name__}")
    return value


def developer_from_record(obj: Mapping[str, Any]) -> Developer:
    return Developer(
        id=_require(obj, "id", str),
        team_id=str(_require(obj, "team_id", (str, int))),
        role=Role.parse(_require(obj, "role", str)),
    )


def window_from_record(obj: Mapping[str, Any]) -> SprintWindow:
    sprint_id = _require(obj, "sprint_id", int)
    if sprint_id < 1:
        raise ValidationError(f"sprint_id must be positive, got {sprint_id}")
    return SprintWindow(
        team_id=str(_require(obj, "team_id", (str, int))),
        sprint_id=sprint_id,
        start=parse_timestamp(_require(obj, "start", str)),
        review_meeting=parse_timestamp(_require(obj, "review_meeting", str)),
    )


def commit_from_record(obj: Mapping[str, Any]) -> Commit:
    changes = []
    for ch in obj.get("changes", []):
        changes.append(
            FileChange(
                path=_require(ch, "path", str),
                lines_added=_require(ch, "lines_added", int),
                lines_deleted=_require(ch, "lines_deleted", int),
            )
        )
    return Commit(
        sha=_require(obj, "sha", str),
        author_id=_require(obj, "author_id", str),
        timestamp=parse_timestamp(_require(obj, "timestamp", str)),
        message=obj.get("message") or "",
        changes=tuple(changes),
        is_merge=bool(obj.get("is_merge", False)),
    )


def issue_from_record(obj: Mapping[str, Any]) -> IssueRecord:
    history = tuple(
        (IssueStatus(_require(h, "status", str)), parse_timestamp(_require(h, "timestamp", str)))
        for h in obj.get("status_history", [])
    )
    return IssueRecord(
        number=_require(obj, "number", int),
        labels=frozenset(obj.get("labels", [])),
        assignees=frozenset(obj.get("assignees", [])),
        title=obj.get("title") or "",
        body=obj.get("body") or "",
        status_history=history,
    )


def comment_from_record(obj: Mapping[str, Any]) -> PRCommentRecord:
    return PRCommentRecord(
        pr_number=_require(obj, "pr_number", int),
        author_id=_require(obj, "author_id", str),
        timestamp=parse_timestamp(_require(obj, "timestamp", str)),
        body=obj.get("body") or "",
        comment_id=str(obj.get("comment_id", "")),
        kind=obj.get("kind", "review"),
    )


def developer_to_record(d: Developer) -> dict[str, Any]:
    return {"id": d.id, "team_id": d.team_id, "role": d.role.value}


def window_to_record(w: SprintWindow) -> dict[str, Any]:
    return {
        "team_id": w.team_id,
        "sprint_id": w.sprint_id,
        "start": format_timestamp(w.start),
        "review_meeting": format_timestamp(w.review_meeting),
    }


def commit_to_record(c: Commit) -> dict[str, Any]:
    return {
        "sha": c.sha,
        "author_id": c.author_id,
        "timestamp": format_timestamp(c.timestamp),
        "message": c.message,
        "is_merge": c.is_merge,
        "changes": [
            {"path": ch.path, "lines_added": ch.lines_added, "lines_deleted": ch.lines_deleted} for ch in c.changes
        ],
    }


def issue_to_record(i: IssueRecord) -> dict[str, Any]:
    return {
        "number": i.number,
        "labels": sorted(i.labels),
        "assignees": sorted(i.assignees),
        "title": i.title,
        "body": i.body,
        "status_history": [{"status": s.value, "timestamp": format_timestamp(t)} for s, t in i.status_history],
    }


def comment_to_record(p: PRCommentRecord) -> dict[str, Any]:
    return {
        "pr_number": p.pr_number,
        "author_id": p.author_id,
        "timestamp": format_timestamp(p.timestamp),
        "body": p.body,
        "comment_id": p.comment_id,
        "kind": p.kind,
    }


_READERS = {
    "developers": developer_from_record,
    "sprint_windows": window_from_record,
    "commits": commit_from_record,
    "issues": issue_from_record,
    "pr_comments": comment_from_record,
}


# --------------------------------------------------------------------------- files


def read_jsonl(path: str | os.PathLike, parse) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValidationError("record is not an object")
                out.append(parse(obj))
            except (json.JSONDecodeError, ValidationError, ValueError, TypeError) as exc:
                raise ParseError(str(exc), path=str(path), line=lineno) from exc
    return out


def write_jsonl(path: str | os.PathLike, records: Iterable[Mapping[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False))
            fh.write("\n")


def load_windows(path: str | os.PathLike) -> list[SprintWindow]:
    """Read a sprint-window config: a JSON list of ``{team_id, sprint_id, start, review_meeting}``."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, path=str(path), line=exc.lineno) from exc
    if not isinstance(data, list):
        raise ParseError("sprint-window config must be a JSON list", path=str(path))
    out = []
    for i, obj in enumerate(data):
        try:
            out.append(window_from_record(obj))
        except (ValidationError, ValueError, TypeError) as exc:
            raise ParseError(f"entry {i}: {exc}", path=str(path)) from exc
    return out


def write_windows(path: str | os.PathLike, windows: Iterable[SprintWindow]) -> None:
    records = [window_to_record(w) for w in sorted(windows, key=lambda w: (w.team_id, w.sprint_id))]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(records, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_archive_paths(paths) -> dict[str, Path]:
    if isinstance(paths, (str, os.PathLike)):
        root = Path(paths)
        if root.is_dir():
            return {k: root / v for k, v in ARCHIVE_FILES.items() if (root / v).exists()}
        paths = [root]
    if isinstance(paths, Mapping):
        return {k: Path(v) for k, v in paths.items()}
    by_name = {v: k for k, v in ARCHIVE_FILES.items()}
    out = {}
    for p in paths:
        p = Path(p)
        if p.name not in by_name:
            raise ParseError(f"unrecognized archive file name {p.name!r}", path=str(p))
        out[by_name[p.name]] = p
    return out


def load_archive(paths, *, windows: str | os.PathLike | Iterable[SprintWindow] | None = None) -> ProjectDataset:
    """Load and validate an archive.

    ``paths`` is an archive directory, a list of entity files, or a mapping from entity
    name to file. Entity files that are absent load as empty. ``windows`` (a config
    file path or window objects) replaces any ``sprint_windows.jsonl`` in the archive.
    """
    files = _resolve_archive_paths(paths)
    for p in files.values():
        if not p.exists():
            raise FileNotFoundError(str(p))
    loaded = {name: (read_jsonl(files[name], _READERS[name]) if name in files else []) for name in ARCHIVE_FILES}
    if windows is not None:
        if isinstance(windows, (str, os.PathLike)):
            loaded["sprint_windows"] = load_windows(windows)
        else:
            loaded["sprint_windows"] = list(windows)
    ds = ProjectDataset(
        developers=tuple(loaded["developers"]),
        sprint_windows=tuple(loaded["sprint_windows"]),
        commits=tuple(loaded["commits"]),
        issues=tuple(loaded["issues"]),
        pr_comments=tuple(loaded["pr_comments"]),
    )
    return ds.validate().sorted()


def write_archive(dataset: ProjectDataset, directory: str | os.PathLike) -> Path:
    """Serialize ``dataset`` into ``directory`` in canonical order."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    ds = dataset.sorted()
    write_jsonl(root / ARCHIVE_FILES["developers"], map(developer_to_record, ds.developers))
    write_jsonl(root / ARCHIVE_FILES["sprint_windows"], map(window_to_record, ds.sprint_windows))
    write_jsonl(root / ARCHIVE_FILES["commits"], map(commit_to_record, ds.commits))
    write_jsonl(root / ARCHIVE_FILES["issues"], map(issue_to_record, ds.issues))
    write_jsonl(root / ARCHIVE_FILES["pr_comments"], map(comment_to_record, ds.pr_comments))
    return root
