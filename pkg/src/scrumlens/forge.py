"""Forge (GitHub-style REST) client that produces offline archives.

Only the entity files that a forge can supply are written (commits, issues,
PR comments). Developers with their team and role, and the sprint windows, come
from the course roster and are declared separately.
"""

from __future__ import annotations

import logging
import os
import re
import time
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any

import httpx

from . import store
from .errors import AuthError, ForgeError, RateLimitError, TransportError

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.github.com"
TOKEN_ENV = "FORGE_TOKEN"
PAGE_SIZE = 100

_LINK_NEXT = re.compile(r'<([^>]+)>;\s*rel="next"')
_TRAILING_NUMBER = re.compile(r"/(\d+)/?$")


@dataclass
class _Budget:
    max_wait: float
    waited: float = 0.0


class ForgeClient:
    """Thin synchronous REST client with pagination and rate-limit handling.

    Primary rate limits (``X-RateLimit-Remaining: 0``) are waited out until the
    reset time as long as the cumulative wait stays within ``max_wait`` seconds.
    Secondary limits (403/429 with ``Retry-After`` or a rate-limit message) are
    retried with exponential backoff, at most ``max_retries`` times per request.
    """

    def __init__(
        self,
        token: str | None = None,
        *,
        base_url: str = DEFAULT_BASE_URL,
        transport: httpx.BaseTransport | None = None,
        max_wait: float = 3600.0,
        max_retries: int = 5,
        backoff_base: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.time,
        timeout: float = 30.0,
    ) -> None:
        token = token if token is not None else os.environ.get(TOKEN_ENV)
        headers = {"Accept": "application/vnd.github+json", "User-Agent": "scrumlens"}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(base_url=base_url, headers=headers, transport=transport, timeout=timeout)
        self._budget = _Budget(max_wait)
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._clock = clock

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "ForgeClient":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def _wait(self, seconds: float, reason: str) -> None:
        seconds = max(0.0, seconds)
        if self._budget.waited + seconds > self._budget.max_wait:
            raise RateLimitError(
                f"{reason}: waiting {seconds:.0f}s would exceed the {self._budget.max_wait:.0f}s budget"
            )
        logger.warning("%s; sleeping %.1fs", reason, seconds)
        self._budget.waited += seconds
        self._sleep(seconds)

    def _reset_delay(self, response: httpx.Response) -> float:
        reset = response.headers.get("X-RateLimit-Reset")
        if reset is None:
            return self.backoff_base
        return float(reset) - self._clock() + 1.0

    @staticmethod
    def _is_secondary_limit(response: httpx.Response) -> bool:
        if "Retry-After" in response.headers or response.status_code == 429:
            return True
        try:
            message = str(response.json().get("message", ""))
        except (ValueError, AttributeError):
            message = response.text
        return "rate limit" in message.lower()

    def get(self, url: str, params: dict[str, Any] | None = None) -> httpx.Response:
        attempt = 0
        while True:
            try:
                response = self._client.get(url, params=params)
            except httpx.TransportError as exc:
                raise TransportError(f"GET {url}: {exc}") from exc
            status = response.status_code
            if status == 401:
                raise AuthError(f"GET {url}: 401 unauthorized")
            if status in (403, 429):
                if response.headers.get("X-RateLimit-Remaining") == "0":
                    self._wait(self._reset_delay(response), "primary rate limit exhausted")
                    continue
                if self._is_secondary_limit(response):
                    if attempt >= self.max_retries:
                        raise RateLimitError(f"GET {url}: secondary rate limit persisted after {attempt} retries")
                    retry_after = response.headers.get("Retry-After")
                    delay = float(retry_after) if retry_after else self.backoff_base * 2**attempt
                    attempt += 1
                    self._wait(delay, "secondary rate limit")
                    continue
                raise AuthError(f"GET {url}: {status} forbidden")
            if status >= 400:
                raise TransportError(f"GET {url}: HTTP {status}")
            if response.headers.get("X-RateLimit-Remaining") == "0":
                # pre-emptively honor the reset so the next call does not bounce
                self._wait(self._reset_delay(response), "rate limit reached")
            return response

    def paginate(self, path: str, params: dict[str, Any] | None = None) -> Iterator[dict[str, Any]]:
        """Yield items across pages, following ``Link: rel="next"`` until exhausted."""
        params = {**(params or {}), "per_page": PAGE_SIZE}
        url: str | None = path
        while url is not None:
            response = self.get(url, params=params)
            items = response.json()
            if not isinstance(items, list):
                raise TransportError(f"GET {url}: expected a JSON list")
            yield from items
            match = _LINK_NEXT.search(response.headers.get("Link", ""))
            url = match.group(1) if match else None
            params = None  # the next link already carries the query string


def _login(user: dict[str, Any] | None) -> str | None:
    return user.get("login") if user else None


def _commit_record(summary: dict[str, Any], detail: dict[str, Any]) -> dict[str, Any]:
    meta = summary.get("commit", {})
    author = _login(summary.get("author")) or meta.get("author", {}).get("email") or meta.get("author", {}).get("name")
    files = detail.get("files") or []
    return {
        "sha": summary["sha"],
        "author_id": author or "",
        "timestamp": meta.get("author", {}).get("date"),
        "message": meta.get("message", ""),
        "is_merge": len(summary.get("parents", [])) > 1,
        "changes": [
            {"path": f["filename"], "lines_added": int(f.get("additions", 0)), "lines_deleted": int(f.get("deletions", 0))}
            for f in files
        ],
    }


def _issue_record(item: dict[str, Any]) -> dict[str, Any]:
    history = [{"status": "Open", "timestamp": item["created_at"]}]
    if item.get("closed_at"):
        history.append({"status": "Closed", "timestamp": item["closed_at"]})
    return {
        "number": item["number"],
        "labels": sorted(lbl["name"] if isinstance(lbl, dict) else str(lbl) for lbl in item.get("labels", [])),
        "assignees": sorted(a["login"] for a in item.get("assignees") or []),
        "title": item.get("title") or "",
        "body": item.get("body") or "",
        "status_history": history,
    }


def _pr_number(url: str | None) -> int | None:
    if not url:
        return None
    m = _TRAILING_NUMBER.search(url)
    return int(m.group(1)) if m else None


def fetch_forge(
    repo: str,
    out: str | os.PathLike,
    *,
    token: str | None = None,
    since: datetime | str | None = None,
    client: ForgeClient | None = None,
    workers: int = 4,
    **client_options: Any,
) -> dict[str, Path]:
    """Download commits (with per-file diff stats), issues and PR comments of ``repo``.

    Writes ``commits.jsonl``, ``issues.jsonl`` and ``pr_comments.jsonl`` into ``out``
    in canonical order and returns the written paths. Per-commit detail requests may
    run on ``workers`` threads; output order does not depend on completion order.
    """
    if "/" not in repo:
        raise ValueError(f"repo must be 'owner/name', got {repo!r}")
    since_dt = store.parse_timestamp(since) if since is not None else None
    base_params = {"since": store.format_timestamp(since_dt)} if since_dt else {}
    own_client = client is None
    client = client or ForgeClient(token, **client_options)
    try:
        prefix = f"/repos/{repo}"
        summaries = list(client.paginate(f"{prefix}/commits", base_params))
        if since_dt is not None:
            summaries = [s for s in summaries if store.parse_timestamp(s["commit"]["author"]["date"]) >= since_dt]

        def detail(sha: str) -> dict[str, Any]:
            return client.get(f"{prefix}/commits/{sha}").json()

        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            details = list(pool.map(detail, [s["sha"] for s in summaries]))
        commits = [_commit_record(s, d) for s, d in zip(summaries, details)]

        issues = [
            _issue_record(i)
            for i in client.paginate(f"{prefix}/issues", {**base_params, "state": "all"})
            if "pull_request" not in i
            and (since_dt is None or store.parse_timestamp(i.get("updated_at") or i["created_at"]) >= since_dt)
        ]

        pr_numbers = {p["number"] for p in client.paginate(f"{prefix}/pulls", {"state": "all"})}
        comments = []
        for c in client.paginate(f"{prefix}/pulls/comments", base_params):
            number = c.get("pull_request_number") or _pr_number(c.get("pull_request_url"))
            comments.append((number, c, "review"))
        for c in client.paginate(f"{prefix}/issues/comments", base_params):
            number = _pr_number(c.get("issue_url"))
            if number in pr_numbers:
                comments.append((number, c, "conversation"))
        comment_records = [
            {
                "pr_number": number,
                "author_id": _login(c.get("user")) or "",
                "timestamp": c["created_at"],
                "body": c.get("body") or "",
                "comment_id": str(c.get("id", "")),
                "kind": kind,
            }
            for number, c, kind in comments
            if number is not None
            and (since_dt is None or store.parse_timestamp(c["created_at"]) >= since_dt)
        ]
    except ForgeError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise TransportError(f"unexpected response shape: {exc}") from exc
    finally:
        if own_client:
            client.close()

    # round-trip through the domain types so the files are canonical and schema-valid
    commit_objs = sorted((store.commit_from_record(r) for r in commits), key=lambda c: (c.timestamp, c.sha))
    issue_objs = sorted((store.issue_from_record(r) for r in issues), key=lambda i: i.number)
    comment_objs = store.ProjectDataset(pr_comments=tuple(store.comment_from_record(r) for r in comment_records)).sorted().pr_comments

    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    paths = {
        "commits": root / store.ARCHIVE_FILES["commits"],
        "issues": root / store.ARCHIVE_FILES["issues"],
        "pr_comments": root / store.ARCHIVE_FILES["pr_comments"],
    }
    store.write_jsonl(paths["commits"], map(store.commit_to_record, commit_objs))
    store.write_jsonl(paths["issues"], map(store.issue_to_record, issue_objs))
    store.write_jsonl(paths["pr_comments"], map(store.comment_to_record, comment_objs))
    return paths
