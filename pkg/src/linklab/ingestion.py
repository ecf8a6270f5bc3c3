"""Acquire raw issue data, canonicalize link directions, persist datasets.

Raw records come either from a Jira-style REST search endpoint or from an
exported JSON dump.  Canonicalization stores every logical link exactly once,
in the outward direction under the outward label (the pair "blocks" /
"is blocked by" becomes one link labeled "blocks" from the blocker).
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import requests

from linklab.dataset import (
    Issue,
    IssueLink,
    ProjectDataset,
    dataset_from_dict,
    dataset_to_dict,
    parse_timestamp,
)

__all__ = [
    "JiraSourceConfig",
    "RawIssueRecord",
    "SourceUnavailableError",
    "AuthError",
    "ProtocolError",
    "IngestionReport",
    "load_link_types",
    "inward_to_outward",
    "fetch_project",
    "load_dump",
    "canonicalize_links",
    "save_dataset",
    "load_dataset",
]

log = logging.getLogger(__name__)

# Opaque key-value document as returned by the issue API.
RawIssueRecord = Mapping[str, Any]

SEARCH_FIELDS = "summary,description,issuetype,status,created,assignee,reporter,issuelinks"


class SourceUnavailableError(RuntimeError):
    """The issue source could not be reached after exhausting retries."""


class AuthError(RuntimeError):
    """The issue source rejected the supplied credentials."""


class ProtocolError(RuntimeError):
    """The issue source returned a page we cannot interpret."""


@dataclass(frozen=True)
class JiraSourceConfig:
    base_url: str
    project_key: str
    auth_token: str | None = None
    page_size: int = 100
    request_timeout: float = 30.0
    max_retries: int = 3
    max_concurrency: int = 1

    def __post_init__(self) -> None:
        if self.page_size < 1:
            raise ValueError("page_size must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass
class IngestionReport:
    """Counters describing what canonicalization kept and dropped."""

    total_link_entries: int = 0
    dropped_external: int = 0
    dropped_self: int = 0
    duplicates_collapsed: int = 0
    disagreements: int = 0
    unmapped_inward: list[str] = field(default_factory=list)


@lru_cache(maxsize=4)
def load_link_types(path: str | None = None) -> tuple[tuple[str, str], ...]:
    """Load (outward, inward) label pairs; default is the bundled table."""
    if path is None:
        data = resources.files("linklab.data") / "link_types.json"
        raw = json.loads(data.read_text(encoding="utf-8"))
    else:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    return tuple((entry["outward"], entry["inward"]) for entry in raw["link_types"])


def inward_to_outward(link_types: Iterable[tuple[str, str]] | None = None) -> dict[str, str]:
    pairs = link_types if link_types is not None else load_link_types()
    return {inward: outward for outward, inward in pairs}


def _fetch_page(
    session: Any,
    config: JiraSourceConfig,
    start_at: int,
    sleep: Callable[[float], None],
) -> dict:
    url = config.base_url.rstrip("/") + "/rest/api/2/search"
    params = {
        "jql": f"project={config.project_key}",
        "startAt": start_at,
        "maxResults": config.page_size,
        "fields": SEARCH_FIELDS,
    }
    headers = {}
    if config.auth_token:
        headers["Authorization"] = f"Bearer {config.auth_token}"

    last_error: Exception | None = None
    for attempt in range(config.max_retries + 1):
        if attempt:
            delay = 0.5 * 2 ** (attempt - 1)
            log.warning("retrying page startAt=%d (attempt %d) after %.1fs", start_at, attempt, delay)
            sleep(delay)
        try:
            response = session.get(url, params=params, headers=headers, timeout=config.request_timeout)
        except requests.RequestException as exc:
            last_error = exc
            continue
        if response.status_code in (401, 403):
            raise AuthError(f"auth error: HTTP {response.status_code} from {url}")
        if response.status_code >= 500 or response.status_code == 429:
            last_error = RuntimeError(f"HTTP {response.status_code}")
            continue
        if response.status_code != 200:
            raise ProtocolError(f"protocol error at startAt={start_at}: HTTP {response.status_code}")
        try:
            payload = response.json()
        except ValueError as exc:
            raise ProtocolError(f"protocol error at startAt={start_at}: invalid JSON") from exc
        if not isinstance(payload, dict) or "issues" not in payload:
            raise ProtocolError(f"protocol error at startAt={start_at}: missing 'issues'")
        return payload
    raise SourceUnavailableError(f"source unavailable after {config.max_retries} retries: {last_error}")


def fetch_project(
    config: JiraSourceConfig,
    session: Any | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> list[RawIssueRecord]:
    """Fetch every issue of a project via the paginated search endpoint.

    Transient failures (connection errors, HTTP 5xx/429) are retried with
    exponential backoff up to ``max_retries``; 401/403 abort immediately.
    Page fetches after the first may run concurrently up to
    ``max_concurrency``; the returned order is always by ``startAt``.
    """
    session = session if session is not None else requests.Session()
    first = _fetch_page(session, config, 0, sleep)
    total = int(first.get("total", len(first["issues"])))
    records: list[RawIssueRecord] = list(first["issues"])
    offsets = list(range(config.page_size, total, config.page_size))
    if not offsets:
        return records

    if config.max_concurrency > 1:
        with ThreadPoolExecutor(max_workers=config.max_concurrency) as pool:
            pages = list(pool.map(lambda off: _fetch_page(session, config, off, sleep), offsets))
    else:
        pages = [_fetch_page(session, config, off, sleep) for off in offsets]
    for page in pages:
        records.extend(page["issues"])
    return records


def load_dump(path: str | Path) -> list[RawIssueRecord]:
    """Load raw issue records from an exported JSON dump.

    Accepts either a top-level array of issue objects or an object with an
    ``issues`` array; record order is preserved.
    """
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"parse error at byte offset {exc.pos}: {exc.msg}") from exc
    if isinstance(data, dict):
        data = data.get("issues", [])
    if not isinstance(data, list):
        raise ValueError("dump must be a JSON array of issues or an object with an 'issues' array")
    return data


def _field(record: Mapping, *path: str) -> Any:
    value: Any = record
    for key in path:
        if not isinstance(value, Mapping):
            return None
        value = value.get(key)
    return value


def _user_id(blob: Any) -> str | None:
    if not isinstance(blob, Mapping):
        return None
    for key in ("name", "accountId", "key", "emailAddress", "displayName"):
        if blob.get(key):
            return str(blob[key])
    return None


def _issue_from_record(record: RawIssueRecord, project: str) -> Issue:
    key = record.get("key") or record.get("id")
    if not key:
        raise ValueError(f"record has no id/key fields: {dict(record)!r}")
    fields = record.get("fields", {})
    return Issue(
        id=str(key),
        summary=_field(fields, "summary") or "",
        description=_field(fields, "description") or "",
        issue_type=_field(fields, "issuetype", "name") or "",
        status=_field(fields, "status", "name") or "",
        created=parse_timestamp(fields["created"]) if fields.get("created") else parse_timestamp("1970-01-01T00:00:00+00:00"),
        assignee=_user_id(fields.get("assignee")),
        reporter=_user_id(fields.get("reporter")) or "",
        project=project,
    )


def canonicalize_links(
    records: Sequence[RawIssueRecord],
    project: str | None = None,
    link_types: Iterable[tuple[str, str]] | None = None,
) -> tuple[ProjectDataset, IngestionReport]:
    """Build a ProjectDataset from raw records, one link per logical pair.

    Every issuelink entry is re-expressed in its outward direction: outward
    descriptors keep (record -> other); inward descriptors are reversed to
    (other -> record).  Links to issues outside the record set are dropped
    and counted.  Duplicate (source, target, label) triples collapse to the
    first occurrence; endpoint records that disagree on the label are
    resolved in favor of the outward record and logged.
    """
    inward_map = inward_to_outward(link_types)
    report = IngestionReport()

    issues = [_issue_from_record(record, project or "") for record in records]
    if project is None:
        project = issues[0].id.rsplit("-", 1)[0] if issues else ""
        issues = [dataclasses.replace(issue, project=project) for issue in issues]
    known = {issue.id for issue in issues}

    # Triples seen from the outward side and from the (reversed) inward side.
    ordered: list[tuple[str, str, str]] = []
    sides: dict[tuple[str, str, str], set[str]] = {}
    pair_labels: dict[tuple[str, str], dict[str, set[str]]] = {}

    def note(side: str, source: str, target: str, label: str) -> None:
        if target not in known or source not in known:
            report.dropped_external += 1
            return
        if source == target:
            report.dropped_self += 1
            return
        triple = (source, target, label)
        if triple in sides:
            report.duplicates_collapsed += 1
        else:
            ordered.append(triple)
            sides[triple] = set()
        sides[triple].add(side)
        pair_labels.setdefault((source, target), {"outward": set(), "inward": set()})[side].add(label)

    for record in records:
        this_key = str(record.get("key") or record.get("id"))
        for entry in _field(record, "fields", "issuelinks") or []:
            report.total_link_entries += 1
            type_blob = entry.get("type", {})
            outward_label = type_blob.get("outward") or type_blob.get("name") or ""
            other_out = _field(entry, "outwardIssue", "key") or _field(entry, "outwardIssue", "id")
            other_in = _field(entry, "inwardIssue", "key") or _field(entry, "inwardIssue", "id")
            if other_out:
                note("outward", this_key, str(other_out), outward_label)
            elif other_in:
                # The record sits on the inward side; recover the outward label.
                if not type_blob.get("outward") and type_blob.get("inward"):
                    mapped = inward_map.get(type_blob["inward"])
                    if mapped is None:
                        report.unmapped_inward.append(type_blob["inward"])
                        continue
                    outward_label = mapped
                note("inward", str(other_in), this_key, outward_label)

    links: list[IssueLink] = []
    for source, target, label in ordered:
        labels = pair_labels[(source, target)]
        if labels["outward"] and labels["inward"] and labels["outward"] != labels["inward"]:
            # Endpoint records disagree on this pair; trust the outward side.
            if "outward" not in sides[(source, target, label)]:
                report.disagreements += 1
                log.warning(
                    "link %s -> %s: endpoints disagree (outward %r vs inward %r); trusting outward record",
                    source, target, sorted(labels["outward"]), sorted(labels["inward"]),
                )
                continue
        links.append(IssueLink(source, target, label))

    dataset = ProjectDataset(project=project, issues=tuple(issues), links=tuple(links))
    return dataset, report


def save_dataset(dataset: ProjectDataset, path: str | Path) -> None:
    """Write the dataset JSON (UTF-8, deterministic layout); round-trips exactly."""
    payload = json.dumps(dataset_to_dict(dataset), ensure_ascii=False, indent=2)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(payload + "\n")


def load_dataset(path: str | Path) -> ProjectDataset:
    with open(path, encoding="utf-8") as handle:
        return dataset_from_dict(json.load(handle))
