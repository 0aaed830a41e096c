"""Request log parsing, filtering and session reconstruction.

Raw server logs arrive as delimited text with one request per line. The
functions here turn them into bounded-length navigation sessions over a dense
integer page vocabulary. Page ids 0 and 1 are reserved for the artificial
start and finish states that bracket every session downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

START = 0
FINISH = 1
FIRST_PAGE_ID = 2

DEFAULT_GAP_SECONDS = 1800.0
DEFAULT_MAX_SESSION_LEN = 15

_ROLES = ("source", "timestamp", "url", "status")


def normalize_url(url: str) -> str:
    """Strip query string, fragment and trailing slashes from a url path.

    A bare "/" (or a path that reduces to nothing) normalizes to "/" so that a
    non-empty input never produces an empty page key.
    """
    url = url.strip()
    for sep in ("?", "#"):
        pos = url.find(sep)
        if pos >= 0:
            url = url[:pos]
    stripped = url.rstrip("/")
    if not stripped:
        return "/" if url else ""
    return stripped


@dataclass(frozen=True)
class LogRecord:
    source_key: str
    timestamp: float
    url: str
    status: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.url:
            raise ValueError("LogRecord url must be non-empty")
        if not (self.timestamp >= 0.0 and self.timestamp == self.timestamp):
            raise ValueError("LogRecord timestamp must be finite and non-negative")


@dataclass(frozen=True)
class LogFormat:
    """Column layout of a delimited request log.

    ``columns`` names the role of each field in order; use "-" for fields to
    ignore. ``delimiter`` of None means any-whitespace splitting.
    """

    columns: tuple[str, ...]
    delimiter: Optional[str] = ","

    def __post_init__(self) -> None:
        for col in self.columns:
            if col not in _ROLES and col != "-":
                raise ValueError(f"unknown column role {col!r}")
        for role in ("source", "timestamp", "url"):
            if role not in self.columns:
                raise ValueError(f"log format is missing required role {role!r}")
        if self.columns.count("status") > 1 or any(self.columns.count(r) > 1 for r in _ROLES):
            raise ValueError("duplicate column role in log format")


def parse_log(lines: Iterable[str], fmt: LogFormat) -> tuple[list[LogRecord], int]:
    """Parse delimited log lines into records.

    Returns ``(records, skipped)`` where ``skipped`` counts malformed lines:
    wrong field count, unparsable timestamp or status, or an empty url after
    normalization. Blank lines are skipped silently as well.
    """
    records: list[LogRecord] = []
    skipped = 0
    ncols = len(fmt.columns)
    for line in lines:
        line = line.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        fields = line.split(fmt.delimiter) if fmt.delimiter is not None else line.split()
        if len(fields) != ncols:
            skipped += 1
            continue
        values = dict(zip(fmt.columns, (f.strip() for f in fields)))
        try:
            timestamp = float(values["timestamp"])
            status = int(values["status"]) if "status" in values and values["status"] else None
            record = LogRecord(
                source_key=values["source"],
                timestamp=timestamp,
                url=normalize_url(values["url"]),
                status=status,
            )
        except ValueError:
            skipped += 1
            continue
        if not record.source_key:
            skipped += 1
            continue
        records.append(record)
    return records, skipped


@dataclass(frozen=True)
class FilterRules:
    """Url-suffix and status-class exclusions.

    ``keep_suffixes`` overrides ``exclude_suffixes`` so a site where e.g.
    image requests are genuine page views can retain them. Status classes are
    the hundreds digit (4 excludes 400..499); records without a status are
    never excluded on status.
    """

    exclude_suffixes: frozenset[str] = frozenset()
    keep_suffixes: frozenset[str] = frozenset()
    exclude_status_classes: frozenset[int] = frozenset()

    def admits(self, record: LogRecord) -> bool:
        if record.status is not None and record.status // 100 in self.exclude_status_classes:
            return False
        url = record.url
        if any(url.endswith(suf) for suf in self.keep_suffixes):
            return True
        if any(url.endswith(suf) for suf in self.exclude_suffixes):
            return False
        return True


def filter_requests(records: Iterable[LogRecord], rules: FilterRules) -> list[LogRecord]:
    """Drop records violating the rules; relative order is preserved."""
    return [r for r in records if rules.admits(r)]


class PageTable:
    """Bijection between url strings and dense integer page ids.

    Ids start at FIRST_PAGE_ID; 0 and 1 stay reserved for the artificial
    start/finish states and never map to a url.
    """

    def __init__(self) -> None:
        self._id_by_url: dict[str, int] = {}
        self._url_by_id: dict[int, str] = {}

    def __len__(self) -> int:
        return len(self._id_by_url)

    def __contains__(self, url: str) -> bool:
        return url in self._id_by_url

    def id_for(self, url: str) -> int:
        """Return the id for ``url``, registering it if new."""
        if not url:
            raise ValueError("cannot register an empty url")
        existing = self._id_by_url.get(url)
        if existing is not None:
            return existing
        page_id = FIRST_PAGE_ID + len(self._id_by_url)
        self._id_by_url[url] = page_id
        self._url_by_id[page_id] = url
        return page_id

    def lookup(self, url: str) -> int:
        return self._id_by_url[url]

    def url_of(self, page_id: int) -> str:
        if page_id in (START, FINISH):
            raise ValueError(f"page id {page_id} is reserved for an artificial state")
        return self._url_by_id[page_id]

    def urls(self) -> Iterator[tuple[int, str]]:
        return iter(sorted(self._url_by_id.items()))


@dataclass(frozen=True)
class Session:
    """A reconstructed navigation session: page ids plus its start time."""

    pages: tuple[int, ...]
    first_timestamp: float

    def __post_init__(self) -> None:
        if len(self.pages) == 0:
            raise ValueError("Session must contain at least one page")
        if any(p in (START, FINISH) for p in self.pages):
            raise ValueError("Session pages must not contain reserved ids")

    def __len__(self) -> int:
        return len(self.pages)


def sessionize(
    records: Sequence[LogRecord],
    page_table: PageTable,
    gap_seconds: float = DEFAULT_GAP_SECONDS,
    max_session_len: int = DEFAULT_MAX_SESSION_LEN,
    key_mode: str = "source",
) -> list[Session]:
    """Group requests into sessions per visitor.

    Requests of one source key are ordered by timestamp (stable, so ties keep
    log order), a gap greater than ``gap_seconds`` starts a new session, and
    sessions longer than ``max_session_len`` are split into consecutive
    non-overlapping chunks. Output is ordered by session first_timestamp,
    again stably.
    """
    if key_mode != "source":
        raise ValueError(f"unsupported key_mode {key_mode!r}")
    if gap_seconds <= 0:
        raise ValueError("gap_seconds must be positive")
    if max_session_len < 1:
        raise ValueError("max_session_len must be at least 1")

    # Register urls in input order so the id assignment does not depend on
    # the per-key grouping.
    for record in records:
        page_table.id_for(record.url)

    by_key: dict[str, list[LogRecord]] = {}
    for record in records:
        by_key.setdefault(record.source_key, []).append(record)

    sessions: list[Session] = []
    for key in by_key:
        group = sorted(by_key[key], key=lambda r: r.timestamp)
        runs: list[list[LogRecord]] = []
        for record in group:
            if runs and record.timestamp - runs[-1][-1].timestamp <= gap_seconds:
                runs[-1].append(record)
            else:
                runs.append([record])
        for run in runs:
            for i in range(0, len(run), max_session_len):
                chunk = run[i : i + max_session_len]
                sessions.append(
                    Session(
                        pages=tuple(page_table.lookup(r.url) for r in chunk),
                        first_timestamp=chunk[0].timestamp,
                    )
                )
    sessions.sort(key=lambda s: s.first_timestamp)
    return sessions


def _format_timestamp(ts: float) -> str:
    if float(ts).is_integer():
        return str(int(ts))
    return repr(ts)


def write_sessions_file(sessions: Iterable[Session], stream) -> None:
    """Write the canonical session format: ``first_timestamp<TAB>id id ...``."""
    for session in sessions:
        stream.write(_format_timestamp(session.first_timestamp))
        stream.write("\t")
        stream.write(" ".join(str(p) for p in session.pages))
        stream.write("\n")


def read_sessions_file(lines: Iterable[str], page_table: Optional[PageTable] = None) -> list[Session]:
    """Read sessions from text, one per line.

    The canonical form carries a leading timestamp separated by a tab; plain
    lines of whitespace-separated tokens are accepted too, with the line index
    standing in for the missing timestamp. An all-digit token is taken as a
    page id (which must not be a reserved id); any other token is a url and
    requires a ``page_table`` to register against.
    """
    sessions: list[Session] = []
    for index, line in enumerate(lines):
        line = line.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        if "\t" in line:
            ts_text, body = line.split("\t", 1)
            timestamp = float(ts_text)
        else:
            timestamp = float(index)
            body = line
        pages: list[int] = []
        for token in body.split():
            if token.isdigit():
                page_id = int(token)
                if page_id in (START, FINISH):
                    raise ValueError(f"page id {page_id} is reserved")
                pages.append(page_id)
            else:
                if page_table is None:
                    raise ValueError("url tokens in session file require a page table")
                pages.append(page_table.id_for(normalize_url(token)))
        sessions.append(Session(pages=tuple(pages), first_timestamp=timestamp))
    return sessions
