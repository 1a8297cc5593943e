"""Comment retrieval, normalization and mention tagging.

Comments are pulled from a Pushshift-compatible archive in consecutive
50-minute windows. A window that comes back full (``size_cap`` records) is
assumed to be truncated and is re-requested as five 10-minute windows.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import re
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence
from zoneinfo import ZoneInfo

import requests

logger = logging.getLogger(__name__)

WINDOW_SECONDS = 50 * 60
SUBWINDOW_SECONDS = 10 * 60
MAX_SIZE_CAP = 5000
MARKET_TZ = "America/New_York"


class IngestError(Exception):
    """Base class for ingestion failures."""


class EmptyRangeError(IngestError, ValueError):
    pass


class InvalidWindowError(IngestError, ValueError):
    pass


class TransportError(IngestError):
    """Raised when the endpoint could not be reached after all retries."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FetchWindow:
    after_utc: int
    before_utc: int
    size_cap: int = MAX_SIZE_CAP

    def __post_init__(self):
        if self.after_utc >= self.before_utc:
            raise InvalidWindowError(
                f"window start {self.after_utc} must precede end {self.before_utc}"
            )
        if not 0 < self.size_cap <= MAX_SIZE_CAP:
            raise InvalidWindowError(f"size_cap must be in (0, {MAX_SIZE_CAP}]")

    @property
    def seconds(self) -> int:
        return self.before_utc - self.after_utc


@dataclass(frozen=True)
class TickerSpec:
    """A stock symbol plus the common names it goes by in comments."""

    symbol: str
    aliases: frozenset = frozenset()

    def __post_init__(self):
        symbol = self.symbol.strip().lower()
        if not symbol:
            raise ValueError("ticker symbol must be non-empty")
        object.__setattr__(self, "symbol", symbol)
        object.__setattr__(
            self, "aliases", frozenset(a.strip().lower() for a in self.aliases if a.strip())
        )

    @property
    def ticker(self) -> str:
        return self.symbol.upper()


@dataclass(frozen=True)
class Comment:
    id: str
    created_utc: int
    body: str
    mentions: frozenset = frozenset()

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "created_utc": int(self.created_utc),
            "body": self.body,
            "mentions": sorted(self.mentions),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Comment":
        return cls(
            id=str(obj["id"]),
            created_utc=int(obj["created_utc"]),
            body=obj.get("body", ""),
            mentions=frozenset(obj.get("mentions", ())),
        )


@dataclass(frozen=True)
class Corpus:
    """Comments sorted by timestamp, unique by id, within ``span``."""

    comments: tuple = ()
    span: tuple = (0, 0)

    def __post_init__(self):
        start, end = self.span
        ids = set()
        prev = None
        for c in self.comments:
            if not start <= c.created_utc <= end:
                raise ValueError(f"comment {c.id} at {c.created_utc} outside span {self.span}")
            if prev is not None and c.created_utc < prev:
                raise ValueError("comments must be sorted by created_utc")
            if c.id in ids:
                raise ValueError(f"duplicate comment id {c.id}")
            ids.add(c.id)
            prev = c.created_utc

    def __len__(self):
        return len(self.comments)

    def __iter__(self):
        return iter(self.comments)

    @classmethod
    def from_comments(cls, comments: Iterable[Comment], span=None) -> "Corpus":
        """Deduplicate by id (first occurrence wins) and sort by time."""
        seen = {}
        for c in comments:
            seen.setdefault(c.id, c)
        ordered = sorted(seen.values(), key=lambda c: (c.created_utc, c.id))
        if span is None:
            span = (ordered[0].created_utc, ordered[-1].created_utc) if ordered else (0, 0)
        return cls(tuple(ordered), tuple(span))

    def mentioning(self, symbol: str) -> list:
        symbol = symbol.upper()
        return [c for c in self.comments if symbol in c.mentions]


# ---------------------------------------------------------------------------
# Request scheduling
# ---------------------------------------------------------------------------


def chunk_schedule(start_utc: int, end_utc: int, size_cap: int = MAX_SIZE_CAP) -> list:
    """Tile ``[start_utc, end_utc)`` with consecutive 50-minute windows.

    The last window is cut short when the range is not a multiple of
    50 minutes.
    """
    if start_utc >= end_utc:
        raise EmptyRangeError(f"empty range: start {start_utc} >= end {end_utc}")
    windows = []
    lo = int(start_utc)
    while lo < end_utc:
        hi = min(lo + WINDOW_SECONDS, int(end_utc))
        windows.append(FetchWindow(lo, hi, size_cap))
        lo = hi
    return windows


def split_window(w: FetchWindow) -> list:
    """Split a full 50-minute window into its five 10-minute epochs."""
    if w.seconds != WINDOW_SECONDS:
        raise InvalidWindowError(
            f"only 50-minute windows can be split, got {w.seconds} seconds"
        )
    return [
        FetchWindow(w.after_utc + i * SUBWINDOW_SECONDS,
                    w.after_utc + (i + 1) * SUBWINDOW_SECONDS,
                    w.size_cap)
        for i in range(5)
    ]


# ---------------------------------------------------------------------------
# HTTP client
# ---------------------------------------------------------------------------


class RateLimiter:
    """Space calls at least ``1 / rate`` seconds apart across threads."""

    def __init__(self, rate: float | None, clock=time.monotonic, sleep=time.sleep):
        self.interval = 0.0 if not rate else 1.0 / rate
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self):
        if self.interval <= 0:
            return
        with self._lock:
            now = self._clock()
            slot = max(now, self._next)
            self._next = slot + self.interval
        delay = slot - now
        if delay > 0:
            self._sleep(delay)


def _valid_record(rec, w: FetchWindow) -> bool:
    if not isinstance(rec, dict):
        return False
    if not isinstance(rec.get("id"), str) or not rec["id"]:
        return False
    if not isinstance(rec.get("body"), str):
        return False
    ts = rec.get("created_utc")
    if isinstance(ts, bool) or not isinstance(ts, (int, float)):
        return False
    return w.after_utc <= ts < w.before_utc


def fetch_window(endpoint: str, subreddit: str, w: FetchWindow, *,
                 session: requests.Session | None = None,
                 max_attempts: int = 5,
                 backoff: float = 0.5,
                 max_backoff: float = 30.0,
                 timeout: float = 30.0,
                 limiter: RateLimiter | None = None,
                 stats: Counter | None = None,
                 sleep=time.sleep) -> list:
    """GET one window of comments.

    Accepts either a bare JSON array or Pushshift's ``{"data": [...]}``
    envelope. Records missing ``id``/``created_utc``/``body`` or lying
    outside the window are dropped and tallied in ``stats["malformed"]``.
    Transport failures are retried with exponential backoff; after
    ``max_attempts`` a :class:`TransportError` is raised.
    """
    if not subreddit:
        raise ValueError("subreddit must be non-empty")
    http = session or requests
    params = {
        "subreddit": subreddit,
        "after": w.after_utc,
        "before": w.before_utc,
        "size": w.size_cap,
    }
    last_exc = None
    for attempt in range(max_attempts):
        if limiter is not None:
            limiter.wait()
        try:
            resp = http.get(endpoint, params=params, timeout=timeout)
            resp.raise_for_status()
            payload = resp.json()
            break
        except (requests.RequestException, ValueError) as exc:
            last_exc = exc
            if attempt + 1 < max_attempts:
                delay = min(backoff * 2 ** attempt, max_backoff)
                logger.warning("fetch %s failed (%s); retry in %.1fs", params, exc, delay)
                sleep(delay)
    else:
        raise TransportError(
            f"gave up on window [{w.after_utc}, {w.before_utc}) after {max_attempts} attempts"
        ) from last_exc

    if isinstance(payload, dict):
        payload = payload.get("data", [])
    if not isinstance(payload, list):
        payload = []
        if stats is not None:
            stats["malformed"] += 1
    records = []
    for rec in payload:
        if _valid_record(rec, w):
            records.append(rec)
        elif stats is not None:
            stats["malformed"] += 1
    return records[: w.size_cap]


def fetch_range(endpoint: str, subreddit: str, start_utc: int, end_utc: int,
                universe: Sequence[TickerSpec], *,
                session: requests.Session | None = None,
                max_workers: int = 4,
                rate: float | None = None,
                keep_all_bodies: bool = False,
                stats: Counter | None = None,
                **fetch_kwargs) -> Corpus:
    """Retrieve, normalize and tag every comment posted in a time range.

    Windows that return exactly ``size_cap`` records are refetched as five
    10-minute windows. Non-mentioning comments keep only id and timestamp
    unless ``keep_all_bodies`` is set.
    """
    stats = stats if stats is not None else Counter()
    limiter = RateLimiter(rate)
    windows = chunk_schedule(start_utc, end_utc)

    def run(w):
        local = Counter()
        recs = fetch_window(endpoint, subreddit, w, session=session,
                            limiter=limiter, stats=local, **fetch_kwargs)
        return recs, local

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        first = list(pool.map(run, windows))
        saturated = [w for w, (recs, _) in zip(windows, first)
                     if len(recs) >= w.size_cap and w.seconds == WINDOW_SECONDS]
        refetch = [sub for w in saturated for sub in split_window(w)]
        second = list(pool.map(run, refetch))
    for _, local in first + second:
        stats.update(local)
    first = [recs for recs, _ in first]
    second = [recs for recs, _ in second]

    stats["windows"] += len(windows)
    stats["split"] += len(saturated)
    for sub, recs in zip(refetch, second):
        if len(recs) >= sub.size_cap:
            logger.warning("10-minute window [%d, %d) is also full; comments may be missing",
                           sub.after_utc, sub.before_utc)

    saturated_set = set(saturated)
    batches = [recs for w, recs in zip(windows, first) if w not in saturated_set] + second
    comments = []
    for recs in batches:
        for rec in recs:
            comments.append(make_comment(rec, universe, keep_body=keep_all_bodies))
    corpus = Corpus.from_comments(comments, span=(int(start_utc), int(end_utc)))
    stats["comments"] = len(corpus)
    return corpus


def make_comment(rec: dict, universe: Sequence[TickerSpec], keep_body: bool = True) -> Comment:
    body = normalize_text(rec.get("body", ""))
    mentions = detect_mentions(body, universe)
    if not mentions and not keep_body:
        body = ""
    return Comment(str(rec["id"]), int(rec["created_utc"]), body, frozenset(mentions))


# ---------------------------------------------------------------------------
# Text handling
# ---------------------------------------------------------------------------

_NON_PRINTABLE = re.compile(r"[^\x20-\x7e\s]")
_WS = re.compile(r"\s+")


def normalize_text(raw: str) -> str:
    """Drop non-ASCII characters, lowercase, and collapse whitespace.

    Accented letters are deleted outright: ``"Café"`` becomes ``"caf"``.
    """
    if not raw:
        return ""
    text = raw.encode("ascii", "ignore").decode("ascii")
    text = _NON_PRINTABLE.sub("", text)
    return _WS.sub(" ", text).strip().lower()


def _term_pattern(term: str) -> re.Pattern:
    return re.compile(r"(?<![a-z0-9])" + re.escape(term) + r"(?![a-z0-9])")


def detect_mentions(body: str, universe: Sequence[TickerSpec]) -> set:
    """Return upper-case tickers whose symbol or alias occurs as a whole word."""
    found = set()
    for spec in universe:
        for term in (spec.symbol, *sorted(spec.aliases)):
            if _term_pattern(term).search(body):
                found.add(spec.ticker)
                break
    return found


# ---------------------------------------------------------------------------
# Daily volume and persistence
# ---------------------------------------------------------------------------


def local_date(created_utc: int, tz: str = MARKET_TZ) -> dt.date:
    return dt.datetime.fromtimestamp(created_utc, tz=ZoneInfo(tz)).date()


def daily_volume(corpus: Iterable[Comment], start: dt.date, end: dt.date,
                 tz: str = MARKET_TZ) -> dict:
    """Count comments per local calendar day over ``[start, end]`` inclusive."""
    days = (end - start).days + 1
    counts = {start + dt.timedelta(days=i): 0 for i in range(max(days, 0))}
    for c in corpus:
        d = local_date(c.created_utc, tz)
        if d in counts:
            counts[d] += 1
    return counts


def write_jsonl(corpus: Iterable[Comment], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for c in corpus:
            fh.write(json.dumps(c.to_json(), sort_keys=True) + "\n")
    return path


def read_jsonl(path, span=None) -> Corpus:
    comments = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                comments.append(Comment.from_json(json.loads(line)))
    return Corpus.from_comments(comments, span=span)

