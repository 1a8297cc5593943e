"""Daily reddit factors: mention, class and buzzword frequencies.

Every frequency divides a day's count by that day's total comment volume on
the subreddit. Days with zero volume get 0. Series are built on calendar
days and then restricted to the trading calendar, so activity on weekends
and holidays never enters an unlagged regression.
"""

from __future__ import annotations

import csv
import datetime as dt
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .ingest import MARKET_TZ, daily_volume, local_date
from .vectorize import DEFAULT_NGRAM_RANGE, document_terms, tokenize

N_BUZZWORDS = 10
N_CANDIDATES = 100


class UnknownClassError(KeyError):
    pass


class SeriesTooShortError(ValueError):
    pass


class InsufficientOverlapError(ValueError):
    pass


@dataclass(frozen=True)
class FactorSeries:
    name: str
    stock: str
    values: pd.Series       # indexed by datetime.date, ascending

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class BuzzwordSet:
    stock: str
    terms: tuple
    correlations: tuple

    def __post_init__(self):
        if len(self.terms) != N_BUZZWORDS:
            raise ValueError(f"a buzzword set holds exactly {N_BUZZWORDS} terms")


# ---------------------------------------------------------------------------
# Scalar definitions
# ---------------------------------------------------------------------------


def _ratio(count, volume) -> float:
    return count / volume if volume > 0 else 0.0


def _on_day(comments, day, tz):
    return [c for c in comments if local_date(c.created_utc, tz) == day]


def mention_frequency(comments, stock: str, day: dt.date, volume: int,
                      tz: str = MARKET_TZ) -> float:
    """Share of the day's comments that mention ``stock``."""
    stock = stock.upper()
    n = sum(1 for c in _on_day(comments, day, tz) if stock in c.mentions)
    return _ratio(n, volume)


def class_frequency(comments, stock: str, cls: int, classes: Mapping[str, int],
                    day: dt.date, volume: int, k: int | None = None,
                    tz: str = MARKET_TZ) -> float:
    """Share of the day's comments that mention ``stock`` and fall in class ``cls``."""
    if k is None:
        k = max(classes.values(), default=-1) + 1
    if not 0 <= cls < k:
        raise UnknownClassError(f"class {cls} not in [0, {k})")
    stock = stock.upper()
    n = sum(1 for c in _on_day(comments, day, tz)
            if stock in c.mentions and classes.get(c.id) == cls)
    return _ratio(n, volume)


def squared_frequency(count: int, volume: int) -> float:
    """``count**2 / volume``: only the numerator is squared."""
    return _ratio(count * count, volume)


def buzzword_series(comments, stock: str, term: str, day: dt.date, volume: int,
                    stopwords=frozenset(), ngram_range=DEFAULT_NGRAM_RANGE,
                    tz: str = MARKET_TZ) -> float:
    """Occurrences of ``term`` in the day's ``stock``-mentioning comments over volume."""
    stock = stock.upper()
    n = 0
    for c in _on_day(comments, day, tz):
        if stock in c.mentions:
            n += sum(1 for t in document_terms(tokenize(c.body), stopwords, ngram_range) if t == term)
    return _ratio(n, volume)


# ---------------------------------------------------------------------------
# Panel builders
# ---------------------------------------------------------------------------


def calendar_days(start: dt.date, end: dt.date) -> list:
    return [start + dt.timedelta(days=i) for i in range((end - start).days + 1)]


def volume_series(corpus, start: dt.date, end: dt.date, tz: str = MARKET_TZ) -> pd.Series:
    vol = daily_volume(corpus, start, end, tz)
    return pd.Series(vol, dtype=np.int64).sort_index()


def frequency_panel(corpus, stock: str, start: dt.date, end: dt.date,
                    classes: Mapping[str, int] | None = None, k: int | None = None,
                    tz: str = MARKET_TZ, volume: pd.Series | None = None) -> list:
    """Build f_all, f_all_sq and (given classes) f_c<i>, f_c<i>_sq per calendar day."""
    stock = stock.upper()
    days = calendar_days(start, end)
    if volume is None:
        volume = volume_series(corpus, start, end, tz)
    vol = volume.reindex(days, fill_value=0).to_numpy(dtype=float)
    if classes is not None and k is None:
        k = max(classes.values(), default=-1) + 1
    pos = {d: i for i, d in enumerate(days)}
    mentions = np.zeros(len(days))
    per_class = np.zeros((k or 0, len(days)))
    for c in corpus:
        if stock not in c.mentions:
            continue
        i = pos.get(local_date(c.created_utc, tz))
        if i is None:
            continue
        mentions[i] += 1
        if classes is not None and c.id in classes:
            per_class[classes[c.id], i] += 1

    def ratio(num):
        out = np.zeros_like(num)
        np.divide(num, vol, out=out, where=vol > 0)
        return pd.Series(out, index=days)

    series = [
        FactorSeries("f_all", stock, ratio(mentions)),
        FactorSeries("f_all_sq", stock, ratio(mentions ** 2)),
    ]
    for c in range(k or 0):
        series.append(FactorSeries(f"f_c{c}", stock, ratio(per_class[c])))
    for c in range(k or 0):
        series.append(FactorSeries(f"f_c{c}_sq", stock, ratio(per_class[c] ** 2)))
    return series


def stock_terms(comments, stopwords=frozenset(), ngram_range=DEFAULT_NGRAM_RANGE):
    return [document_terms(tokenize(c.body), stopwords, ngram_range) for c in comments]


def top_ngrams(comments, stopwords=frozenset(), limit: int = N_CANDIDATES,
               ngram_range=DEFAULT_NGRAM_RANGE) -> list:
    """Most frequent post-stopword n-grams by total count; ties sorted by term."""
    counts = Counter()
    for terms in stock_terms(comments, stopwords, ngram_range):
        counts.update(terms)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [t for t, _ in ranked[:limit]]


def buzzword_panel(corpus, stock: str, terms: Sequence[str], start: dt.date, end: dt.date,
                   stopwords=frozenset(), ngram_range=DEFAULT_NGRAM_RANGE,
                   tz: str = MARKET_TZ, volume: pd.Series | None = None) -> pd.DataFrame:
    """Daily occurrence frequency of each term inside ``stock``-mentioning comments."""
    stock = stock.upper()
    days = calendar_days(start, end)
    if volume is None:
        volume = volume_series(corpus, start, end, tz)
    vol = volume.reindex(days, fill_value=0).to_numpy(dtype=float)
    col = {t: j for j, t in enumerate(terms)}
    pos = {d: i for i, d in enumerate(days)}
    counts = np.zeros((len(days), len(terms)))
    for c in corpus:
        if stock not in c.mentions:
            continue
        i = pos.get(local_date(c.created_utc, tz))
        if i is None:
            continue
        for t in document_terms(tokenize(c.body), stopwords, ngram_range):
            j = col.get(t)
            if j is not None:
                counts[i, j] += 1
    out = np.zeros_like(counts)
    np.divide(counts, vol[:, None], out=out, where=vol[:, None] > 0)
    return pd.DataFrame(out, index=days, columns=list(terms))


def pearson(x, y) -> float:
    """Pearson correlation; 0 when either side has zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc, yc = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt((xc ** 2).sum()), np.sqrt((yc ** 2).sum())
    if sx == 0 or sy == 0:
        return 0.0
    return float(np.clip((xc * yc).sum() / (sx * sy), -1.0, 1.0))


def select_buzzwords(candidates: Sequence[str], word_series: pd.DataFrame,
                     returns: pd.Series, stock: str = "",
                     n: int = N_BUZZWORDS) -> BuzzwordSet:
    """Keep the ``n`` candidates whose daily frequency correlates most with returns.

    Ranked by |Pearson rho| over the dates both sides share, ties by term.
    This uses the whole sample, so the choice carries look-ahead into any
    in-sample regression that uses the selected terms.
    """
    if len(candidates) < n:
        raise ValueError(f"need at least {n} candidates, got {len(candidates)}")
    common = word_series.index.intersection(returns.dropna().index)
    if len(common) < 3:
        raise InsufficientOverlapError(f"only {len(common)} aligned dates")
    r = returns.loc[common].to_numpy(dtype=float)
    scored = []
    for term in dict.fromkeys(candidates):
        x = word_series[term].loc[common].to_numpy(dtype=float) if term in word_series else np.zeros(len(common))
        scored.append((term, pearson(x, r)))
    scored.sort(key=lambda tr: (-abs(tr[1]), tr[0]))
    top = scored[:n]
    if len(top) < n:
        raise ValueError(f"need at least {n} distinct candidates")
    return BuzzwordSet(stock.upper(), tuple(t for t, _ in top), tuple(p for _, p in top))


# ---------------------------------------------------------------------------
# Calendar handling
# ---------------------------------------------------------------------------


def to_trading(s: FactorSeries, trading_dates: Iterable[dt.date]) -> FactorSeries:
    """Restrict a calendar-day series to trading dates inside its span."""
    idx = [d for d in trading_dates if d in s.values.index]
    return FactorSeries(s.name, s.stock, s.values.loc[idx])


def lag_series(s: FactorSeries, k_days: int = 1) -> FactorSeries:
    """Shift by ``k_days`` positions along the series' own (trading) index.

    The value at date t is the one observed ``k_days`` trading days earlier,
    so Friday feeds Monday; the first ``k_days`` dates are dropped.
    """
    if k_days < 1:
        raise ValueError("lag must be at least one day")
    if k_days >= len(s.values):
        raise SeriesTooShortError(f"cannot lag {len(s.values)} observations by {k_days}")
    vals = s.values.to_numpy()[:-k_days]
    idx = s.values.index[k_days:]
    return FactorSeries(f"{s.name}_lag{k_days}", s.stock, pd.Series(vals, index=idx))


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def write_panel_csv(series: Iterable[FactorSeries], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for s in series:
        for d, v in s.values.items():
            rows.append((d.isoformat(), s.stock, s.name, repr(float(v))))
    rows.sort()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "stock", "series_name", "value"])
        w.writerows(rows)
    return path


def read_panel_csv(path) -> dict:
    """Load a factor panel as ``{(stock, name): FactorSeries}``."""
    df = pd.read_csv(path, dtype={"stock": str, "series_name": str}, float_precision="round_trip")
    out = {}
    for (stock, name), grp in df.groupby(["stock", "series_name"], sort=True):
        idx = [dt.date.fromisoformat(d) for d in grp["date"]]
        out[(stock, name)] = FactorSeries(name, stock, pd.Series(grp["value"].to_numpy(float), index=idx).sort_index())
    return out


def write_buzzword_csv(sets: Iterable[BuzzwordSet], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stock", "rank", "term", "correlation"])
        for b in sets:
            for rank, (t, rho) in enumerate(zip(b.terms, b.correlations)):
                w.writerow([b.stock, rank, t, repr(float(rho))])
    return path
