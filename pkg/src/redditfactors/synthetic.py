"""Synthetic corpora and return panels with planted structure.

Used by the test-suite and the demos in place of the archived comment dump
and licensed market data. Everything is driven by a single integer seed.
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path
from zoneinfo import ZoneInfo

import numpy as np
import pandas as pd
import yaml

from .ingest import MARKET_TZ, Comment, Corpus, TickerSpec, detect_mentions, write_jsonl
from .factors import frequency_panel, to_trading

# Ticker universe and ETF benchmarks used throughout the demos.
DEFAULT_UNIVERSE = (
    ("WMT", ("walmart",), "XRT"),
    ("MSFT", ("microsoft",), "IYW"),
    ("NKE", ("nike",), "VDC"),
    ("PFE", ("pfizer",), "XPH"),
    ("TSLA", ("tesla",), "LIT"),
)
DEFAULT_TOPICS = {"WMT": 4, "MSFT": 3, "NKE": 3, "PFE": 3, "TSLA": 5}

_SYLLABLES = ("ka", "lo", "mi", "ru", "sen", "tor", "vax", "pel", "dun", "qui",
              "zor", "bra", "fen", "gul", "hix", "jor", "nex", "oba", "pra", "wyn")


def topic_words(topic: int, n: int = 20, salt: int = 0) -> list:
    """Distinct alphabetic pseudo-words; disjoint across (topic, salt) pairs."""
    words = []
    for i in range(n):
        a = _SYLLABLES[i % len(_SYLLABLES)]
        b = _SYLLABLES[(i // len(_SYLLABLES) + topic + 3 * salt) % len(_SYLLABLES)]
        words.append(f"{a}{b}x{salt}t{topic}")
    return words


def planted_topic_docs(n_docs: int = 200, n_topics: int = 3, vocab_size: int = 20,
                       doc_len=(6, 14), seed: int = 0, salt: int = 0):
    """Documents drawn from disjoint per-topic vocabularies.

    Returns ``(bodies, labels)``.
    """
    rng = np.random.default_rng(seed)
    vocabs = [topic_words(t, vocab_size, salt) for t in range(n_topics)]
    labels = np.arange(n_docs) % n_topics
    rng.shuffle(labels)
    bodies = []
    for lab in labels:
        length = int(rng.integers(doc_len[0], doc_len[1] + 1))
        bodies.append(" ".join(rng.choice(vocabs[lab], size=length)))
    return bodies, labels


def universe_specs(universe=DEFAULT_UNIVERSE) -> list:
    return [TickerSpec(sym, frozenset(aliases)) for sym, aliases, _ in universe]


def fixture_corpus(start: dt.date, end: dt.date, universe=DEFAULT_UNIVERSE,
                   topics: dict | None = None, mean_volume: float = 120.0,
                   mention_rate: float = 0.05, seed: int = 0,
                   tz: str = MARKET_TZ) -> Corpus:
    """A subreddit-like corpus with per-stock planted comment classes.

    Each day has Poisson volume; the share of comments about each stock
    wanders day to day so mention frequencies carry signal. Comments about
    a stock are built from one of that stock's topic vocabularies plus the
    ticker or its alias.
    """
    topics = topics or DEFAULT_TOPICS
    rng = np.random.default_rng(seed)
    zone = ZoneInfo(tz)
    specs = universe_specs(universe)
    filler = topic_words(0, 30, salt=99)
    slang = ("tendies", "stonks", "yolo", "moon", "rocket", "puts", "calls", "gains", "loss", "hold")
    comments = []
    day = start
    serial = 0
    while day <= end:
        midnight = int(dt.datetime(day.year, day.month, day.day, tzinfo=zone).timestamp())
        length = int(dt.datetime.combine(day + dt.timedelta(days=1), dt.time(), zone).timestamp()) - midnight
        vol = int(rng.poisson(mean_volume))
        intensity = {sym: mention_rate * float(np.exp(rng.normal(0.0, 0.6)))
                     for sym, _, _ in universe}
        for _ in range(vol):
            ts = midnight + int(rng.integers(0, length))
            u = rng.random()
            body = " ".join(rng.choice(filler, size=int(rng.integers(3, 9))))
            acc = 0.0
            for s, (sym, aliases, _) in enumerate(universe):
                acc += intensity[sym]
                if u < acc:
                    t = int(rng.integers(topics.get(sym, 3)))
                    words = list(rng.choice(topic_words(t, 20, salt=s + 1), size=int(rng.integers(5, 12))))
                    words += list(rng.choice(slang, size=int(rng.integers(0, 4))))
                    rng.shuffle(words)
                    name = sym.lower() if rng.random() < 0.7 else aliases[0]
                    body = " ".join([name, *words])
                    break
            serial += 1
            mentions = detect_mentions(body, specs)
            comments.append(Comment(f"c{serial:07d}", ts, body if mentions else "", frozenset(mentions)))
        day += dt.timedelta(days=1)
    span_end = int(dt.datetime.combine(end + dt.timedelta(days=1), dt.time(), zone).timestamp()) - 1
    span_start = int(dt.datetime.combine(start, dt.time(), zone).timestamp())
    return Corpus.from_comments(comments, span=(span_start, span_end))


def trading_days(start: dt.date, end: dt.date) -> list:
    return [d.date() for d in pd.bdate_range(start, end)]


def ff3_factors(dates, seed: int = 0) -> pd.DataFrame:
    """Market excess return, HML and SMB in percent."""
    rng = np.random.default_rng(seed)
    n = len(dates)
    return pd.DataFrame({
        "Rm": rng.normal(0.04, 1.0, n),
        "HML": rng.normal(0.0, 0.5, n),
        "SMB": rng.normal(0.0, 0.5, n),
    }, index=list(dates))


def fixture_returns(corpus: Corpus, start: dt.date, end: dt.date,
                    universe=DEFAULT_UNIVERSE, loadings: dict | None = None,
                    noise: float = 1.0, seed: int = 0, tz: str = MARKET_TZ) -> pd.DataFrame:
    """FF3 returns plus ``loadings[sym] * f_all`` for each stock, in percent.

    Stock and ETF columns are excess returns; ``Rm`` is the market excess return.
    """
    loadings = loadings or {}
    dates = trading_days(start, end)
    frame = ff3_factors(dates, seed)
    rng = np.random.default_rng([seed, 1])
    for sym, _, etf in universe:
        f_all = to_trading(frequency_panel(corpus, sym, start, end, tz=tz)[0], dates).values
        beta = rng.uniform(0.5, 1.3)
        y = (0.05 + beta * frame["Rm"] + rng.uniform(-0.5, 0.5) * frame["HML"]
             + rng.uniform(-0.6, 0.3) * frame["SMB"] + rng.normal(0.0, noise, len(dates)))
        y = y + loadings.get(sym, 0.0) * f_all.reindex(dates).fillna(0.0).to_numpy()
        frame[sym] = y
        frame[etf] = 0.9 * frame["Rm"] + rng.normal(0.0, 0.5, len(dates))
    return frame


def write_returns_csv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = frame.copy()
    out.insert(0, "date", [d.isoformat() for d in out.index])
    out.to_csv(path, index=False, float_format="%.10f", lineterminator="\n")
    return path


def write_fixture(directory, start=dt.date(2018, 6, 1), end=dt.date(2018, 11, 30),
                  loadings=None, seed: int = 0, mean_volume: float = 120.0,
                  grid: dict | None = None) -> Path:
    """Write ``corpus.jsonl``, ``returns.csv`` and ``config.yaml``; return the config path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    corpus = fixture_corpus(start, end, mean_volume=mean_volume, seed=seed)
    write_jsonl(corpus, directory / "corpus.jsonl")
    returns = fixture_returns(corpus, start, end, loadings=loadings, seed=seed)
    write_returns_csv(returns, directory / "returns.csv")
    config = {
        "schema_version": 1,
        "subreddit": "wallstreetbets",
        "start": start.isoformat(),
        "end": end.isoformat(),
        "tickers": [{"symbol": s, "aliases": list(a), "etf": e} for s, a, e in DEFAULT_UNIVERSE],
        "grid": grid or {"j_range": [2, 3, 4, 5, 6], "k_range": [2, 3, 4, 5, 6], "restarts": 4},
        "seed": seed,
        "inputs": {"corpus": "corpus.jsonl", "returns": "returns.csv"},
        "output_dir": "out",
    }
    path = directory / "config.yaml"
    path.write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
    return path
