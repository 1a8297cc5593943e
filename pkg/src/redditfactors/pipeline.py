"""Configuration and stage orchestration: ingest, classify, factors, regress, report.

Each stage writes its outputs under ``output_dir`` plus a small state file
recording a hash of its inputs. A stage whose inputs hash the same and whose
outputs are intact is skipped on rerun.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

import numpy as np
import pandas as pd
import yaml

from . import cluster, factors, ingest, regression
from .synthetic import DEFAULT_UNIVERSE
from .vectorize import load_stopwords

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STAGES = ("ingest", "classify", "factors", "regress", "report")
DEFAULT_ENDPOINT = "https://api.pushshift.io/reddit/comment/search"


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TickerConfig:
    symbol: str
    aliases: tuple
    etf: str

    @property
    def spec(self) -> ingest.TickerSpec:
        return ingest.TickerSpec(self.symbol, frozenset(self.aliases))


@dataclass(frozen=True)
class PipelineConfig:
    tickers: tuple
    start: dt.date
    end: dt.date
    subreddit: str = "wallstreetbets"
    endpoint: str = DEFAULT_ENDPOINT
    timezone: str = ingest.MARKET_TZ
    grid: cluster.GridConfig = cluster.GridConfig()
    seed: int = 0
    stopwords: Path | None = None
    corpus: Path | None = None
    returns: Path | None = None
    output_dir: Path = Path("out")
    ingest_workers: int = 4
    ingest_rate: float | None = None

    @property
    def universe(self) -> list:
        return [t.spec for t in self.tickers]

    @property
    def symbols(self) -> list:
        return [t.symbol.upper() for t in self.tickers]

    @property
    def etfs(self) -> dict:
        return {t.symbol.upper(): t.etf.upper() for t in self.tickers}

    def span_utc(self) -> tuple:
        zone = ZoneInfo(self.timezone)
        lo = dt.datetime.combine(self.start, dt.time(), zone)
        hi = dt.datetime.combine(self.end + dt.timedelta(days=1), dt.time(), zone)
        return int(lo.timestamp()), int(hi.timestamp())


def default_tickers() -> list:
    return [{"symbol": s, "aliases": list(a), "etf": e} for s, a, e in DEFAULT_UNIVERSE]


def _date(value, name, errors):
    if isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value))
    except (TypeError, ValueError):
        errors.append(f"{name}: expected an ISO date, got {value!r}")
        return None


def _int_list(value, name, errors):
    if not isinstance(value, (list, tuple)) or not value or not all(
            isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in value):
        errors.append(f"{name}: expected a non-empty list of positive integers")
        return None
    return tuple(value)


def parse_config(raw: dict, base_dir: Path = Path("."), overrides: dict | None = None) -> PipelineConfig:
    """Check a config mapping and build a :class:`PipelineConfig`.

    Every violation is collected and raised together in one :class:`ConfigError`.
    """
    raw = dict(raw or {})
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    errors = []
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        errors.append(f"schema_version: unsupported version {version!r}")

    start = _date(raw.get("start"), "start", errors) if "start" in raw else None
    end = _date(raw.get("end"), "end", errors) if "end" in raw else None
    if "start" not in raw:
        errors.append("start: required")
    if "end" not in raw:
        errors.append("end: required")
    if start and end and start >= end:
        errors.append(f"start: {start} must be before end {end}")

    tickers = []
    seen = set()
    raw_tickers = raw.get("tickers", default_tickers())
    if not isinstance(raw_tickers, list) or not raw_tickers:
        errors.append("tickers: expected a non-empty list")
        raw_tickers = []
    for i, t in enumerate(raw_tickers):
        if not isinstance(t, dict) or not str(t.get("symbol", "")).strip():
            errors.append(f"tickers[{i}].symbol: required")
            continue
        sym = str(t["symbol"]).strip().upper()
        if sym in seen:
            errors.append(f"tickers[{i}].symbol: duplicate {sym}")
        seen.add(sym)
        etf = t.get("etf")
        if not isinstance(etf, str) or not etf.strip():
            errors.append(f"tickers[{i}].etf: {sym} needs exactly one ETF benchmark")
            continue
        aliases = t.get("aliases", [])
        if not isinstance(aliases, list) or not all(isinstance(a, str) for a in aliases):
            errors.append(f"tickers[{i}].aliases: expected a list of strings")
            aliases = []
        tickers.append(TickerConfig(sym, tuple(a.lower() for a in aliases), etf.strip().upper()))

    g = raw.get("grid", {}) or {}
    if not isinstance(g, dict):
        errors.append("grid: expected a mapping")
        g = {}
    j_range = _int_list(g.get("j_range", list(cluster.DEFAULT_J_RANGE)), "grid.j_range", errors)
    k_range = _int_list(g.get("k_range", list(cluster.DEFAULT_K_RANGE)), "grid.k_range", errors)
    if k_range and min(k_range) < 2:
        errors.append("grid.k_range: silhouette needs k >= 2")
    restarts = g.get("restarts", 10)
    if not isinstance(restarts, int) or restarts < 1:
        errors.append("grid.restarts: expected a positive integer")
    min_df = g.get("min_df", 2)
    if not isinstance(min_df, int) or min_df < 1:
        errors.append("grid.min_df: expected a positive integer")
    workers = g.get("max_workers", 1)
    if not isinstance(workers, int) or workers < 1:
        errors.append("grid.max_workers: expected a positive integer")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        errors.append("seed: expected a fixed integer")

    tz = raw.get("timezone", ingest.MARKET_TZ)
    try:
        ZoneInfo(str(tz))
    except (ZoneInfoNotFoundError, ValueError):
        errors.append(f"timezone: unknown zone {tz!r}")

    if not str(raw.get("subreddit", "wallstreetbets")).strip():
        errors.append("subreddit: must be non-empty")

    def path(value):
        if value in (None, ""):
            return None
        p = Path(value)
        return p if p.is_absolute() else base_dir / p

    inputs = raw.get("inputs", {}) or {}
    if not isinstance(inputs, dict):
        errors.append("inputs: expected a mapping")
        inputs = {}
    stopwords = path(raw.get("stopwords"))
    if stopwords is not None and not stopwords.exists():
        errors.append(f"stopwords: {stopwords} does not exist")

    ing = raw.get("ingest", {}) or {}
    if errors:
        raise ConfigError(errors)
    return PipelineConfig(
        tickers=tuple(tickers),
        start=start,
        end=end,
        subreddit=str(raw.get("subreddit", "wallstreetbets")),
        endpoint=str(raw.get("endpoint", DEFAULT_ENDPOINT)),
        timezone=str(tz),
        grid=cluster.GridConfig(j_range=j_range, k_range=k_range, seed=seed, restarts=restarts,
                                min_df=min_df, max_workers=workers),
        seed=seed,
        stopwords=stopwords,
        corpus=path(inputs.get("corpus")),
        returns=path(inputs.get("returns")),
        output_dir=path(raw.get("output_dir", "out")),
        ingest_workers=int(ing.get("max_workers", 4)),
        ingest_rate=ing.get("rate"),
    )


def validate_config(path, overrides: dict | None = None) -> PipelineConfig:
    """Load and check a YAML config file; relative paths resolve against its folder."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError([f"parse error: {exc}"]) from exc
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(["parse error: top level must be a mapping"])
    return parse_config(raw or {}, path.parent, overrides)


# ---------------------------------------------------------------------------
# Hashing and state
# ---------------------------------------------------------------------------


def file_hash(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


@dataclass
class PipelineResult:
    status: int
    manifest: dict
    ran: list = field(default_factory=list)
    skipped: list = field(default_factory=list)


class Pipeline:
    def __init__(self, config: PipelineConfig, session=None):
        self.config = config
        self.out = Path(config.output_dir)
        self.session = session
        self._stopwords = None

    # paths -----------------------------------------------------------------
    @property
    def corpus_path(self):
        return self.out / "corpus.jsonl"

    @property
    def classes_dir(self):
        return self.out / "classes"

    @property
    def panel_path(self):
        return self.out / "factors" / "panel.csv"

    @property
    def candidates_path(self):
        return self.out / "factors" / "buzzword_candidates.csv"

    @property
    def results_path(self):
        return self.out / "results" / "results.json"

    def state_path(self, stage):
        return self.out / "state" / f"{stage}.json"

    @property
    def stopwords(self):
        if self._stopwords is None:
            self._stopwords = load_stopwords(self.config.stopwords)
        return self._stopwords

    # input fingerprints -----------------------------------------------------
    def _fingerprint(self, stage):
        c = self.config
        base = {"schema": SCHEMA_VERSION, "stage": stage}
        if stage == "ingest":
            base.update(tickers=[asdict(t) for t in c.tickers], start=c.start, end=c.end,
                        tz=c.timezone, subreddit=c.subreddit)
            if c.corpus is not None:
                base["corpus"] = file_hash(c.corpus) if Path(c.corpus).exists() else None
            else:
                base["endpoint"] = c.endpoint
        elif stage == "classify":
            base.update(corpus=self._hash_or_none(self.corpus_path), grid=asdict(c.grid),
                        stopwords=sorted(self.stopwords), symbols=c.symbols)
        elif stage == "factors":
            base.update(corpus=self._hash_or_none(self.corpus_path),
                        classes=[self._hash_or_none(self._assign_path(s)) for s in c.symbols],
                        start=c.start, end=c.end, tz=c.timezone, stopwords=sorted(self.stopwords))
        elif stage == "regress":
            base.update(panel=self._hash_or_none(self.panel_path),
                        candidates=self._hash_or_none(self.candidates_path),
                        returns=self._hash_or_none(c.returns) if c.returns else None,
                        etfs=c.etfs, start=c.start, end=c.end)
        elif stage == "report":
            base.update(results=self._hash_or_none(self.results_path), symbols=c.symbols)
        return _digest(base)

    @staticmethod
    def _hash_or_none(path):
        return file_hash(path) if path is not None and Path(path).exists() else None

    def _assign_path(self, sym):
        return self.classes_dir / f"{sym}_assignments.csv"

    def _up_to_date(self, stage, fingerprint):
        sp = self.state_path(stage)
        if not sp.exists():
            return False
        state = json.loads(sp.read_text())
        if state.get("inputs") != fingerprint:
            return False
        for rel, digest in state.get("outputs", {}).items():
            p = self.out / rel
            if not p.exists() or file_hash(p) != digest:
                return False
        return True

    def _record(self, stage, fingerprint, outputs):
        outs = {str(Path(p).relative_to(self.out).as_posix()): file_hash(p) for p in outputs}
        sp = self.state_path(stage)
        sp.parent.mkdir(parents=True, exist_ok=True)
        sp.write_text(json.dumps({"stage": stage, "inputs": fingerprint, "outputs": outs},
                                 sort_keys=True, indent=1) + "\n")

    # orchestration ------------------------------------------------------------
    def run(self, stages: Sequence[str] = STAGES, force: bool = False) -> PipelineResult:
        self.out.mkdir(parents=True, exist_ok=True)
        ran, skipped = [], []
        for stage in stages:
            if stage not in STAGES:
                raise ValueError(f"unknown stage {stage!r}")
            try:
                fp = self._fingerprint(stage)
                if not force and self._up_to_date(stage, fp):
                    logger.info("stage %s up to date, skipping", stage)
                    skipped.append(stage)
                    continue
                logger.info("running stage %s", stage)
                outputs = getattr(self, f"stage_{stage}")()
            except Exception as exc:
                self.write_manifest()
                raise StageError(stage, exc) from exc
            self._record(stage, fp, outputs)
            ran.append(stage)
        manifest = self.write_manifest()
        return PipelineResult(0, manifest, ran, skipped)

    def write_manifest(self) -> dict:
        files = {}
        for sp in sorted((self.out / "state").glob("*.json")):
            state = json.loads(sp.read_text())
            files.update(state.get("outputs", {}))
            files[sp.relative_to(self.out).as_posix()] = file_hash(sp)
        manifest = {"schema_version": SCHEMA_VERSION,
                    "files": [{"path": p, "sha256": files[p]} for p in sorted(files)]}
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
        return manifest

    # stages ---------------------------------------------------------------
    def stage_ingest(self):
        c = self.config
        span = c.span_utc()
        if c.corpus is not None:
            if not Path(c.corpus).exists():
                raise FileNotFoundError(f"corpus file {c.corpus} not found")
            raw = ingest.read_jsonl(c.corpus)
            comments = []
            for com in raw:
                if span[0] <= com.created_utc < span[1]:
                    body = ingest.normalize_text(com.body)
                    mentions = ingest.detect_mentions(body, c.universe) if body else set(com.mentions)
                    comments.append(ingest.Comment(com.id, com.created_utc, body, frozenset(mentions)))
            corpus = ingest.Corpus.from_comments(comments, span=(span[0], span[1] - 1))
        else:
            stats = Counter()
            corpus = ingest.fetch_range(c.endpoint, c.subreddit, span[0], span[1], c.universe,
                                        session=self.session, max_workers=c.ingest_workers,
                                        rate=c.ingest_rate, stats=stats)
            logger.info("ingest stats: %s", dict(stats))
        return [ingest.write_jsonl(corpus, self.corpus_path)]

    def _corpus(self):
        return ingest.read_jsonl(self.corpus_path)

    def stage_classify(self):
        corpus = self._corpus()
        self.classes_dir.mkdir(parents=True, exist_ok=True)
        outputs, summary = [], []
        for sym in self.config.symbols:
            comments = corpus.mentioning(sym)
            res = cluster.classify_corpus(comments, self.stopwords, self.config.grid)
            ap = self._assign_path(sym)
            with ap.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["comment_id", "class"])
                for cid, cls in res.classes.items():
                    w.writerow([cid, cls])
            gp = self.classes_dir / f"{sym}_silhouette.csv"
            with gp.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["j", "k", "avg_silhouette"])
                for j, k, v in res.grid.rows():
                    w.writerow([j, k, repr(float(v))])
            summary.append([sym, res.grid.best_j, res.grid.best_k,
                            repr(float(res.grid.table[(res.grid.best_j, res.grid.best_k)])),
                            len(comments)])
            outputs += [ap, gp]
        sp = self.classes_dir / "summary.csv"
        with sp.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["stock", "best_j", "best_k", "avg_silhouette", "n_comments"])
            w.writerows(summary)
        return outputs + [sp]

    def _classes(self, sym):
        df = pd.read_csv(self._assign_path(sym), dtype={"comment_id": str})
        return dict(zip(df["comment_id"], df["class"].astype(int)))

    def _best_k(self):
        df = pd.read_csv(self.classes_dir / "summary.csv", dtype={"stock": str})
        return dict(zip(df["stock"], df["best_k"].astype(int)))

    def stage_factors(self):
        c = self.config
        corpus = self._corpus()
        volume = factors.volume_series(corpus, c.start, c.end, c.timezone)
        best_k = self._best_k()
        panel, candidates = [], []
        for sym in c.symbols:
            panel += factors.frequency_panel(corpus, sym, c.start, c.end, self._classes(sym),
                                             k=best_k[sym], tz=c.timezone, volume=volume)
            mentioning = corpus.mentioning(sym)
            terms = factors.top_ngrams(mentioning, self.stopwords)
            words = factors.buzzword_panel(mentioning, sym, terms, c.start, c.end,
                                           self.stopwords, tz=c.timezone, volume=volume)
            for t in terms:
                candidates.append(factors.FactorSeries(t, sym, words[t]))
        vp = self.out / "factors" / "volume.csv"
        vp.parent.mkdir(parents=True, exist_ok=True)
        with vp.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "volume"])
            for d, v in volume.items():
                w.writerow([d.isoformat(), int(v)])
        return [factors.write_panel_csv(panel, self.panel_path),
                factors.write_panel_csv(candidates, self.candidates_path), vp]

    def stage_regress(self):
        c = self.config
        if c.returns is None or not Path(c.returns).exists():
            raise FileNotFoundError(f"returns CSV {c.returns} not found")
        frame = regression.read_returns_csv(c.returns)
        frame = frame.loc[[d for d in frame.index if c.start <= d <= c.end]]
        panel = regression.ReturnsPanel(frame, c.etfs)
        trading = panel.dates
        series = factors.read_panel_csv(self.panel_path)
        cands = factors.read_panel_csv(self.candidates_path)
        results, errors, buzz = [], [], []
        for sym in c.symbols:
            fs = {name: factors.to_trading(s, trading) for (stock, name), s in series.items() if stock == sym}
            words = {name: factors.to_trading(s, trading) for (stock, name), s in cands.items() if stock == sym}
            terms = sorted(words)
            try:
                frame_w = pd.DataFrame({t: words[t].values for t in terms})
                bset = factors.select_buzzwords(terms, frame_w, panel.response(sym), stock=sym)
                buzz.append(bset)
                for i, t in enumerate(bset.terms):
                    fs[f"w_{i}"] = replace(words[t], name=f"w_{i}")
            except ValueError as exc:
                errors.append({"stock": sym, "stage": "buzzwords", "error": str(exc)})
            specs = [regression.ModelSpec(sym, b) for b in regression.BENCHMARKS]
            specs += [regression.ModelSpec(sym, b, v, lag)
                      for (v, lag) in regression.FAMILIES.values() for b in regression.BENCHMARKS]
            for spec in specs:
                try:
                    results.append(regression.run_model_suite(spec, panel, fs))
                except regression.RegressionError as exc:
                    errors.append({"stock": sym, "benchmark": spec.benchmark,
                                   "variant": spec.variant.value, "lag": spec.lag, "error": str(exc)})
        dump = json.loads(regression.results_json(results))
        dump["errors"] = errors
        dump["buzzwords"] = [{"stock": b.stock, "terms": list(b.terms),
                              "correlations": [float(r) for r in b.correlations]} for b in buzz]
        rp = regression.write_text(self.results_path,
                                   json.dumps(dump, sort_keys=True, indent=1) + "\n")
        bp = factors.write_buzzword_csv(buzz, self.out / "results" / "buzzwords.csv")
        return [rp, bp]

    def stage_report(self):
        dump = json.loads(self.results_path.read_text())
        results = [suite_from_dict(d) for d in dump["results"]]
        stocks = self.config.symbols
        outputs = []
        combined = []
        for letter, (variant, lag) in regression.FAMILIES.items():
            for bench, roman in regression.BENCHMARKS.items():
                cell = {r.spec.stock: r for r in results
                        if r.spec.variant is variant and r.spec.lag == lag and r.spec.benchmark == bench}
                if not cell:
                    continue
                txt = regression.render_table(cell, stocks)
                tp = regression.write_text(self.out / "tables" / f"{letter}_{bench}.txt", txt)
                cp = regression.write_text(self.out / "tables" / f"{letter}_{bench}.csv",
                                           regression.render_csv(cell, stocks))
                combined.append(f"Table {letter}.{roman} ({variant.value}, lag {lag}, {bench})\n{txt}")
                outputs += [tp, cp]
        outputs.append(regression.write_text(self.out / "tables" / "all.txt", "\n".join(combined)))
        return outputs


def suite_from_dict(d: dict) -> regression.SuiteResult:
    f = d["fit"]
    fit = regression.RegressionFit(
        tuple(f["names"]), np.array(f["coefficients"]), np.array(f["std_errors"]),
        np.array(f["t_stats"]), np.array(f["p_values"]), f["rss"], f["n_obs"],
        f["df_resid"], f["r_squared"])
    ft = d.get("ftest")
    ftest = regression.NestedFTest(ft["f_stat"], ft["q"], ft["df_denominator"], ft["p_value"]) if ft else None
    spec = regression.ModelSpec(d["stock"], d["benchmark"], regression.Variant(d["variant"]), d["lag"])
    return regression.SuiteResult(spec, fit, ftest)


def run_pipeline(config: PipelineConfig, stages: Sequence[str] = STAGES, force: bool = False,
                 session=None) -> PipelineResult:
    return Pipeline(config, session=session).run(stages, force=force)
