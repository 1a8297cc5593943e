"""Fama-French regressions extended with reddit factors.

Ordinary least squares via pivoted QR, classical standard errors, and the
nested-model F-test of the added reddit regressors against the plain
three-factor fit estimated on the same rows.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
import scipy.linalg as sla
from scipy.special import betainc, betaincc

from .factors import FactorSeries, lag_series

INTERCEPT = "alpha"
FF3 = ("Rm", "HML", "SMB")
RANK_TOL = 1e-10


class RegressionError(ValueError):
    pass


class RankDeficiencyError(RegressionError):
    def __init__(self, columns):
        self.columns = tuple(columns)
        super().__init__(f"design is rank deficient; collinear columns: {', '.join(self.columns)}")


class InsufficientObservationsError(RegressionError):
    pass


class ObservationMismatchError(RegressionError):
    pass


class EmptyIntersectionError(RegressionError):
    pass


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------


def t_two_sided_p(t, df):
    """Two-sided Student-t p-value, ``I_{df/(df+t^2)}(df/2, 1/2)``.

    Small |t| goes through the complementary form so ``df/(df+t^2)`` never
    rounds to 1.
    """
    t = np.asarray(t, dtype=float)
    t2 = t * t
    with np.errstate(invalid="ignore"):
        x = df / (df + t2)
        xc = np.where(np.isinf(t2), 1.0, t2 / (df + t2))
    return np.where(x < 0.5, betainc(df / 2.0, 0.5, x), betaincc(0.5, df / 2.0, xc))


def f_sf(f, d1, d2):
    """Upper tail of the F(d1, d2) distribution, ``I_{d2/(d2+d1 f)}(d2/2, d1/2)``."""
    f = np.maximum(np.asarray(f, dtype=float), 0.0)
    with np.errstate(invalid="ignore"):
        x = d2 / (d2 + d1 * f)
        xc = np.where(np.isinf(f), 1.0, d1 * f / (d2 + d1 * f))
    return np.where(x < 0.5, betainc(d2 / 2.0, d1 / 2.0, x), betaincc(d1 / 2.0, d2 / 2.0, xc))


# ---------------------------------------------------------------------------
# OLS
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionFit:
    names: tuple
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    rss: float
    n_obs: int
    df_resid: int
    r_squared: float
    index: tuple = ()
    residuals: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __getitem__(self, name):
        return float(self.coefficients[self.names.index(name)])

    def p(self, name) -> float:
        return float(self.p_values[self.names.index(name)])

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "coefficients": [float(v) for v in self.coefficients],
            "std_errors": [float(v) for v in self.std_errors],
            "t_stats": [float(v) for v in self.t_stats],
            "p_values": [float(v) for v in self.p_values],
            "rss": float(self.rss),
            "n_obs": int(self.n_obs),
            "df_resid": int(self.df_resid),
            "r_squared": float(self.r_squared),
        }


def ols_fit(y, X, names: Sequence[str] | None = None, index: Sequence | None = None,
            rank_tol: float = RANK_TOL) -> RegressionFit:
    """Least squares of ``y`` on the columns of ``X`` (include the intercept yourself).

    Columns whose pivoted-QR diagonal falls below ``rank_tol`` times the
    largest column norm are reported by name in :class:`RankDeficiencyError`.
    """
    if isinstance(X, pd.DataFrame):
        names = tuple(X.columns) if names is None else tuple(names)
        index = tuple(X.index) if index is None else tuple(index)
        X = X.to_numpy(dtype=float)
    if isinstance(y, pd.Series):
        y = y.to_numpy(dtype=float)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(p))
    if len(y) != n:
        raise RegressionError(f"y has {len(y)} rows but X has {n}")
    if n <= p:
        raise InsufficientObservationsError(f"{n} observations for {p} regressors")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise RegressionError("non-finite values in regression data")

    Q, R, piv = sla.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = diag[0] if diag.size else 0.0
    bad = np.flatnonzero(diag <= rank_tol * scale) if scale > 0 else np.arange(p)
    if bad.size:
        raise RankDeficiencyError([names[piv[i]] for i in bad])

    beta_piv = sla.solve_triangular(R, Q.T @ y)
    beta = np.empty(p)
    beta[piv] = beta_piv
    resid = y - X @ beta
    rss = float(resid @ resid)
    df_resid = n - p
    sigma2 = rss / df_resid
    Rinv = sla.solve_triangular(R, np.eye(p))
    var_piv = (Rinv * Rinv).sum(axis=1) * sigma2
    se = np.empty(p)
    se[piv] = np.sqrt(var_piv)

    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, np.where(beta == 0, 0.0, np.sign(beta) * np.inf))
    pvals = t_two_sided_p(t, df_resid)

    has_const = np.any(np.all(X == X[0], axis=0) & (X[0] != 0))
    centre = y.mean() if has_const else 0.0
    tss = float(((y - centre) ** 2).sum())
    r2 = 1.0 - rss / tss if tss > 0 else 1.0

    return RegressionFit(names, beta, se, t, pvals, rss, n, df_resid, r2,
                         tuple(index) if index is not None else (), resid)


@dataclass(frozen=True)
class NestedFTest:
    f_stat: float
    q: int
    df_denominator: int
    p_value: float

    def to_dict(self) -> dict:
        return {"f_stat": float(self.f_stat), "q": int(self.q),
                "df_denominator": int(self.df_denominator), "p_value": float(self.p_value)}


def nested_f_test(restricted: RegressionFit, full: RegressionFit) -> NestedFTest:
    """Test that every regressor in ``full`` but not ``restricted`` has zero coefficient."""
    if restricted.n_obs != full.n_obs or restricted.index != full.index:
        raise ObservationMismatchError("restricted and full fits use different observations")
    missing = set(restricted.names) - set(full.names)
    if missing:
        raise RegressionError(f"restricted model is not nested; extra columns {sorted(missing)}")
    q = restricted.df_resid - full.df_resid
    if q < 1:
        raise RegressionError("full model adds no regressors")
    if full.rss > 0:
        f = max((restricted.rss - full.rss) / q / (full.rss / full.df_resid), 0.0)
    else:
        f = 0.0 if restricted.rss == 0 else float("inf")
    p = float(f_sf(f, q, full.df_resid))
    return NestedFTest(float(f), q, full.df_resid, p)


# ---------------------------------------------------------------------------
# Panels and model specs
# ---------------------------------------------------------------------------


def read_returns_csv(path) -> pd.DataFrame:
    """Load a ``date,<series>...`` CSV of percent returns indexed by date."""
    df = pd.read_csv(path, float_precision="round_trip")
    if "date" not in df.columns:
        raise RegressionError(f"{path}: first column must be 'date'")
    df.index = [dt.date.fromisoformat(str(d)[:10]) for d in df.pop("date")]
    return df.sort_index()


@dataclass(frozen=True)
class ReturnsPanel:
    """Daily percent returns.

    ``frame`` holds ``Rm`` (market excess return), ``HML``, ``SMB`` and one
    column per stock and per benchmark ETF. Stock and ETF columns are excess
    returns unless an ``RF`` column is present, in which case it is
    subtracted from them.
    """

    frame: pd.DataFrame
    etfs: Mapping[str, str]

    def _excess(self, col):
        s = self.frame[col]
        if "RF" in self.frame.columns:
            s = s - self.frame["RF"]
        return s

    def response(self, stock: str) -> pd.Series:
        return self._excess(stock.upper()).rename("y")

    def benchmark(self, stock: str, kind: str) -> pd.Series:
        if kind == "market":
            return self.frame["Rm"].rename("Rm")
        if kind == "etf":
            return self._excess(self.etfs[stock.upper()]).rename("Rm")
        raise ValueError(f"unknown benchmark {kind!r}")

    @property
    def dates(self):
        return list(self.frame.index)


class Variant(str, enum.Enum):
    BASE = "base_ff3"
    ALL_FREQ = "all_freq"
    CLASS_FREQ = "class_freq"
    ALL_FREQ_SQ = "all_freq_sq"
    CLASS_FREQ_SQ = "class_freq_sq"
    BUZZWORDS = "buzzwords"


FAMILIES = {
    "a": (Variant.ALL_FREQ, 0),
    "b": (Variant.CLASS_FREQ, 0),
    "c": (Variant.ALL_FREQ_SQ, 0),
    "d": (Variant.CLASS_FREQ_SQ, 0),
    "e": (Variant.BUZZWORDS, 0),
    "f": (Variant.ALL_FREQ, 1),
    "g": (Variant.CLASS_FREQ, 1),
    "h": (Variant.ALL_FREQ_SQ, 1),
    "i": (Variant.CLASS_FREQ_SQ, 1),
    "j": (Variant.BUZZWORDS, 1),
}
BENCHMARKS = {"market": "i", "etf": "ii"}


@dataclass(frozen=True)
class ModelSpec:
    stock: str
    benchmark: str = "market"
    variant: Variant = Variant.BASE
    lag: int = 0

    def __post_init__(self):
        object.__setattr__(self, "stock", self.stock.upper())
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.benchmark not in BENCHMARKS:
            raise ValueError(f"benchmark must be one of {sorted(BENCHMARKS)}")
        if self.lag not in (0, 1):
            raise ValueError("lag must be 0 or 1")
        if self.variant is Variant.BASE and self.lag:
            raise ValueError("the base three-factor model has no lagged form")

    @property
    def family(self) -> str | None:
        for letter, key in FAMILIES.items():
            if key == (self.variant, self.lag):
                return letter
        return None

    @property
    def table_id(self) -> str:
        return f"{self.family}.{BENCHMARKS[self.benchmark]}"


def class_count(factors: Mapping[str, FactorSeries]) -> int:
    k = 0
    while f"f_c{k}" in factors:
        k += 1
    return k


def reddit_columns(variant: Variant, factors: Mapping[str, FactorSeries]) -> list:
    """(factor key, display name) pairs added on top of the three factors."""
    k = class_count(factors)
    if variant is Variant.BASE:
        return []
    if variant is Variant.ALL_FREQ:
        return [("f_all", "f_{all}")]
    if variant is Variant.ALL_FREQ_SQ:
        return [("f_all", "f_{all}"), ("f_all_sq", "f_{all}^2")]
    if variant is Variant.CLASS_FREQ:
        return [(f"f_c{c}", f"f_{c}") for c in range(k)]
    if variant is Variant.CLASS_FREQ_SQ:
        return ([(f"f_c{c}", f"f_{c}") for c in range(k)]
                + [(f"f_c{c}_sq", f"f_{c}^2") for c in range(k)])
    if variant is Variant.BUZZWORDS:
        return [(f"w_{c}", f"w_{c}") for c in range(10)]
    raise ValueError(variant)


def align_panel(response: pd.Series, columns: Mapping[str, pd.Series]) -> pd.DataFrame:
    """Inner-join on dates, drop incomplete rows, prepend the intercept.

    The response lands in column ``y``.
    """
    frames = {"y": response}
    frames.update(columns)
    common = None
    for s in frames.values():
        idx = set(s.dropna().index)
        common = idx if common is None else common & idx
    if not common:
        raise EmptyIntersectionError("no dates shared by the response and every regressor")
    dates = sorted(common)
    out = pd.DataFrame({name: s.loc[dates].to_numpy(dtype=float) for name, s in frames.items()},
                       index=dates)
    out.insert(1, INTERCEPT, 1.0)
    return out


@dataclass(frozen=True)
class SuiteResult:
    spec: ModelSpec
    fit: RegressionFit
    ftest: NestedFTest | None = None
    base: RegressionFit | None = None

    def to_dict(self) -> dict:
        out = {
            "stock": self.spec.stock,
            "benchmark": self.spec.benchmark,
            "variant": self.spec.variant.value,
            "lag": self.spec.lag,
            "fit": self.fit.to_dict(),
            "ftest": self.ftest.to_dict() if self.ftest else None,
        }
        if self.spec.family:
            out["table"] = self.spec.table_id
        return out


def run_model_suite(spec: ModelSpec, panel: ReturnsPanel,
                    factors: Mapping[str, FactorSeries]) -> SuiteResult:
    """Fit one model and test its reddit terms against FF3 on identical rows.

    ``factors`` maps factor keys (``f_all``, ``f_c0``, ``w_3``...) to series
    on the trading calendar for ``spec.stock``.
    """
    base_cols = {"Rm": panel.benchmark(spec.stock, spec.benchmark),
                 "HML": panel.frame["HML"], "SMB": panel.frame["SMB"]}
    extra = {}
    for key, label in reddit_columns(spec.variant, factors):
        if key not in factors:
            raise RegressionError(f"{spec.stock}: factor {key} required by {spec.variant.value} is missing")
        s = factors[key]
        if spec.lag:
            s = lag_series(s, spec.lag)
        extra[label] = s.values
    table = align_panel(panel.response(spec.stock), {**base_cols, **extra})
    y = table.pop("y")
    full = ols_fit(y, table)
    if not extra:
        return SuiteResult(spec, full)
    base = ols_fit(y, table[[INTERCEPT, *FF3]])
    return SuiteResult(spec, full, nested_f_test(base, full), base)


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------


def stars(p: float) -> str:
    """Significance marks at the 0.01 / 0.05 / 0.1 levels."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p-value {p} outside [0, 1]")
    if p <= 0.01:
        return "***"
    if p <= 0.05:
        return "**"
    if p <= 0.1:
        return "*"
    return ""


def _row_labels(results: Mapping[str, SuiteResult]) -> list:
    variant = next(iter(results.values())).spec.variant
    k = max((sum(1 for n in r.fit.names if n.startswith("f_") and n[2:].isdigit())
             for r in results.values()), default=0)
    if variant is Variant.BUZZWORDS:
        return [INTERCEPT] + [f"w_{c}" for c in range(10)] + list(FF3)
    rows = [INTERCEPT, *FF3]
    if variant in (Variant.ALL_FREQ, Variant.ALL_FREQ_SQ):
        rows.append("f_{all}")
    if variant is Variant.ALL_FREQ_SQ:
        rows.append("f_{all}^2")
    if variant in (Variant.CLASS_FREQ, Variant.CLASS_FREQ_SQ):
        rows += [f"f_{c}" for c in range(k)]
    if variant is Variant.CLASS_FREQ_SQ:
        rows += [f"f_{c}^2" for c in range(k)]
    return rows


def table_cells(results: Mapping[str, SuiteResult], stocks: Sequence[str]) -> list:
    """Rows of ``[label, cell...]``; cells are ``"%.2f"`` plus stars, or blank."""
    results = {s.upper(): r for s, r in results.items()}
    stocks = [s.upper() for s in stocks]
    rows = []
    for label in _row_labels(results):
        row = [label]
        for s in stocks:
            r = results.get(s)
            if r is None or label not in r.fit.names:
                row.append("")
            else:
                i = r.fit.names.index(label)
                row.append(f"{r.fit.coefficients[i]:.2f}{stars(float(r.fit.p_values[i]))}")
        rows.append(row)
    if any(r.ftest is not None for r in results.values()):
        row = ["F"]
        for s in stocks:
            ft = results[s].ftest if s in results else None
            row.append("" if ft is None else f"{ft.f_stat:.2f}{stars(ft.p_value)}")
        rows.append(row)
    return rows


def render_table(results: Mapping[str, SuiteResult], stocks: Sequence[str]) -> str:
    """Tab-separated table: header of stocks, one row per regressor, F last."""
    lines = ["\t" + "\t".join(s.upper() for s in stocks)]
    lines += ["\t".join(row) for row in table_cells(results, stocks)]
    return "\n".join(lines) + "\n"


def render_csv(results: Mapping[str, SuiteResult], stocks: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", *[s.upper() for s in stocks]])
    w.writerows(table_cells(results, stocks))
    return buf.getvalue()


def results_json(results: Sequence[SuiteResult]) -> str:
    """Deterministic full-precision dump of every fit."""
    rows = sorted((r.to_dict() for r in results),
                  key=lambda d: (d["stock"], d["benchmark"], d["variant"], d["lag"]))
    return json.dumps({"results": rows}, sort_keys=True, indent=1, allow_nan=True) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
