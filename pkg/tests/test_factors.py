import datetime as dt
import random
from zoneinfo import ZoneInfo

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redditfactors.factors import (
    BuzzwordSet,
    FactorSeries,
    InsufficientOverlapError,
    SeriesTooShortError,
    UnknownClassError,
    buzzword_panel,
    buzzword_series,
    class_frequency,
    frequency_panel,
    lag_series,
    mention_frequency,
    pearson,
    read_panel_csv,
    select_buzzwords,
    squared_frequency,
    to_trading,
    top_ngrams,
    write_buzzword_csv,
    write_panel_csv,
)
from redditfactors.ingest import Comment

NY = ZoneInfo("America/New_York")
D1 = dt.date(2018, 6, 4)  # a Monday


def at(day, hour=12, minute=0):
    return int(dt.datetime(day.year, day.month, day.day, hour, minute, tzinfo=NY).timestamp())


def comment(i, day, body="", mentions=(), hour=12):
    return Comment(f"c{i}", at(day, hour), body, frozenset(mentions))


def series(values, start=D1, name="x"):
    idx = [start + dt.timedelta(days=i) for i in range(len(values))]
    return FactorSeries(name, "WMT", pd.Series(values, index=idx, dtype=float))


# ---------------------------------------------------------------------------
# Scalar definitions
# ---------------------------------------------------------------------------


def test_mention_frequency_examples():
    cs = [comment(i, D1, mentions={"WMT"} if i < 3 else ()) for i in range(10)]
    assert mention_frequency(cs, "WMT", D1, 600) == 0.005
    assert mention_frequency(cs, "MSFT", D1, 1000) == 0.0
    assert mention_frequency([], "WMT", D1, 0) == 0.0


def test_class_frequency_examples():
    cs = [comment(i, D1, mentions={"WMT"}) for i in range(3)]
    classes = {"c0": 0, "c1": 0, "c2": 1}
    assert class_frequency(cs, "WMT", 0, classes, D1, 400) == 0.005
    assert class_frequency(cs, "WMT", 1, classes, D1 + dt.timedelta(days=1), 400) == 0.0
    assert class_frequency(cs, "WMT", 2, classes, D1, 400, k=3) == 0.0
    with pytest.raises(UnknownClassError):
        class_frequency(cs, "WMT", 2, classes, D1, 400)
    with pytest.raises(UnknownClassError):
        class_frequency(cs, "WMT", -1, classes, D1, 400)


def test_squared_frequency_examples():
    assert squared_frequency(3, 600) == 0.015
    assert squared_frequency(0, 600) == 0.0
    assert squared_frequency(5, 1000) == 0.025
    assert squared_frequency(4, 0) == 0.0


def test_buzzword_series_examples():
    cs = [comment(0, D1, "puts puts wmt puts", {"WMT"}), comment(1, D1, "puts and puts", {"WMT"}),
          comment(2, D1, "puts everywhere", ())]
    assert buzzword_series(cs, "WMT", "puts", D1, 150_000) == 5 / 150_000
    assert buzzword_series(cs, "WMT", "calls", D1, 150_000) == 0.0
    assert buzzword_series(cs, "WMT", "puts", D1, 0) == 0.0
    assert buzzword_series(cs, "WMT", "wmt puts", D1, 10) == 0.1


# ---------------------------------------------------------------------------
# Panels against the scalar definitions
# ---------------------------------------------------------------------------


def random_corpus(seed, days=6, per_day=15, k=3):
    rnd = random.Random(seed)
    words = ["puts", "calls", "moon", "earnings", "wmt", "lol", "the"]
    cs, classes = [], {}
    for d in range(days):
        day = D1 + dt.timedelta(days=d)
        for i in range(rnd.randint(0, per_day)):
            cid = f"d{d}n{i}"
            mentions = {"WMT"} if rnd.random() < 0.4 else set()
            if rnd.random() < 0.2:
                mentions.add("MSFT")
            body = " ".join(rnd.choice(words) for _ in range(rnd.randint(1, 6))) if mentions else ""
            cs.append(Comment(cid, at(day, rnd.randint(0, 23), rnd.randint(0, 59)), body, frozenset(mentions)))
            if "WMT" in mentions:
                classes[cid] = rnd.randrange(k)
    cs.sort(key=lambda c: (c.created_utc, c.id))
    return cs, classes


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_frequency_panel_matches_scalar_definitions(seed):
    cs, classes = random_corpus(seed)
    end = D1 + dt.timedelta(days=5)
    panel = {s.name: s.values for s in frequency_panel(cs, "WMT", D1, end, classes, k=3)}
    assert set(panel) == {"f_all", "f_all_sq", "f_c0", "f_c1", "f_c2", "f_c0_sq", "f_c1_sq", "f_c2_sq"}
    for i in range(6):
        day = D1 + dt.timedelta(days=i)
        todays = [c for c in cs if dt.datetime.fromtimestamp(c.created_utc, NY).date() == day]
        vol = len(todays)
        n = sum("WMT" in c.mentions for c in todays)
        assert panel["f_all"][day] == mention_frequency(cs, "WMT", day, vol)
        assert panel["f_all_sq"][day] == squared_frequency(n, vol)
        total = 0.0
        for c in range(3):
            assert panel[f"f_c{c}"][day] == class_frequency(cs, "WMT", c, classes, day, vol, k=3)
            nc = sum("WMT" in x.mentions and classes.get(x.id) == c for x in todays)
            assert panel[f"f_c{c}_sq"][day] == squared_frequency(nc, vol)
            total += panel[f"f_c{c}"][day]
        # Partition identity.
        assert total == pytest.approx(panel["f_all"][day], rel=1e-15, abs=0)
        assert 0.0 <= panel["f_all"][day] <= 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_buzzword_panel_matches_scalar_definition(seed):
    cs, _ = random_corpus(seed)
    end = D1 + dt.timedelta(days=5)
    terms = ["puts", "moon", "wmt puts", "earnings"]
    panel = buzzword_panel(cs, "WMT", terms, D1, end, stopwords={"the"})
    for day in panel.index:
        vol = sum(dt.datetime.fromtimestamp(c.created_utc, NY).date() == day for c in cs)
        for t in terms:
            assert panel.loc[day, t] == buzzword_series(cs, "WMT", t, day, vol, stopwords={"the"})


def test_frequency_panel_without_classes_and_zero_days():
    cs = [comment(0, D1, "wmt", {"WMT"})]
    out = frequency_panel(cs, "wmt", D1, D1 + dt.timedelta(days=2))
    assert [s.name for s in out] == ["f_all", "f_all_sq"]
    assert out[0].values.tolist() == [1.0, 0.0, 0.0]
    assert all(s.stock == "WMT" for s in out)


def test_frequency_panel_uses_eastern_days():
    # 23:30 New York on D1 is already D1+1 in UTC.
    cs = [Comment("late", at(D1, 23) + 1800, "wmt", frozenset({"WMT"})),
          Comment("other", at(D1 + dt.timedelta(days=1), 1), "", frozenset())]
    f_all = frequency_panel(cs, "WMT", D1, D1 + dt.timedelta(days=1))[0].values
    assert f_all.tolist() == [1.0, 0.0]


# ---------------------------------------------------------------------------
# Buzzword candidates and selection
# ---------------------------------------------------------------------------


def test_top_ngrams_ordering():
    cs = [comment(i, D1, body, {"WMT"}) for i, body in enumerate(
        ["earnings earnings puts", "earnings lol", "lol puts", "the earnings"])]
    top = top_ngrams(cs, stopwords={"the"}, limit=100, ngram_range=(1, 2))
    assert top[0] == "earnings"
    assert top[:3] == ["earnings", "lol", "puts"]
    assert len(top) == len(set(top))
    assert "earnings earnings" in top and "the earnings" not in top
    assert top_ngrams(cs, limit=2, ngram_range=(1, 1)) == ["earnings", "lol"]


def test_pearson_edge_cases():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert pearson([1, 1, 1], [1, 2, 3]) == 0.0


def with_correlation(r, rho, rng):
    """A series whose sample correlation with ``r`` is exactly ``rho``."""
    rc = r - r.mean()
    z = rng.normal(size=len(r))
    z = z - z.mean()
    z -= (z @ rc) / (rc @ rc) * rc
    z = z / np.linalg.norm(z) * np.linalg.norm(rc)
    return 5 + rho * rc + np.sqrt(1 - rho ** 2) * z


def planted_buzzwords(seed=0, n_days=120):
    rng = np.random.default_rng(seed)
    days = [D1 + dt.timedelta(days=i) for i in range(n_days)]
    r = pd.Series(rng.normal(size=n_days), index=days)
    strong = [f"hot{i}" for i in range(10)]
    weak = [f"meh{i:02d}" for i in range(90)]
    cols = {t: with_correlation(r, (-1) ** i * (0.9 + 0.01 * i), rng) for i, t in enumerate(strong)}
    cols.update({t: with_correlation(r, rng.uniform(-0.099, 0.099), rng) for t in weak})
    return strong, weak, pd.DataFrame(cols, index=days), r


def test_select_buzzwords_planted():
    strong, weak, df, r = planted_buzzwords()
    assert max(abs(pearson(df[t], r)) for t in weak) < 0.1
    assert min(abs(pearson(df[t], r)) for t in strong) >= 0.9 - 1e-12
    sel = select_buzzwords(strong + weak, df, r, stock="wmt")
    assert set(sel.terms) == set(strong)
    assert sel.stock == "WMT"
    mags = [abs(p) for p in sel.correlations]
    assert mags == sorted(mags, reverse=True)
    assert sel.terms[0] == "hot9"


def test_select_buzzwords_perfect_and_constant():
    days = [D1 + dt.timedelta(days=i) for i in range(10)]
    r = pd.Series(np.arange(10.0) ** 1.5, index=days)
    cols = {"same": r.values, "flat": np.ones(10)}
    cols.update({f"n{i}": np.random.default_rng(i).normal(size=10) for i in range(8)})
    df = pd.DataFrame(cols, index=days)
    sel = select_buzzwords(list(cols), df, r)
    assert sel.terms[0] == "same"
    assert sel.correlations[0] == pytest.approx(1.0)
    assert "flat" in sel.terms and sel.correlations[sel.terms.index("flat")] == 0.0
    assert sel.terms[-1] == "flat"


@settings(max_examples=20, deadline=None)
@given(st.randoms(use_true_random=False))
def test_select_buzzwords_order_invariant(rnd):
    strong, weak, df, r = planted_buzzwords(seed=3)
    cands = strong + weak
    shuffled = cands[:]
    rnd.shuffle(shuffled)
    assert select_buzzwords(cands, df, r) == select_buzzwords(shuffled, df, r)


def test_select_buzzwords_errors():
    days = [D1 + dt.timedelta(days=i) for i in range(2)]
    df = pd.DataFrame({f"t{i}": [0.0, 1.0] for i in range(10)}, index=days)
    with pytest.raises(InsufficientOverlapError):
        select_buzzwords(list(df), df, pd.Series([1.0, 2.0], index=days))
    with pytest.raises(ValueError):
        select_buzzwords(["a"], df, pd.Series([1.0, 2.0], index=days))


def test_buzzword_set_requires_ten_terms():
    with pytest.raises(ValueError):
        BuzzwordSet("WMT", ("a",), (0.1,))


# ---------------------------------------------------------------------------
# Calendar handling
# ---------------------------------------------------------------------------


def test_lag_examples():
    s = series([1, 2, 3])
    lagged = lag_series(s, 1)
    assert lagged.name == "x_lag1"
    assert lagged.values.to_dict() == {D1 + dt.timedelta(days=1): 1.0, D1 + dt.timedelta(days=2): 2.0}
    with pytest.raises(SeriesTooShortError):
        lag_series(s, 3)
    with pytest.raises(ValueError):
        lag_series(s, 0)


def test_lag_weekend_gap_friday_feeds_monday():
    fri, mon = dt.date(2018, 6, 8), dt.date(2018, 6, 11)
    cal = series([1, 2, 3, 4, 5, 6, 7, 8], start=dt.date(2018, 6, 6))  # Wed..Wed
    trading = to_trading(cal, [d.date() for d in pd.bdate_range("2018-06-06", "2018-06-13")])
    assert fri in trading.values.index and dt.date(2018, 6, 9) not in trading.values.index
    lagged = lag_series(trading, 1)
    assert lagged.values[mon] == cal.values[fri]
    # Saturday and Sunday activity never reaches the lagged series.
    assert set(lagged.values.tolist()).isdisjoint({cal.values[dt.date(2018, 6, 9)], cal.values[dt.date(2018, 6, 10)]})


@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=3, max_size=30))
def test_lag_twice_equals_lag_two(values):
    s = series(values)
    twice = lag_series(lag_series(s, 1), 1).values
    once2 = lag_series(s, 2).values
    pd.testing.assert_series_equal(twice, once2)


def test_to_trading_drops_non_trading_days():
    s = series(range(7), start=dt.date(2018, 6, 4))
    t = to_trading(s, [dt.date(2018, 6, 4), dt.date(2018, 6, 8), dt.date(2018, 7, 1)])
    assert list(t.values.index) == [dt.date(2018, 6, 4), dt.date(2018, 6, 8)]


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def test_panel_csv_round_trip(tmp_path):
    a = FactorSeries("f_all", "WMT", pd.Series([0.1, 1 / 3], index=[D1, D1 + dt.timedelta(days=1)]))
    b = FactorSeries("f_c0", "TSLA", pd.Series([2 / 7], index=[D1]))
    path = write_panel_csv([a, b], tmp_path / "p.csv")
    assert path.read_text().splitlines()[0] == "date,stock,series_name,value"
    back = read_panel_csv(path)
    pd.testing.assert_series_equal(back[("WMT", "f_all")].values, a.values, check_names=False)
    assert back[("TSLA", "f_c0")].values.iloc[0] == 2 / 7


def test_buzzword_csv(tmp_path):
    terms = tuple(f"t{i}" for i in range(10))
    b = BuzzwordSet("WMT", terms, tuple(0.5 - 0.01 * i for i in range(10)))
    lines = write_buzzword_csv([b], tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "stock,rank,term,correlation"
    assert lines[1] == "WMT,0,t0,0.5"
    assert len(lines) == 11
