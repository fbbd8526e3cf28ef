from __future__ import annotations

import csv
import datetime as dt

import numpy as np
import pytest

from predfolio.errors import AlignmentError, InsufficientDataError, ParseError
from predfolio.market_data import (
    PricePoint,
    align_universe,
    compute_returns,
    load_prices,
)

from conftest import make_return_series, weekly_dates

MON1 = dt.date(2024, 1, 1)   # a Monday
MON2 = dt.date(2024, 1, 8)
MON3 = dt.date(2024, 1, 15)


def write_rows(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "asset", "close"])
        writer.writerows(rows)
    return path


def test_load_prices_passes_monday_closes_through(tmp_path):
    path = write_rows(
        tmp_path / "p.csv",
        [
            (MON1.isoformat(), "AAA", 100),
            (MON2.isoformat(), "AAA", 110),
            (MON3.isoformat(), "AAA", 99),
        ],
    )
    table = load_prices(path, "monday")
    points = table.points["AAA"]
    assert [p.close for p in points] == [100.0, 110.0, 99.0]
    assert [p.date for p in points] == [MON1, MON2, MON3]
    assert table.excluded == []


def test_load_prices_falls_back_to_prior_trading_day(tmp_path):
    friday_before_mon2 = MON2 - dt.timedelta(days=3)
    path = write_rows(
        tmp_path / "p.csv",
        [
            (MON1.isoformat(), "AAA", 100),
            (friday_before_mon2.isoformat(), "AAA", 105),  # Monday missing that week
            (MON3.isoformat(), "AAA", 99),
        ],
    )
    points = load_prices(path, "monday").points["AAA"]
    assert [p.date for p in points] == [MON1, MON2, MON3]
    assert points[1].close == 105.0


def test_load_prices_non_numeric_close_names_the_row(tmp_path):
    path = write_rows(
        tmp_path / "p.csv",
        [
            (MON1.isoformat(), "AAA", 100),
            (MON2.isoformat(), "AAA", "oops"),
        ],
    )
    with pytest.raises(ParseError, match="line 3"):
        load_prices(path)


def test_load_prices_rejects_nonpositive_close(tmp_path):
    path = write_rows(tmp_path / "p.csv", [(MON1.isoformat(), "AAA", -5)])
    with pytest.raises(ParseError, match="positive"):
        load_prices(path)


def test_load_prices_excludes_asset_outside_window(tmp_path):
    # CCC stopped trading weeks before the grid starts, so no week samples it
    path = write_rows(
        tmp_path / "p.csv",
        [
            (MON2.isoformat(), "AAA", 100),
            (MON3.isoformat(), "AAA", 101),
            ((MON1 - dt.timedelta(days=30)).isoformat(), "CCC", 50),
        ],
    )
    table = load_prices(path)
    assert table.excluded == ["CCC"]
    assert "CCC" not in table.points


def test_forward_fill_never_fabricates_a_price(tmp_path, rng):
    rows = []
    observed = {}
    day = dt.date(2024, 1, 2)  # a Tuesday: Mondays often missing
    for asset in ("AAA", "BBB"):
        observed[asset] = set()
        for i in range(40):
            if rng.random() < 0.6:
                date = day + dt.timedelta(days=int(rng.integers(0, 5)) + 7 * i)
                close = float(np.round(rng.uniform(10, 200), 4))
                rows.append((date.isoformat(), asset, close))
                observed[asset].add(close)
    write_rows(tmp_path / "p.csv", rows)
    table = load_prices(tmp_path / "p.csv")
    for asset, points in table.points.items():
        for point in points:
            assert point.close in observed[asset]


def test_compute_returns_definitional_cases():
    def series(closes):
        points = [PricePoint(d, "AAA", c) for d, c in zip(weekly_dates(MON1, len(closes)), closes)]
        return compute_returns(points)

    np.testing.assert_allclose(series([100, 110]).returns, [0.10])
    np.testing.assert_allclose(series([100, 100, 100]).returns, [0.0, 0.0])
    np.testing.assert_allclose(series([100, 90, 99]).returns, [-0.10, 0.10])


def test_compute_returns_needs_two_points():
    with pytest.raises(InsufficientDataError):
        compute_returns([PricePoint(MON1, "AAA", 100.0)])


def test_returns_round_trip_through_prices(rng):
    returns = rng.uniform(-0.2, 0.3, size=60)
    closes = 100.0 * np.concatenate([[1.0], np.cumprod(1.0 + returns)])
    points = [
        PricePoint(d, "AAA", float(c))
        for d, c in zip(weekly_dates(MON1, len(closes)), closes)
    ]
    rebuilt = compute_returns(points).returns
    np.testing.assert_allclose(rebuilt, returns, rtol=1e-12)


def test_align_universe_identity_case():
    a = make_return_series("AAA", [0.1, 0.2, -0.1])
    b = make_return_series("BBB", [0.0, 0.05, 0.02])
    universe, report = align_universe([a, b])
    assert universe.assets == ["AAA", "BBB"]
    assert universe.n_weeks == 3
    np.testing.assert_array_equal(universe.series["AAA"].returns, a.returns)
    assert report.dropped == []


def test_align_universe_drops_short_series_and_reports():
    a = make_return_series("AAA", np.zeros(221))
    b = make_return_series("BBB", np.zeros(100))
    universe, report = align_universe([a, b], min_length=180)
    assert universe.assets == ["AAA"]
    assert [asset for asset, _ in report.dropped] == ["BBB"]
    assert "BBB" in report.as_text()


def test_align_universe_all_below_min_length_errors():
    a = make_return_series("AAA", np.zeros(10))
    b = make_return_series("BBB", np.zeros(12))
    with pytest.raises(AlignmentError):
        align_universe([a, b], min_length=50)


def test_align_universe_no_overlap_errors():
    a = make_return_series("AAA", np.zeros(5), start=dt.date(2024, 1, 8))
    b = make_return_series("BBB", np.zeros(5), start=dt.date(2030, 1, 7))
    with pytest.raises(AlignmentError):
        align_universe([a, b])


def test_align_universe_permutation_invariant(rng):
    series = [
        make_return_series(f"S{i}", rng.normal(size=30), start=dt.date(2024, 1, 8))
        for i in range(4)
    ]
    forward, _ = align_universe(series)
    backward, _ = align_universe(series[::-1])
    assert set(forward.assets) == set(backward.assets)
    assert forward.dates == backward.dates
    for asset in forward.assets:
        np.testing.assert_array_equal(
            forward.series[asset].returns, backward.series[asset].returns
        )


def test_align_universe_truncates_to_common_window():
    long = make_return_series("AAA", np.arange(10, dtype=float), start=MON1)
    short = make_return_series("BBB", np.arange(6, dtype=float), start=MON3)
    universe, _ = align_universe([long, short])
    assert universe.n_weeks == 6
    np.testing.assert_array_equal(universe.series["AAA"].returns, np.arange(2, 8, dtype=float))
