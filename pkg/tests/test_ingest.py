import numpy as np
import pytest

from corrstates.errors import DataError, ValidationError
from corrstates.ingest import (
    SECTOR_CODES,
    PriceTable,
    SectorMap,
    filter_stocks,
    gap_run_lengths,
    load_price_table,
    load_sector_map,
    write_price_table,
    write_sector_map,
)
from helpers import make_price_table, sector_map_322, weekdays


def _write(tmp_path, text, name="prices.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_fully_quoted(tmp_path):
    p = _write(
        tmp_path,
        "date,A,B,C\n"
        "2020-01-06,1.0,2.0,3.0\n"
        "2020-01-07,1.1,2.1,3.1\n"
        "2020-01-08,1.2,2.2,3.2\n"
        "2020-01-09,1.3,2.3,3.3\n"
        "2020-01-10,1.4,2.4,3.4\n",
    )
    table = load_price_table(p)
    assert table.tickers == ("A", "B", "C")
    assert table.n_days == 5
    assert table.quoted.all()
    assert table.prices[1, 2] == 2.2


def test_load_single_gap(tmp_path):
    p = _write(
        tmp_path,
        "date,A,B\n"
        "2020-01-06,1.0,2.0\n"
        "2020-01-07,1.1,2.1\n"
        "2020-01-08,1.2,NA\n"
        "2020-01-09,1.3,2.3\n",
    )
    table = load_price_table(p)
    assert not table.quoted[1, 2]
    assert np.isnan(table.prices[1, 2])
    assert table.quoted.sum() == 7


def test_load_empty_cell_means_no_quote(tmp_path):
    p = _write(tmp_path, "date,A,B\n2020-01-06,1.0,\n2020-01-07,1.1,2.0\n")
    table = load_price_table(p)
    assert not table.quoted[1, 0]


def test_load_full_scale_dimensions(tmp_path):
    # 322 tickers x 4430 days, patterned prices to keep the file small
    n, d = 322, 4430
    i, j = np.indices((n, d))
    prices = 100.0 + (i + j) % 7
    table = make_price_table(prices)
    path = tmp_path / "big.csv"
    write_price_table(table, path)
    loaded = load_price_table(path)
    assert loaded.n_stocks == 322
    assert loaded.n_days == 4430


def test_load_sorts_unsorted_dates(tmp_path):
    p = _write(
        tmp_path,
        "date,A\n2020-01-08,3.0\n2020-01-06,1.0\n2020-01-07,2.0\n",
    )
    table = load_price_table(p)
    assert [d.isoformat() for d in table.days] == ["2020-01-06", "2020-01-07", "2020-01-08"]
    assert list(table.prices[0]) == [1.0, 2.0, 3.0]


def test_load_malformed_row_reports_line(tmp_path):
    p = _write(tmp_path, "date,A,B\n2020-01-06,1.0,2.0\n2020-01-07,1.1\n")
    with pytest.raises(DataError, match="line 3"):
        load_price_table(p)


def test_load_bad_price_reports_line_and_ticker(tmp_path):
    p = _write(tmp_path, "date,A,B\n2020-01-06,1.0,oops\n")
    with pytest.raises(DataError, match="line 2.*B"):
        load_price_table(p)


def test_load_non_positive_price_rejected(tmp_path):
    p = _write(tmp_path, "date,A\n2020-01-06,0.0\n")
    with pytest.raises(ValidationError, match="non-positive"):
        load_price_table(p)


def test_load_duplicate_date_rejected(tmp_path):
    p = _write(tmp_path, "date,A\n2020-01-06,1.0\n2020-01-06,1.1\n")
    with pytest.raises(ValidationError, match="duplicate date"):
        load_price_table(p)


def test_load_missing_file(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_price_table(tmp_path / "nope.csv")


def test_round_trip_is_bit_identical(tmp_path):
    rng = np.random.default_rng(42)
    prices = np.exp(rng.standard_normal((5, 30))) * 100
    quoted = rng.random((5, 30)) > 0.1
    quoted[:, 0] = True
    table = make_price_table(prices, quoted)
    p1 = tmp_path / "a.csv"
    write_price_table(table, p1)
    loaded = load_price_table(p1)
    assert loaded.tickers == table.tickers
    assert loaded.days == table.days
    assert np.array_equal(loaded.quoted, table.quoted)
    assert np.array_equal(
        loaded.prices[loaded.quoted], table.prices[table.quoted]
    )
    p2 = tmp_path / "b.csv"
    write_price_table(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_gap_run_boundary_exceeded_by_one():
    quoted = np.ones((1, 10), dtype=bool)
    quoted[0, 3:6] = False  # run of 3
    table = make_price_table(np.full((1, 10), 5.0), quoted)
    assert filter_stocks(table, max_gap=2).n_stocks == 0
    assert filter_stocks(table, max_gap=3).n_stocks == 1


def test_gap_runs_measured_individually():
    quoted = np.ones((1, 12), dtype=bool)
    quoted[0, 2:4] = False
    quoted[0, 7:9] = False  # two separate runs of 2
    table = make_price_table(np.full((1, 12), 5.0), quoted)
    assert filter_stocks(table, max_gap=2).n_stocks == 1


def test_gap_runs_at_horizon_edges_count():
    quoted = np.ones((2, 10), dtype=bool)
    quoted[0, :3] = False  # leading run of 3
    quoted[1, 7:] = False  # trailing run of 3
    table = make_price_table(np.full((2, 10), 5.0), quoted)
    assert list(gap_run_lengths(table)) == [3, 3]
    assert filter_stocks(table, max_gap=2).n_stocks == 0


def test_filter_preserves_order_and_is_idempotent():
    rng = np.random.default_rng(7)
    quoted = rng.random((20, 60)) > 0.05
    table = make_price_table(np.full((20, 60), 3.0), quoted)
    kept = filter_stocks(table, max_gap=2)
    # order preserved: surviving tickers appear in original order
    original = list(table.tickers)
    assert sorted(kept.tickers, key=original.index) == list(kept.tickers)
    again = filter_stocks(kept, max_gap=2)
    assert again.tickers == kept.tickers
    assert np.array_equal(again.prices[again.quoted], kept.prices[kept.quoted])


def test_filter_rejects_negative_max_gap():
    table = make_price_table(np.full((1, 5), 2.0))
    with pytest.raises(ValidationError):
        filter_stocks(table, max_gap=-1)


def test_sector_map_complete_cover(tmp_path):
    table = make_price_table(np.full((3, 4), 2.0), tickers=("A", "B", "C"))
    p = _write(tmp_path, "ticker,sector\nA,FN\nB,IT\nC,EG\n", "sectors.csv")
    smap = load_sector_map(p, table)
    assert smap.codes == ("FN", "IT", "EG")
    assert smap.sector_of("B") == "IT"


def test_sector_map_missing_ticker_named(tmp_path):
    table = make_price_table(np.full((2, 4), 2.0), tickers=("A", "B"))
    p = _write(tmp_path, "ticker,sector\nA,FN\n", "sectors.csv")
    with pytest.raises(ValidationError, match="B"):
        load_sector_map(p, table)


def test_sector_map_unknown_code_rejected(tmp_path):
    table = make_price_table(np.full((1, 4), 2.0), tickers=("A",))
    p = _write(tmp_path, "ticker,sector\nA,XX\n", "sectors.csv")
    with pytest.raises(ValidationError, match="XX"):
        load_sector_map(p, table)


def test_sector_map_conflicting_duplicate_rejected(tmp_path):
    table = make_price_table(np.full((1, 4), 2.0), tickers=("A",))
    p = _write(tmp_path, "ticker,sector\nA,FN\nA,IT\n", "sectors.csv")
    with pytest.raises(ValidationError, match="conflicting"):
        load_sector_map(p, table)


def test_sector_map_ignores_extra_tickers(tmp_path):
    table = make_price_table(np.full((1, 4), 2.0), tickers=("A",))
    p = _write(tmp_path, "ticker,sector\nA,FN\nZZ,IT\n", "sectors.csv")
    smap = load_sector_map(p, table)
    assert smap.tickers == ("A",)


def test_sector_map_322_histogram_recomputed(tmp_path):
    # the bundled-style 322-ticker map is accepted and its per-sector counts
    # are recoverable from the written file
    smap = sector_map_322()
    path = tmp_path / "sectors.csv"
    write_sector_map(smap, path)
    table = make_price_table(
        np.full((322, 3), 5.0), tickers=smap.tickers
    )
    loaded = load_sector_map(path, table)
    counts = loaded.counts()
    assert sum(counts.values()) == 322
    assert set(counts) == set(SECTOR_CODES)
    assert all(c > 0 for c in counts.values())
    expected = {c: smap.codes.count(c) for c in SECTOR_CODES}
    assert counts == expected


def test_price_table_validates_grid_shape():
    with pytest.raises(ValidationError, match="shape"):
        PriceTable(
            tickers=("A",),
            days=weekdays(np.datetime64("2020-01-06").astype(object), 3),
            prices=np.ones((2, 3)),
            quoted=np.ones((2, 3), dtype=bool),
        )


def test_sector_map_rejects_unknown_code_directly():
    with pytest.raises(ValidationError):
        SectorMap(tickers=("A",), codes=("??",))
