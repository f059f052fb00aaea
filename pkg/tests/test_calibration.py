import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psfmarket.calibration import (
    CALIBRATION_COLUMNS,
    LITERAL_LABEL,
    BdsRecord,
    CalibrationWindow,
    ColumnMap,
    DataWarning,
    aggregate_records,
    calibrate_all,
    estimate_entry_rate,
    estimate_exit_rate,
    estimate_net_growth,
    estimate_training_speed_literal,
    group_by_sector,
    parse_bds,
    read_calibration,
    write_calibration,
)
from psfmarket.errors import DataFormatError, InsufficientDataError
from psfmarket.params import CustomerSectorParams
from psfmarket.simulation import simulate_customer_population

HEADER = "year,vcnaics4,firms,estabs_entry,firmdeath_firms,emp\n"
W = CalibrationWindow(2000, 2010)


def rec(year, firms=100, entrants=10, exits=5, emp=1000, code="1111"):
    return BdsRecord(year, code, firms, entrants, exits, emp)


def parse_text(text, **kw):
    return parse_bds(io.StringIO(text), **kw)


class TestParse:
    def test_two_rows(self):
        records, summary = parse_text(HEADER + "2008,5411,100,8,4,900\n2009,5411,102,9,5,910\n")
        assert records == [BdsRecord(2008, "5411", 100, 8, 4, 900), BdsRecord(2009, "5411", 102, 9, 5, 910)]
        assert summary.dropped == 0

    def test_blank_employment_dropped(self):
        records, summary = parse_text(HEADER + "2008,5411,100,8,4,\n2009,5411,102,9,5,910\n")
        assert len(records) == 1 and summary.dropped == 1
        assert summary.dropped_by_column == {"emp": 1}

    @pytest.mark.parametrize("marker", ["(D)", "(S)", "N"])
    def test_suppression_markers(self, marker):
        records, summary = parse_text(HEADER + f"2008,5411,{marker},8,4,900\n")
        assert records == [] and summary.dropped == 1

    def test_fixture_file(self, fixture_path):
        records, summary = parse_bds(fixture_path)
        assert len(records) == 44 and summary.dropped == 0
        by_key = {(r.sector_code, r.year): r for r in records}
        assert {c for c, _ in by_key} == {"3121", "4861", "4922", "5416"}
        assert {y for _, y in by_key} == set(range(2008, 2019))
        assert by_key["3121", 2008] == BdsRecord(2008, "3121", 5200, 618, 429, 230000)
        assert by_key["5416", 2008] == BdsRecord(2008, "5416", 160000, 15326, 16922, 1200000)
        assert by_key["5416", 2009] == BdsRecord(2009, "5416", 158404, 15893, 16959, 1245829)

    def test_missing_column(self):
        with pytest.raises(DataFormatError, match="emp"):
            parse_text("year,vcnaics4,firms,estabs_entry,firmdeath_firms\n2008,1,1,1,1\n")

    def test_bad_year(self):
        with pytest.raises(DataFormatError, match="line 2: unparseable year"):
            parse_text(HEADER + "20x8,5411,100,8,4,900\n")

    def test_duplicate(self):
        with pytest.raises(DataFormatError, match="duplicate sector 5411 year 2008"):
            parse_text(HEADER + "2008,5411,100,8,4,900\n2008,5411,100,8,4,900\n")

    def test_bad_count(self):
        with pytest.raises(DataFormatError, match="line 2"):
            parse_text(HEADER + "2008,5411,1.5,8,4,900\n")

    def test_exits_above_firms_flagged_not_rejected(self):
        records, summary = parse_text(HEADER + "2008,5411,10,8,40,900\n")
        assert len(records) == 1 and summary.exits_exceed_firms == [("5411", 2008)]

    def test_custom_columns_and_delimiter(self):
        text = "Y;S;F;EN;EX;E\n2008;5411;100;8;4;900\n"
        cmap = ColumnMap("Y", "S", "F", "EN", "EX", "E")
        records, _ = parse_text(text, column_map=cmap, delimiter=";")
        assert records[0].employment == 900

    def test_empty_input(self):
        with pytest.raises(DataFormatError, match="header"):
            parse_text("")


class TestEstimators:
    def test_exit_rate_zero(self):
        assert estimate_exit_rate([rec(y, exits=0) for y in range(2000, 2004)], W) == 0

    def test_exit_rate_mean(self):
        rs = [rec(2000, exits=4), rec(2001, exits=5), rec(2002, exits=6)]
        assert estimate_exit_rate(rs, W) == pytest.approx(0.05, abs=1e-15)

    def test_entry_rate_needs_three_years(self):
        with pytest.raises(InsufficientDataError):
            estimate_entry_rate([rec(2000, entrants=10), rec(2001, entrants=12)], W)

    def test_entry_rate_mean(self):
        rs = [rec(2000, entrants=8), rec(2001, entrants=10), rec(2002, entrants=12)]
        assert estimate_entry_rate(rs, W) == pytest.approx(0.10, abs=1e-15)
        assert estimate_entry_rate([rec(y, entrants=0) for y in range(2000, 2004)], W) == 0

    def test_years_outside_window_ignored(self):
        rs = [rec(1990, exits=90)] + [rec(y, exits=5) for y in range(2000, 2003)]
        assert estimate_exit_rate(rs, W) == pytest.approx(0.05)

    def test_net_growth_examples(self):
        assert estimate_net_growth([rec(y) for y in range(2000, 2004)], W) == 0
        doubling = [rec(2000 + k, emp=1000 * 2**k) for k in range(4)]
        assert estimate_net_growth(doubling, W) == 1.0

    def test_net_growth_skips_zero_employment(self):
        rs = [rec(2000, emp=0)] + [rec(2001 + k, emp=1000 * 2**k) for k in range(4)]
        with pytest.warns(DataWarning, match="zero employment"):
            assert estimate_net_growth(rs, W) == 1.0

    def test_gap_breaks_pairs(self):
        rs = [rec(y) for y in (2000, 2001, 2003, 2004)]
        with pytest.raises(InsufficientDataError):
            estimate_net_growth(rs, W)

    def test_literal_formula(self):
        emp = [125_000, 127_500, 130_050, 132_651]  # +2% each year
        rs = [rec(2000 + k, firms=1000, entrants=100, exits=50, emp=e) for k, e in enumerate(emp)]
        est = estimate_training_speed_literal(rs, W)
        assert est.value == pytest.approx(0.502, abs=1e-12)
        assert est.label == LITERAL_LABEL == "literal (dimensionally suspect)"
        flat = [rec(y, exits=0) for y in range(2000, 2004)]
        assert estimate_training_speed_literal(flat, W).value == 0

    def test_literal_rejects_zero_entrants(self):
        with pytest.raises(InsufficientDataError, match="zero entrants"):
            estimate_training_speed_literal([rec(y, entrants=0) for y in range(2000, 2004)], W)

    def test_literal_disagrees_on_fixture(self, fixture_path):
        records, _ = parse_bds(fixture_path)
        window = CalibrationWindow()
        for code, rs in group_by_sector(records).items():
            literal = estimate_training_speed_literal(rs, window).value
            proxy = estimate_net_growth(rs, window)
            assert abs(literal) > 10 * abs(proxy), code

    def test_mixed_sectors_rejected(self):
        with pytest.raises(ValueError, match="several sectors"):
            estimate_exit_rate([rec(2000, code="1"), rec(2001, code="2"), rec(2002, code="1")], W)


class TestCalibrateAll:
    def test_fixture_rows(self, fixture_path):
        records, _ = parse_bds(fixture_path)
        rows = calibrate_all(records, psf_codes={"5416"})
        assert [r.sector_code for r in rows] == ["3121", "4861", "4922", "5416"]
        assert [r.is_psf for r in rows] == [False, False, False, True]
        assert all(r.usable and r.years_used == 11 for r in rows)

    def test_matches_golden_table(self, fixture_path, tmp_path):
        # the golden table was computed in exact rational arithmetic by fixtures/make_golden.py
        records, _ = parse_bds(fixture_path)
        path = write_calibration(calibrate_all(records), tmp_path / "cal.csv")
        golden = fixture_path.parent / "calibration_golden.csv"
        assert path.read_bytes() == golden.read_bytes()

    def test_empty(self):
        assert calibrate_all([]) == []

    def test_short_sector_flagged_unusable(self):
        rows = calibrate_all([rec(2000), rec(2001)], W)
        assert len(rows) == 1 and not rows[0].usable
        assert rows[0].net_growth is None and "need 3" in rows[0].note

    def test_round_trip(self, fixture_path, tmp_path):
        rows = calibrate_all(parse_bds(fixture_path)[0])
        for fmt in ("csv", "json"):
            path = write_calibration(rows, tmp_path / f"cal.{fmt}", format=fmt)
            assert read_calibration(path, format=fmt) == rows
        doc = json.loads((tmp_path / "cal.json").read_text())
        assert doc["columns"] == list(CALIBRATION_COLUMNS)
        assert doc["rows"][0]["exit_rate"] == rows[0].exit_rate

    def test_read_partial_table(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("sector_code,net_growth\n5411,0.0079\n3121,\n")
        rows = read_calibration(path)
        assert rows[0].is_psf and rows[0].usable and not rows[1].usable

    def test_read_needs_growth_column(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("sector_code,exit_rate\n5411,0.04\n")
        with pytest.raises(DataFormatError):
            read_calibration(path)

    def test_aggregate_sums_years(self):
        agg = aggregate_records([rec(2000, code="1"), rec(2000, code="2"), rec(2001, code="1")])
        assert agg == [BdsRecord(2000, "ALL", 200, 20, 10, 2000), BdsRecord(2001, "ALL", 100, 10, 5, 1000)]


fixture_records = parse_bds(
    __import__("pathlib").Path(__file__).parent / "fixtures" / "bds_fixture.csv")[0]


@settings(max_examples=25, deadline=None)
@given(st.randoms(use_true_random=False))
def test_row_order_irrelevant(rnd):
    shuffled = list(fixture_records)
    rnd.shuffle(shuffled)
    assert calibrate_all(shuffled) == calibrate_all(fixture_records)


@settings(max_examples=25, deadline=None)
@given(year=st.integers(2008, 2018), code=st.sampled_from(["3121", "4861", "4922", "5416"]))
def test_dropping_a_year(year, code):
    before = {r.sector_code: r for r in calibrate_all(fixture_records)}
    kept = [r for r in fixture_records if (r.sector_code, r.year) != (code, year)]
    after = {r.sector_code: r for r in calibrate_all(kept)}
    assert after[code].years_used == before[code].years_used - 1
    for other in set(before) - {code}:
        assert after[other] == before[other]


def test_deterministic_serialisation(tmp_path):
    a = write_calibration(calibrate_all(fixture_records), tmp_path / "a.csv")
    b = write_calibration(calibrate_all(list(reversed(fixture_records))), tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_recovers_simulated_growth():
    c = CustomerSectorParams(alpha=1.5, psi=0.04, mu=0.04)
    dt, years = 0.05, 30
    stride = round(1 / dt)
    estimates = []
    for seed in range(10):
        traj, _ = simulate_customer_population(c, years, dt, seed=seed, n0=5000)
        records = [rec(y, firms=int(traj.count[y * stride]), emp=int(round(traj.total_size[y * stride])))
                   for y in range(years + 1)]
        estimates.append(estimate_net_growth(records, CalibrationWindow(10, years)))
    assert np.mean(estimates) == pytest.approx(c.net_growth(), rel=0.20)


def _real_rows(path):
    records, _ = parse_bds(path)
    return records, {r.sector_code: r for r in calibrate_all(records)}


@pytest.mark.realdata
def test_legal_services_exit_rate(real_data_path):
    _, rows = _real_rows(real_data_path)
    assert rows["5411"].exit_rate == pytest.approx(0.0415, abs=0.005)


@pytest.mark.realdata
def test_economy_growth(real_data_path):
    records, _ = _real_rows(real_data_path)
    agg = aggregate_records(records)
    assert estimate_net_growth(agg, CalibrationWindow()) == pytest.approx(0.0076, abs=0.003)
