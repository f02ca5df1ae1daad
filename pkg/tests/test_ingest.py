import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpinow.errors import ConfigError, DataValidationError, NotFoundError
from gpinow.ingest import (
    GDELT_57,
    GDELT_58,
    AnnualGpi,
    ColumnMap,
    EventRecord,
    EventScan,
    PanelCube,
    aggregate_counts,
    build_design_matrix,
    load_gpi_annual,
    parse_gdelt_events,
    read_panel_csv,
    upsample_gpi,
    write_panel_csv,
)
from gpinow.months import Month


def gdelt_line(month="201802", code="091", country="US", width=58):
    fields = [""] * width
    fields[0] = "1"
    fields[2] = month
    fields[27] = code
    fields[51] = country
    return "\t".join(fields)


def panel_text(cube):
    buf = io.StringIO()
    write_panel_csv(cube, buf)
    return buf.getvalue()


class TestParse:
    def test_empty_input(self):
        assert parse_gdelt_events(io.StringIO("")) == ([], 0)

    def test_three_lines_one_missing_country(self):
        text = "\n".join([gdelt_line(), gdelt_line(country=""), gdelt_line(month="201803")]) + "\n"
        recs, bad = parse_gdelt_events(io.StringIO(text))
        assert bad == 1
        assert [r.month for r in recs] == [Month(2018, 2), Month(2018, 3)]

    def test_investigate_crime_row(self):
        recs, bad = parse_gdelt_events(io.StringIO(gdelt_line("201802", "091", "US")))
        assert bad == 0
        assert recs == [EventRecord(Month(2018, 2), "091", "US")]

    @pytest.mark.parametrize("line", [
        gdelt_line(month="2018-2"),
        gdelt_line(month="201800"),
        gdelt_line(month="20180X"),
        gdelt_line(code="9"),
        gdelt_line(code="09123"),
        gdelt_line(code="A91"),
        gdelt_line(country="U"),
        gdelt_line(country="us"),
        gdelt_line(country="USA"),
        "\t".join(["x"] * 40),
        "",
    ])
    def test_malformed_lines_are_counted(self, line):
        recs, bad = parse_gdelt_events(io.StringIO(line + "\n" + gdelt_line() + "\n"))
        assert bad == 1
        assert len(recs) == 1

    def test_57_column_layout(self):
        recs, bad = parse_gdelt_events(io.StringIO(gdelt_line(width=57)), GDELT_57)
        assert bad == 0 and len(recs) == 1

    def test_custom_column_map(self):
        line = "\t".join(["US", "201805", "0231"])
        cm = ColumnMap.from_mapping({"MonthYear": 1, "EventBaseCode": 2, "ActionGeo_CountryCode": 0, "width": 3})
        recs, bad = parse_gdelt_events(io.StringIO(line), cm)
        assert recs == [EventRecord(Month(2018, 5), "0231", "US")]

    def test_index_beyond_width_is_config_error(self):
        with pytest.raises(ConfigError):
            ColumnMap(country=60, width=58)
        with pytest.raises(ConfigError):
            ColumnMap.from_mapping({"country": 58})

    def test_scan_counts_lines(self):
        scan = EventScan(io.StringIO(gdelt_line() + "\n\n" + gdelt_line() + "\n"), GDELT_58)
        assert len(list(scan)) == 2
        assert (scan.lines, scan.malformed) == (3, 1)

    def test_crlf_line_endings(self):
        recs, bad = parse_gdelt_events(io.StringIO(gdelt_line() + "\r\n" + gdelt_line() + "\r\n"))
        assert bad == 0 and len(recs) == 2

    def test_golden_fixture(self, fixtures_dir):
        expected = json.loads((fixtures_dir / "events_50.expected.json").read_text())
        with open(fixtures_dir / "events_50.tsv", newline="") as fh:
            recs, bad = parse_gdelt_events(fh)
        assert bad == expected["malformed"]
        assert len(recs) + bad == expected["lines"]
        golden = (fixtures_dir / "events_50.panel.csv").read_text()
        assert panel_text(aggregate_counts(recs)) == golden


class TestAggregate:
    def test_empty(self):
        assert len(aggregate_counts([])) == 0

    def test_identical_records(self):
        r = EventRecord(Month(2018, 2), "091", "US")
        assert aggregate_counts([r, r, r]).counts == {("US", Month(2018, 2), "091"): 3}

    def test_two_countries(self):
        recs = [EventRecord(Month(2018, 2), "091", "US"), EventRecord(Month(2018, 2), "091", "FR"),
                EventRecord(Month(2018, 3), "042", "FR")]
        cube = aggregate_counts(recs)
        assert cube.countries() == ["FR", "US"]
        assert cube.total() == 3

    def test_zero_count_rejected(self):
        with pytest.raises(DataValidationError):
            PanelCube({("US", Month(2018, 1), "091"): 0})

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from(["US", "FR", "SO"]), st.integers(1, 6),
                              st.sampled_from(["091", "042", "14", "1903"])), max_size=60),
           st.randoms(use_true_random=False))
    def test_conservation_and_merge_order(self, keys, rnd):
        recs = [EventRecord(Month(2018, m), code, c) for c, m, code in keys]
        cube = aggregate_counts(recs)
        assert cube.total() == len(recs)
        parts = [recs[i::3] for i in range(3)]
        rnd.shuffle(parts)
        merged = PanelCube({})
        for part in parts:
            merged = merged.merge(aggregate_counts(part))
        assert merged.counts == cube.counts

    def test_panel_roundtrip(self):
        recs = [EventRecord(Month(2018, m), code, c)
                for c in ("US", "FR") for m in (1, 2) for code in ("091", "0231")]
        cube = aggregate_counts(recs + recs[:3])
        text = panel_text(cube)
        assert text.splitlines()[0] == "country,month,event_base_code,count"
        assert read_panel_csv(io.StringIO(text)).counts == cube.counts
        body = text.splitlines()[1:]
        assert body == sorted(body, key=lambda r: r.split(",")[:3])


class TestGpi:
    def test_documented_rows(self):
        g = load_gpi_annual(io.StringIO("country,year,score\nIS,2019,1.072\nSO,2019,3.574\n"))
        assert g.entries[("IS", 2019)] == 1.072
        assert g.entries[("SO", 2019)] == 3.574

    def test_out_of_range_names_row(self):
        with pytest.raises(DataValidationError, match="row 3"):
            load_gpi_annual(io.StringIO("country,year,score\nIS,2019,1.0\nSO,2019,5.3\n"))

    def test_duplicate(self):
        with pytest.raises(DataValidationError, match="duplicate"):
            load_gpi_annual(io.StringIO("country,year,score\nIS,2019,1.1\nIS,2019,1.2\n"))

    def test_bad_header(self):
        with pytest.raises(DataValidationError):
            load_gpi_annual(io.StringIO("c,y,s\nIS,2019,1.1\n"))

    def test_two_anchor_interpolation(self):
        s = upsample_gpi(AnnualGpi({("US", 2008): 2.00, ("US", 2009): 2.12}), "US")
        assert len(s.values) == 13
        assert s.value_at(Month(2008, 1)) == 2.00
        assert s.value_at(Month(2008, 7)) == pytest.approx(2.06, abs=1e-12)
        assert s.value_at(Month(2009, 1)) == 2.12
        assert s.value_at(Month(2009, 2)) is None

    def test_single_anchor(self):
        s = upsample_gpi(AnnualGpi({("US", 2008): 1.5}), "US")
        assert s.values == (1.5,)

    def test_twelve_anchors(self, rng):
        annual = AnnualGpi({("SA", y): float(rng.uniform(1, 5)) for y in range(2008, 2020)})
        s = upsample_gpi(annual, "SA")
        assert len(s.values) == 133
        assert (s.start_month, s.end_month) == (Month(2008, 1), Month(2019, 1))

    def test_gap_and_unknown(self):
        annual = AnnualGpi({("US", 2008): 2.0, ("US", 2010): 2.1})
        with pytest.raises(DataValidationError, match="gap"):
            upsample_gpi(annual, "US")
        with pytest.raises(NotFoundError):
            upsample_gpi(annual, "FR")

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(1.0, 5.0), min_size=1, max_size=15), st.integers(1990, 2020))
    def test_anchors_exact_and_piecewise_linear(self, scores, first):
        annual = AnnualGpi({("XX", first + i): s for i, s in enumerate(scores)})
        s = upsample_gpi(annual, "XX")
        v = np.array(s.values)
        assert len(v) == 12 * (len(scores) - 1) + 1
        for i, score in enumerate(scores):
            assert s.value_at(Month(first + i, 1)) == score
        assert ((v >= 1.0) & (v <= 5.0)).all()
        for a in range(len(scores) - 1):
            seg = v[12 * a: 12 * a + 13]
            assert np.abs(np.diff(seg, 2)).max(initial=0.0) <= 1e-12


class TestDesignMatrix:
    def cube(self):
        recs = [
            EventRecord(Month(2018, 1), "091", "US"),
            EventRecord(Month(2018, 1), "091", "US"),
            EventRecord(Month(2018, 1), "022", "US"),
            EventRecord(Month(2018, 3), "022", "US"),
            EventRecord(Month(2018, 3), "091", "US"),
            EventRecord(Month(2018, 3), "190", "FR"),
        ]
        return aggregate_counts(recs)

    def test_codes_and_zero_rows(self):
        fm = build_design_matrix(self.cube(), "US", (Month(2018, 1), Month(2018, 3)))
        assert fm.codes == ("022", "091")
        np.testing.assert_array_equal(fm.values, [[1, 2], [0, 0], [1, 1]])

    def test_singleton(self):
        cube = PanelCube({("US", Month(2018, 1), "091"): 5})
        fm = build_design_matrix(cube, "US", (Month(2018, 1), Month(2018, 1)))
        np.testing.assert_array_equal(fm.values, [[5]])

    def test_unknown_country(self):
        with pytest.raises(NotFoundError):
            build_design_matrix(self.cube(), "SO", (Month(2018, 1), Month(2018, 3)))

    def test_deterministic(self):
        a = build_design_matrix(self.cube(), "US", (Month(2017, 11), Month(2018, 4)))
        b = build_design_matrix(PanelCube(dict(reversed(list(self.cube().counts.items())))), "US",
                                (Month(2017, 11), Month(2018, 4)))
        assert a.codes == b.codes
        assert a.values.tobytes() == b.values.tobytes()

    def test_select_zero_fills(self):
        fm = build_design_matrix(self.cube(), "US", (Month(2018, 1), Month(2018, 3)))
        np.testing.assert_array_equal(fm.select(["091", "555"]), [[2, 0], [0, 0], [1, 0]])
