from pathlib import Path

import pytest

from mls.metrics import (
    ReleaseRecord,
    TooFewRecords,
    ZeroLoc,
    fault_rate,
    load_releases,
    make_record,
    parse_report,
    render_figures,
    render_report,
    trend_check,
    write_tsv,
)

FIXTURE = Path(__file__).resolve().parents[1] / "fixtures" / "releases.jsonl"


def test_fault_rate_values():
    assert fault_rate(0, 1000) == 0.0
    assert fault_rate(10, 10000) == 1.0
    # hand arithmetic: 17 * 1000 / 3840
    assert abs(fault_rate(17, 3840) - 4.4271) < 1e-4


def test_fault_rate_zero_loc():
    with pytest.raises(ZeroLoc):
        fault_rate(1, 0)


def test_render_empty_is_header_only():
    text = render_report([])
    assert text == "Size  Time  Fault/KLOC  FTR  Acceptance  Change\n"


def test_fixture_rows_render_exactly_as_published():
    records = load_releases(FIXTURE)
    lines = render_report(records).splitlines()
    assert lines[1] == "3840  3  4.46  3%  60%  40%"
    assert lines[3] == "4250  2  3.40  1.75%  77%  23%"
    assert lines[4] == "4360  2  2.76  1.5%  80%  20%"


def test_render_parse_round_trip():
    records = load_releases(FIXTURE)
    text = render_report(records)
    assert render_report(parse_report(text)) == text


def test_trend_check_fixture_passes():
    records = load_releases(FIXTURE)
    passed, violations = trend_check(records)
    assert passed and violations == []


def test_trend_check_reversed_fails_everywhere():
    records = list(reversed(load_releases(FIXTURE)))
    passed, violations = trend_check(records)
    assert not passed
    assert len(violations) == 9  # 3 series x 3 adjacent pairs


def test_trend_check_too_few():
    with pytest.raises(TooFewRecords):
        trend_check(load_releases(FIXTURE)[:1])


def test_synthetic_record_computes_rate():
    rec = make_record(5, 2000, 1, faults=5, ftr_frequency_pct=1,
                      acceptance_pct=85, change_ratio_pct=15)
    assert rec.fault_rate_per_kloc == 2.5
    assert rec.faults == 5


def test_invariants_on_paper_rows():
    for rec in load_releases(FIXTURE):
        assert rec.acceptance_pct + rec.change_ratio_pct == 100
        assert rec.size_loc > 0
        assert rec.fault_rate_per_kloc >= 0


def test_exports(tmp_path):
    records = load_releases(FIXTURE)
    write_tsv(records, tmp_path / "releases.tsv")
    lines = (tmp_path / "releases.tsv").read_text().splitlines()
    assert len(lines) == 5 and lines[0].startswith("release\t")
    written = render_figures(records, tmp_path / "figs")
    assert [p.name for p in written] == ["fault_rate.png", "acceptance_change.png"]
    assert all(p.stat().st_size > 0 for p in written)
