import json
import random
from collections import Counter
from dataclasses import replace
from datetime import date

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from travelsat.data import (SCHEMAS, Category, Dataset, IngestError, ReviewRecord, export_csv,
                            ingest, read_jsonl, sort_chronological, stats, write_jsonl,
                            write_rejections)

from synth import make_dataset

AIRPORT_HEADER = ("airport_name,link,title,author,author_country,date,content,experience_airport,"
                  "date_visit,type_traveller,overall_rating,queuing_rating,terminal_cleanliness_rating,"
                  "terminal_seating_rating,terminal_signs_rating,food_beverages_rating,"
                  "airport_shopping_rating,wifi_connectivity_rating,airport_staff_rating,recommended")


def _airport_row(name, author, day, text, overall="7", q="4", rec="1"):
    return f'{name},/l,t,{author},UK,{day},"{text}",,,,{overall},{q},3,3,3,3,3,3,3,{rec}'


@pytest.fixture
def airport_csv(tmp_path):
    path = tmp_path / "airport.csv"
    rows = [
        _airport_row("heathrow", "ann", "2014-05-01", "Quick, easy."),
        _airport_row("gatwick", "bob", "2014-05-03", "Slow queue.", overall="2", q="1", rec="0"),
        _airport_row("heathrow", "ann", "2014-05-02", "Fine", overall="", q="", rec=""),
    ]
    path.write_text(AIRPORT_HEADER + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return path


def test_schemas_match_the_four_categories():
    assert len(Category) == 4
    assert [len(SCHEMAS[c].features) for c in Category] == [8, 7, 7, 7]
    assert SCHEMAS[Category.AIRPORT].features[0] == "queuing"
    assert "wifi" in SCHEMAS[Category.LOUNGE].features
    assert "value_money" in SCHEMAS[Category.AIRLINE].features
    assert "power_supply" in SCHEMAS[Category.SEAT].features


def test_ingest_scrape_layout(airport_csv):
    d = ingest(airport_csv, "airport")
    assert len(d) == 3
    first = d.records[0]
    assert first.entity == "heathrow"
    assert first.timestamp == date(2014, 5, 1)
    assert first.overall == 7
    assert first.ratings["queuing"] == 4
    assert first.ratings["airport_staff"] == 3
    assert first.recommended is True
    assert first.text == "Quick, easy."
    third = d.records[2]
    assert third.overall is None and third.ratings["queuing"] is None and third.recommended is None
    assert [r.line_no for r in d.records] == [2, 3, 4]
    assert not d.warnings and not d.rejections


def test_out_of_range_rating_becomes_absent_with_one_warning(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text(AIRPORT_HEADER + "\n" + _airport_row("x", "u", "2015-01-01", "t", q="7") + "\n")
    d = ingest(path, Category.AIRPORT)
    assert len(d) == 1
    assert d.records[0].ratings["queuing"] is None
    assert d.records[0].ratings["terminal_seating"] == 3
    assert len(d.warnings) == 1
    assert d.warnings[0].column == "queuing"


def test_overall_outside_one_to_ten_is_dropped(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text(AIRPORT_HEADER + "\n" + _airport_row("x", "u", "2015-01-01", "t", overall="11") + "\n")
    d = ingest(path, "airport")
    assert d.records[0].overall is None
    assert len(d.warnings) == 1


def test_malformed_rows_are_reported_not_dropped(tmp_path):
    path = tmp_path / "a.csv"
    good = _airport_row("x", "u", "2015-01-01", "t")
    path.write_text("\n".join([AIRPORT_HEADER, good, "x,too,few", good.replace("2015-01-01", "yesterday")]) + "\n")
    d = ingest(path, "airport")
    assert len(d) == 1
    assert [r.line_no for r in d.rejections] == [3, 4]
    out = tmp_path / "rej.jsonl"
    write_rejections(d, out)
    lines = [json.loads(l) for l in out.read_text().splitlines()]
    assert [set(l) for l in lines] == [{"line_no", "reason"}] * 2


def test_multiline_text_keeps_line_numbers(tmp_path):
    path = tmp_path / "a.csv"
    rows = [_airport_row("x", "u", "2015-01-01", "line one\nline two"),
            _airport_row("y", "v", "2015-01-02", "single")]
    path.write_text(AIRPORT_HEADER + "\n" + "\n".join(rows) + "\n")
    d = ingest(path, "airport")
    assert d.records[0].text == "line one\nline two"
    assert [r.line_no for r in d.records] == [2, 4]


@pytest.mark.parametrize("flag, expected", [("yes", True), ("NO", False), ("1", True), ("0", False), ("", None)])
def test_recommended_flag_spellings(tmp_path, flag, expected):
    path = tmp_path / "a.csv"
    path.write_text(AIRPORT_HEADER + "\n" + _airport_row("x", "u", "2015-01-01", "t", rec=flag) + "\n")
    assert ingest(path, "airport").records[0].recommended is expected


def test_lounge_wifi_alias(tmp_path):
    path = tmp_path / "lounge.csv"
    path.write_text(
        "airline_name,author,date,content,lounge_name,overall_rating,comfort_rating,"
        "wifi_connectivity_rating,recommended\n"
        "ba,u,2015-02-02,nice,galleries,8,5,2,1\n")
    rec = ingest(path, "lounge").records[0]
    assert rec.entity == "galleries"
    assert rec.ratings["wifi"] == 2
    assert rec.ratings["comfort"] == 5


def test_ingest_errors(tmp_path):
    with pytest.raises(IngestError, match="no such file"):
        ingest(tmp_path / "nope.csv", "airport")
    bad = tmp_path / "latin.csv"
    bad.write_bytes(AIRPORT_HEADER.encode() + b"\nx,/l,t,u,UK,2015-01-01,caf\xe9,,,,7,4,3,3,3,3,3,3,3,1\n")
    with pytest.raises(IngestError, match="UTF-8"):
        ingest(bad, "airport")
    nohead = tmp_path / "h.csv"
    nohead.write_text("author,overall_rating\nu,5\n")
    with pytest.raises(IngestError, match="mandatory"):
        ingest(nohead, "airport")
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(IngestError):
        ingest(empty, "airport")


def test_dataset_rejects_foreign_category():
    rec = ReviewRecord(Category.SEAT, None, "e", "t")
    with pytest.raises(ValueError):
        Dataset(Category.AIRPORT, (rec,))


def test_stats_example_single_positive():
    d = Dataset(Category.AIRPORT, (ReviewRecord(Category.AIRPORT, None, "e", "t", recommended=True, author="a"),))
    s = stats(d)
    assert (s.n_users, s.n_reviews, s.satisfaction_rate) == (1, 1, 1.0)


def test_stats_empty_dataset():
    s = stats(Dataset(Category.LOUNGE, ()))
    assert (s.n_users, s.n_reviews, s.satisfaction_rate) == (0, 0, None)


def test_stats_match_brute_force_recount():
    for seed in range(5):
        d = make_dataset(Category.AIRLINE, n=300, seed=seed, noise=0.1)
        d = d.with_records(replace(r, recommended=None) if i % 7 == 0 else r
                           for i, r in enumerate(d.records))
        s = stats(d)
        users = set()
        pos = tot = 0
        for r in d.records:
            users.add(r.author)
            if r.recommended is not None:
                tot += 1
                pos += r.recommended
        assert s.n_users == len(users) <= s.n_reviews == len(d.records)
        assert s.satisfaction_rate == pos / tot
        pairs = Counter((r.author, r.entity) for r in d.records)
        assert s.n_duplicates == sum(c - 1 for c in pairs.values())


def _rec(day, tag):
    return ReviewRecord(Category.SEAT, None if day is None else date(2015, 1, day), tag, tag)


def test_sort_stable_and_undated_first():
    recs = (_rec(3, "a"), _rec(1, "b"), _rec(None, "c"), _rec(1, "d"), _rec(2, "e"))
    out = sort_chronological(Dataset(Category.SEAT, recs))
    assert [r.entity for r in out.records] == ["c", "b", "d", "e", "a"]
    assert out.undated == (0,)


def test_sort_matches_brute_force_order():
    rng = random.Random(7)
    recs = [_rec(day, str(i)) for i, day in enumerate([4, 2, 5, 1, 3])]
    rng.shuffle(recs)
    out = sort_chronological(Dataset(Category.SEAT, tuple(recs)))
    # selection sort as an independent oracle
    remaining, expected = list(recs), []
    while remaining:
        best = min(range(len(remaining)), key=lambda i: (remaining[i].timestamp, i))
        expected.append(remaining.pop(best))
    assert list(out.records) == expected


@settings(max_examples=60, deadline=None)
@given(st.lists(st.one_of(st.none(), st.integers(1, 28)), max_size=30))
def test_sort_is_idempotent_permutation(days):
    recs = tuple(_rec(day, str(i)) for i, day in enumerate(days))
    once = sort_chronological(Dataset(Category.SEAT, recs))
    twice = sort_chronological(once)
    assert once.records == twice.records
    assert sorted(r.entity for r in once.records) == sorted(r.entity for r in recs)
    dated = [r.timestamp for r in once.records if r.timestamp is not None]
    assert dated == sorted(dated)


def test_export_then_ingest_round_trip(tmp_path):
    d = make_dataset(Category.LOUNGE, n=60, seed=3, missing=0.2)
    d = d.with_records(replace(r, text=r.text + ', with "quotes"\nand lines', line_no=None) for r in d.records)
    first = tmp_path / "one.csv"
    export_csv(d, first)
    back = ingest(first, "lounge")
    assert [replace(r, line_no=None) for r in back.records] == list(d.records)
    second = tmp_path / "two.csv"
    export_csv(back, second)
    assert first.read_bytes() == second.read_bytes()


def test_jsonl_cache_round_trip(tmp_path):
    d = make_dataset(Category.SEAT, n=40, seed=1, missing=0.3)
    path = tmp_path / "seat.jsonl"
    write_jsonl(d, path, header={"config": {"x": 1}})
    back, head = read_jsonl(path)
    assert back.records == d.records
    assert head["config"] == {"x": 1} and head["category"] == "seat"
    first = path.read_bytes()
    write_jsonl(back, path, header={"config": {"x": 1}})
    assert path.read_bytes() == first
