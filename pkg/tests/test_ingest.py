import io
import json
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from sumd.ingest import (DataError, RatingRecord, dump_records, normalize_ratings, parse_records,
                         sample_community, sparsity_stats, synthesize_dataset)


def test_single_csv_row_normalizes_to_one():
    recs = parse_records(b"user,item,rating,ts\nu1,i1,5,100\n", "csv", raw_max=5)
    assert recs == [RatingRecord("u1", "i1", 1.0, 0)]


def test_timestamp_ties_break_on_user_then_item():
    data = "\n".join([
        json.dumps({"user": "u2", "item": "i1", "rating": 3, "ts": 7}),
        json.dumps({"user": "u1", "item": "i9", "rating": 3, "ts": 7}),
        json.dumps({"user": "u1", "item": "i2", "rating": 3, "ts": 7}),
    ])
    recs = parse_records(data.encode(), "jsonl")
    assert [(r.user, r.item, r.seq) for r in recs] == [("u1", "i2", 0), ("u1", "i9", 1), ("u2", "i1", 2)]


def test_amazon_review_keys_are_accepted():
    line = json.dumps({"reviewerID": "A1", "asin": "B0", "overall": 4.0, "unixReviewTime": 1})
    (rec,) = parse_records(line, "jsonl")
    assert (rec.user, rec.item, rec.rating) == ("A1", "B0", 0.8)


@pytest.mark.parametrize("payload, row", [
    (b"user,item,rating,ts\nu1,i1,5,1\nu2,i2,x,2\n", 3),
    (b"user,item,rating,ts\nu1,i1,5,1\nu2,i2,6,2\n", 3),
    (b"user,item,rating,ts\nu1,i1,0,1\n", 2),
    (b"user,item,rating,ts\nu1,i1,5\n", 2),
])
def test_bad_rows_report_row_number(payload, row):
    with pytest.raises(DataError) as exc:
        parse_records(payload, "csv")
    assert exc.value.row == row


def test_invalid_json_line_reports_row():
    with pytest.raises(DataError) as exc:
        parse_records(b'{"user":"u","item":"i","rating":1,"ts":1}\n{oops\n', "jsonl")
    assert exc.value.row == 2


def test_non_utf8_rejected():
    with pytest.raises(DataError):
        parse_records(b"\xff\xfe", "csv")


def test_reads_file_like_objects():
    src = io.BytesIO(b"user,item,rating,ts\nu1,i1,4,3\n")
    assert parse_records(src, "csv")[0].rating == pytest.approx(0.8)


@pytest.mark.parametrize("raw, expected", [(5, 1.0), (4, 0.8)])
def test_normalize(raw, expected):
    (r,) = normalize_ratings([RatingRecord("u", "i", raw, 0)], raw_max=5)
    assert r.rating == pytest.approx(expected)


@pytest.mark.parametrize("raw", [0, -1, 5.5])
def test_normalize_rejects_out_of_scale(raw):
    with pytest.raises(DataError):
        normalize_ratings([RatingRecord("u", "i", raw, 0)], raw_max=5)


def test_sparsity_of_dense_and_empty():
    assert sparsity_stats([RatingRecord("u", "i", 1.0, 0)]).sparsity == 0.0
    with pytest.raises(DataError):
        sparsity_stats([])


def test_sparsity_formula_on_reported_dataset_sizes():
    # 1 - records / (users * items) on the dataset sizes of the two Amazon sets
    magazine = 1 - 89688 / (2428 * 72098)
    beauty = 1 - 371344 / (32586 * 324038)
    assert magazine == pytest.approx(0.999488, abs=1e-6)
    assert beauty == pytest.approx(0.999965, abs=1e-6)


def test_stats_json_keys():
    st_ = sparsity_stats([RatingRecord("u", "i", 1.0, 0), RatingRecord("v", "j", 1.0, 1)])
    assert json.loads(st_.to_json()) == {"n_users": 2, "n_items": 2, "n_records": 2, "sparsity": 0.5}


def _users(n):
    return [RatingRecord(f"u{i:04d}", "x", 1.0, i) for i in range(n)]


def test_sample_community_sizes_and_determinism():
    recs = _users(2428)
    s = sample_community(recs, 0.02, seed=3)
    assert len(s.members) == 49
    assert s.members == sample_community(recs, 0.02, seed=3).members
    assert sample_community(recs, 1.0, seed=0).members == {r.user for r in recs}
    for bad in (0, 1.5, -0.1):
        with pytest.raises(ValueError):
            sample_community(recs, bad, 0)


def test_synthesize_basic_properties():
    recs = synthesize_dataset(500, 5000, 2000, rating_levels=5, seed=11)
    assert len(recs) == 2000
    assert len({(r.user, r.item) for r in recs}) == 2000
    assert [r.seq for r in recs] == list(range(2000))
    assert all(0 < r.rating <= 1 for r in recs)
    assert sparsity_stats(recs).n_records == 2000
    stats = sparsity_stats(recs)
    assert stats.n_users <= 500 and stats.n_items <= 5000


def test_synthesize_dense_has_zero_sparsity():
    recs = synthesize_dataset(4, 6, 24, seed=1)
    assert sparsity_stats(recs).sparsity == 0.0


def test_synthesize_is_byte_identical_per_seed():
    a = dump_records(synthesize_dataset(50, 300, 200, seed=5))
    b = dump_records(synthesize_dataset(50, 300, 200, seed=5))
    assert a == b
    assert a != dump_records(synthesize_dataset(50, 300, 200, seed=6))


def test_synthesize_rejects_infeasible():
    with pytest.raises(DataError):
        synthesize_dataset(2, 2, 5)


def test_item_popularity_is_heavy_tailed():
    recs = synthesize_dataset(500, 5000, 2000, seed=0)
    counts = sorted(Counter(r.item for r in recs).values(), reverse=True)
    # a few items carry many purchases while most are bought once
    assert counts[0] > 20 * counts[len(counts) // 2]
    assert counts[len(counts) // 2] <= 2


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.data())
def test_parse_is_idempotent_on_own_output(n_users, n_items, data):
    n = data.draw(st.integers(0, n_users * n_items))
    seed = data.draw(st.integers(0, 10_000))
    recs = synthesize_dataset(n_users, n_items, n, rating_levels=4, seed=seed)
    for fmt in ("jsonl", "csv"):
        once = parse_records(dump_records(recs, fmt), fmt, raw_max=1.0)
        assert once == recs
        assert parse_records(dump_records(once, fmt), fmt, raw_max=1.0) == once


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abc"), st.sampled_from("xyz"), st.integers(1, 5), st.integers(0, 3)),
                max_size=20))
def test_seq_is_a_bijection(rows):
    text = "user,item,rating,ts\n" + "".join(f"{u},{i},{r},{t}\n" for u, i, r, t in rows)
    recs = parse_records(text, "csv")
    assert sorted(r.seq for r in recs) == list(range(len(rows)))
