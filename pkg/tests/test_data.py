"""Match record validation, CSV round trips, registries, and splits."""

from __future__ import annotations

import datetime as dt
import io

import numpy as np
import pytest

from conftest import BASE_DATE, make_record, player_ids, random_dataset
from lineupgp.data import (
    CSV_HEADER,
    Dataset,
    HomeSide,
    MatchRecord,
    Outcome,
    build_registry,
    parse_dataset,
    serialize_dataset,
    split_by_cutoff,
    write_dataset,
)
from lineupgp.errors import DataError

HEADER_LINE = ",".join(CSV_HEADER)
P = player_ids(60)


def _row(
    match_id="m1",
    date="2022-01-01",
    competition="cup",
    team1="alpha",
    team2="beta",
    home="0",
    lineup1=None,
    lineup2=None,
    outcome="W",
):
    l1 = ";".join(lineup1 if lineup1 is not None else P[:11])
    l2 = ";".join(lineup2 if lineup2 is not None else P[11:22])
    return f"{match_id},{date},{competition},{team1},{team2},{home},{l1},{l2},{outcome}"


def _csv(*rows):
    return "\n".join([HEADER_LINE, *rows]) + "\n"


class TestEnums:
    def test_outcome_tokens_and_codes(self):
        assert Outcome.TEAM1_WIN.token == "W" and Outcome.TEAM1_WIN.code == 1
        assert Outcome.DRAW.token == "D" and Outcome.DRAW.code == 0
        assert Outcome.TEAM2_WIN.token == "L" and Outcome.TEAM2_WIN.code == -1
        for o in Outcome:
            assert Outcome.from_token(o.token) is o

    def test_outcome_bad_token(self):
        with pytest.raises(DataError, match="unknown outcome token"):
            Outcome.from_token("X")

    def test_home_signs(self):
        assert HomeSide.TEAM1.sign == 1
        assert HomeSide.TEAM2.sign == -1
        assert HomeSide.NEUTRAL.sign == 0
        for h in HomeSide:
            assert HomeSide.from_token(h.token) is h

    def test_home_bad_token(self):
        with pytest.raises(DataError, match="unknown home token"):
            HomeSide.from_token("3")


class TestMatchRecord:
    def test_lineups_stored_sorted(self):
        rec = make_record("m1", reversed(P[:11]), reversed(P[11:22]))
        assert rec.lineup1 == tuple(P[:11])
        assert rec.lineup2 == tuple(P[11:22])
        assert rec.players == tuple(P[:22])

    def test_wrong_lineup_size(self):
        with pytest.raises(DataError, match="10 players"):
            make_record("m1", P[:10], P[11:22])

    def test_duplicate_within_lineup(self):
        with pytest.raises(DataError, match="duplicate player"):
            make_record("m1", [P[0]] + P[1:10] + [P[0]], P[11:22])

    def test_player_on_both_sides(self):
        with pytest.raises(DataError, match="both lineups"):
            make_record("m1", P[:11], [P[0]] + P[12:22])

    def test_same_team_twice(self):
        with pytest.raises(DataError, match="team1 and team2"):
            make_record("m1", P[:11], P[11:22], team1="alpha", team2="alpha")

    def test_bad_ids(self):
        with pytest.raises(DataError, match="whitespace"):
            make_record(" m1", P[:11], P[11:22])
        with pytest.raises(DataError, match="empty"):
            make_record("", P[:11], P[11:22])
        with pytest.raises(DataError, match="forbidden character"):
            make_record("m1", ["a;b"] + P[1:11], P[11:22])
        with pytest.raises(DataError, match="forbidden character"):
            make_record("m1", P[:11], P[11:22], team1="al,pha")

    def test_date_must_be_date(self):
        with pytest.raises(DataError, match="datetime.date"):
            make_record("m1", P[:11], P[11:22], date=dt.datetime(2022, 1, 1))


class TestRegistry:
    def test_first_appearance_order(self):
        r1 = make_record("m1", P[22:33], P[33:44], date=BASE_DATE)
        r2 = make_record("m2", P[:11], P[11:22], date=BASE_DATE + dt.timedelta(days=1))
        reg = build_registry([r1, r2])
        # r1's players come first; within a record lineup1 before lineup2,
        # each sorted
        assert [pid for pid, _ in sorted(reg.items(), key=lambda kv: kv[1])] == (
            P[22:44] + P[:22]
        )

    def test_registry_is_content_function(self):
        rng = np.random.default_rng(3)
        ds = random_dataset(rng, 12, 40)
        shuffled = list(ds.records)
        rng.shuffle(shuffled)
        again = Dataset.from_records(shuffled)
        assert again.registry == ds.registry
        assert again.records == ds.records

    def test_dense_indices(self):
        rng = np.random.default_rng(4)
        ds = random_dataset(rng, 8, 30)
        assert sorted(ds.registry.values()) == list(range(ds.num_players))


class TestDataset:
    def test_sorted_by_date_then_id(self):
        r_late = make_record("m1", P[:11], P[11:22], date=BASE_DATE + dt.timedelta(days=5))
        r_b = make_record("mB", P[:11], P[11:22], date=BASE_DATE)
        r_a = make_record("mA", P[:11], P[11:22], date=BASE_DATE)
        ds = Dataset.from_records([r_late, r_b, r_a])
        assert [r.match_id for r in ds.records] == ["mA", "mB", "m1"]

    def test_duplicate_match_id(self):
        r1 = make_record("m1", P[:11], P[11:22])
        r2 = make_record("m1", P[22:33], P[33:44])
        with pytest.raises(DataError, match="duplicate match_id"):
            Dataset.from_records([r1, r2])

    def test_explicit_registry_validated(self):
        rec = make_record("m1", P[:11], P[11:22])
        with pytest.raises(DataError, match="missing player"):
            Dataset.from_records([rec], registry={P[0]: 0})
        gappy = {pid: 2 * i for i, pid in enumerate(P[:22])}
        with pytest.raises(DataError, match="0..P-1"):
            Dataset.from_records([rec], registry=gappy)

    def test_explicit_superset_registry_allowed(self):
        rec = make_record("m1", P[:11], P[11:22])
        reg = {pid: i for i, pid in enumerate(P[:30])}
        ds = Dataset.from_records([rec], registry=reg)
        assert ds.num_players == 30


class TestRoundTrip:
    def test_serialize_parse_identity(self):
        rng = np.random.default_rng(11)
        for trial in range(20):
            ds = random_dataset(rng, int(rng.integers(1, 15)), 40)
            text = serialize_dataset(ds)
            back = parse_dataset(io.StringIO(text))
            assert back.records == ds.records
            assert back.registry == ds.registry
            assert serialize_dataset(back) == text

    def test_file_round_trip(self, tmp_path):
        ds = random_dataset(np.random.default_rng(12), 6, 30)
        path = tmp_path / "matches.csv"
        write_dataset(ds, path)
        assert parse_dataset(path).records == ds.records

    def test_bytes_stream(self):
        ds = random_dataset(np.random.default_rng(13), 3, 25)
        raw = io.BytesIO(serialize_dataset(ds).encode("utf-8"))
        assert parse_dataset(raw).records == ds.records

    def test_header_and_line_endings(self):
        ds = random_dataset(np.random.default_rng(14), 2, 25)
        text = serialize_dataset(ds)
        assert text.startswith(HEADER_LINE + "\n")
        assert "\r" not in text


class TestParseErrors:
    def test_empty_input(self):
        with pytest.raises(DataError, match="missing CSV header"):
            parse_dataset(io.StringIO(""))

    def test_bad_header(self):
        with pytest.raises(DataError, match="line 1"):
            parse_dataset(io.StringIO("id,date\nx,y\n"))

    def test_wrong_field_count_names_line(self):
        text = _csv(_row(), "m2,2022-01-02,cup,alpha,beta,0,only,eight")
        with pytest.raises(DataError, match="line 3"):
            parse_dataset(io.StringIO(text))

    def test_bad_date(self):
        with pytest.raises(DataError, match="line 2.*bad date"):
            parse_dataset(io.StringIO(_csv(_row(date="2022-1-01"))))
        with pytest.raises(DataError, match="bad date"):
            parse_dataset(io.StringIO(_csv(_row(date="20220101"))))

    def test_bad_outcome_and_home(self):
        with pytest.raises(DataError, match="unknown outcome"):
            parse_dataset(io.StringIO(_csv(_row(outcome="V"))))
        with pytest.raises(DataError, match="unknown home"):
            parse_dataset(io.StringIO(_csv(_row(home="H"))))

    def test_short_lineup(self):
        with pytest.raises(DataError, match="line 2.*10 players"):
            parse_dataset(io.StringIO(_csv(_row(lineup1=P[:10]))))

    def test_duplicate_player_across_sides(self):
        with pytest.raises(DataError, match="both lineups"):
            parse_dataset(io.StringIO(_csv(_row(lineup2=[P[0]] + P[12:22]))))

    def test_duplicate_match_id(self):
        text = _csv(_row(match_id="m1"), _row(match_id="m1", date="2022-01-02"))
        with pytest.raises(DataError, match="duplicate match_id"):
            parse_dataset(io.StringIO(text))

    def test_blank_lines_skipped(self):
        text = _csv(_row()) + "\n\n"
        assert parse_dataset(io.StringIO(text)).n == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            parse_dataset(tmp_path / "nope.csv")


class TestSplit:
    def test_matches_brute_filter(self):
        rng = np.random.default_rng(21)
        ds = random_dataset(rng, 30, 50)
        cutoff = BASE_DATE + dt.timedelta(days=10)
        train, test = split_by_cutoff(ds, cutoff)
        assert [r.match_id for r in train.records] == [
            r.match_id for r in ds.records if r.date < cutoff
        ]
        assert [r.match_id for r in test.records] == [
            r.match_id for r in ds.records if r.date >= cutoff
        ]
        assert train.n + test.n == ds.n

    def test_cutoff_date_goes_to_test(self):
        ds = random_dataset(np.random.default_rng(22), 5, 30)
        cutoff = ds.records[2].date
        train, test = split_by_cutoff(ds, cutoff)
        assert test.records[0].date == cutoff
        assert all(r.date < cutoff for r in train.records)

    def test_halves_share_parent_registry(self):
        ds = random_dataset(np.random.default_rng(23), 20, 60)
        train, test = split_by_cutoff(ds, BASE_DATE + dt.timedelta(days=7))
        assert train.registry == ds.registry
        assert test.registry == ds.registry
        # the shared registry may cover players a half never fields
        train_players = {p for r in train.records for p in r.players}
        assert train_players <= set(train.registry)
