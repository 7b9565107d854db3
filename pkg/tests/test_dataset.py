import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairrerank.dataset import (
    DataError,
    Dataset,
    InputFormat,
    InteractionRecord,
    Interactions,
    build_dataset,
    distinct_user_counts,
    parse_interactions,
    partition_popularity,
    split,
    write_partition_file,
    write_split_files,
)


class TestParseInteractions:
    def test_basic_tab_line(self):
        records = parse_interactions(["u1\ti9\t3.0"])
        assert records == [InteractionRecord("u1", "i9", 3.0)]

    def test_default_weight_with_comma_format(self):
        records = parse_interactions(["u1,i9"], InputFormat(delimiter=","))
        assert records == [InteractionRecord("u1", "i9", 1.0)]

    def test_negative_weight_errors_with_line_number(self):
        with pytest.raises(DataError, match="line 1"):
            parse_interactions(["u1\ti9\t-2"])

    def test_timestamp_column(self):
        records = parse_interactions(["u1\ti9\t2.0\t1700000000"])
        assert records[0].timestamp == 1700000000

    def test_malformed_line_reports_later_line_number(self):
        with pytest.raises(DataError, match="line 2"):
            parse_interactions(["u1\ti1", "too\tmany\tfields\there\tnow"])

    def test_header_skipped(self):
        records = parse_interactions(["user\titem", "u1\ti1"], InputFormat(header=True))
        assert len(records) == 1

    def test_blank_lines_skipped(self):
        records = parse_interactions(["u1\ti1", "", "u2\ti2\n"])
        assert len(records) == 2

    def test_empty_key_rejected(self):
        with pytest.raises(DataError, match="empty"):
            parse_interactions(["\ti1"])

    def test_non_finite_weight_rejected(self):
        with pytest.raises(DataError, match="non-finite"):
            parse_interactions(["u1\ti1\tinf"])

    def test_unparseable_weight_rejected(self):
        with pytest.raises(DataError, match="weight"):
            parse_interactions(["u1\ti1\tabc"])


class TestBuildDataset:
    def test_counts_users_and_items(self):
        ds = build_dataset([InteractionRecord("u1", "i1"), InteractionRecord("u2", "i1")])
        assert ds.num_users == 2
        assert ds.num_items == 1

    def test_duplicates_merge_by_max(self):
        ds = build_dataset([InteractionRecord("u1", "i1", 2.0), InteractionRecord("u1", "i1", 5.0)])
        assert len(ds.interactions) == 1
        assert ds.interactions.weights[0] == 5.0

    def test_empty_input_errors(self):
        with pytest.raises(DataError):
            build_dataset([])

    def test_first_appearance_indexing(self):
        ds = build_dataset(
            [InteractionRecord("b", "y"), InteractionRecord("a", "x"), InteractionRecord("b", "x")]
        )
        assert ds.user_index == {"b": 0, "a": 1}
        assert ds.item_index == {"y": 0, "x": 1}

    def test_sum_rule(self):
        ds = build_dataset(
            [InteractionRecord("u", "i", 2.0), InteractionRecord("u", "i", 3.0)], dedup="sum"
        )
        assert ds.interactions.weights[0] == 5.0


def _records_for_user_counts(counts):
    records = []
    for u, c in enumerate(counts):
        for j in range(c):
            records.append(InteractionRecord(f"u{u}", f"i{u}_{j}"))
    return records


class TestSplit:
    def test_user_with_10_interactions_gets_7_1_2(self):
        ds = build_dataset(_records_for_user_counts([10]))
        triple = split(ds, seed=0)
        assert (len(triple.train), len(triple.valid), len(triple.test)) == (7, 1, 2)

    def test_user_with_2_interactions_keeps_all_in_train(self):
        ds = build_dataset(_records_for_user_counts([2]))
        triple = split(ds, seed=0)
        assert (len(triple.train), len(triple.valid), len(triple.test)) == (2, 0, 0)

    def test_same_seed_is_identical(self):
        ds = build_dataset(_records_for_user_counts([10, 4, 7, 3, 25]))
        a = split(ds, seed=99)
        b = split(ds, seed=99)
        for x, y in ((a.train, b.train), (a.valid, b.valid), (a.test, b.test)):
            assert np.array_equal(x.users, y.users)
            assert np.array_equal(x.items, y.items)
            assert np.array_equal(x.weights, y.weights)

    def test_different_seeds_can_differ(self):
        ds = build_dataset(_records_for_user_counts([40]))
        a = split(ds, seed=1)
        b = split(ds, seed=2)
        assert a.test.pair_set() != b.test.pair_set()

    def test_bad_ratios_rejected(self):
        ds = build_dataset(_records_for_user_counts([5]))
        with pytest.raises(ValueError):
            split(ds, ratios=(0.7, 0.1, 0.1), seed=0)
        with pytest.raises(ValueError):
            split(ds, ratios=(0.9, -0.1, 0.2), seed=0)

    @given(
        counts=st.lists(st.integers(min_value=1, max_value=40), min_size=1, max_size=15),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=50, deadline=None)
    def test_partition_is_disjoint_and_complete(self, counts, seed):
        ds = build_dataset(_records_for_user_counts(counts))
        triple = split(ds, seed=seed)
        train, valid, test = triple.train.pair_set(), triple.valid.pair_set(), triple.test.pair_set()
        assert len(triple.train) + len(triple.valid) + len(triple.test) == len(ds.interactions)
        assert not train & valid
        assert not train & test
        assert not valid & test
        assert train | valid | test == ds.interactions.pair_set()

    @given(c=st.integers(min_value=3, max_value=200))
    @settings(max_examples=50, deadline=None)
    def test_cut_positions_follow_floor_rule(self, c):
        # exact rational floors are the oracle here; float 0.7*c can be off
        cut1 = math.floor(Fraction(7, 10) * c)
        cut2 = math.floor(Fraction(8, 10) * c)
        ds = build_dataset(_records_for_user_counts([c]))
        triple = split(ds, seed=0)
        assert len(triple.train) == cut1
        assert len(triple.valid) == cut2 - cut1
        assert len(triple.test) == c - cut2

    def test_every_user_keeps_a_training_profile(self):
        ds = build_dataset(_records_for_user_counts([1, 2, 3, 4, 5, 50]))
        triple = split(ds, seed=3)
        assert set(np.unique(triple.train.users)) == set(range(ds.num_users))


class TestPartitionPopularity:
    @pytest.mark.parametrize("n,expected", [(2060, 412), (1019, 203), (1189, 237), (1507, 301)])
    def test_reference_catalog_sizes(self, n, expected):
        train = Interactions.from_triples([(0, 0, 1.0)], 1, n)
        part = partition_popularity(train, n)
        assert part.num_short == expected

    def test_most_interacted_items_marked_short(self, tiny_train):
        part = partition_popularity(tiny_train, 5, ratio=0.2)
        # floor(0.2*5)=1 short-head slot; item 0 has 4 distinct users
        assert part.num_short == 1
        assert part.short_head[0]

    def test_boundary_ties_break_by_item_index(self):
        # items 1,2,3 tie at 2 users each; two short-head slots after item 0
        triples = [(0, 0, 1.0), (1, 0, 1.0), (2, 0, 1.0)]
        for item in (1, 2, 3):
            triples += [(0, item, 1.0), (1, item, 1.0)]
        train = Interactions.from_triples(triples, 3, 10)
        part = partition_popularity(train, 10, ratio=0.3)
        assert part.num_short == 3
        assert list(np.flatnonzero(part.short_head)) == [0, 1, 2]

    def test_counts_are_distinct_users_not_weights(self):
        train = Interactions.from_triples([(0, 0, 100.0), (0, 1, 1.0), (1, 1, 1.0)], 2, 2)
        counts = distinct_user_counts(train, 2)
        assert counts.tolist() == [1, 2]

    def test_empty_catalog_errors(self):
        train = Interactions.from_triples([], 1, 0)
        with pytest.raises(ValueError):
            partition_popularity(train, 0)

    def test_bad_ratio_errors(self, tiny_train):
        with pytest.raises(ValueError):
            partition_popularity(tiny_train, 5, ratio=1.0)


class TestArtifactFiles:
    def test_split_files_round_trip_keys(self, tmp_path):
        ds = build_dataset(_records_for_user_counts([6, 4]))
        triple = split(ds, seed=0)
        files = write_split_files(triple, ds, tmp_path)
        written = sum(
            len(files[name].read_text().splitlines()) for name in ("train", "valid", "test")
        )
        assert written == len(ds.interactions)
        first = files["train"].read_text().splitlines()[0].split("\t")
        assert first[0] in ds.user_index
        assert first[1] in ds.item_index

    def test_partition_file_has_one_line_per_item(self, tmp_path, tiny_train):
        ds = build_dataset(
            [InteractionRecord(f"u{u}", f"i{i}") for u, i in zip(tiny_train.users, tiny_train.items)]
        )
        part = partition_popularity(ds.interactions, ds.num_items)
        path = write_partition_file(part, ds, tmp_path / "partition.tsv")
        lines = path.read_text().splitlines()
        assert len(lines) == ds.num_items
        assert all(line.split("\t")[2] in ("short", "long") for line in lines)
