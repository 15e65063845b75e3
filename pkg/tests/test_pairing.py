import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import rec
from verigauge.exceptions import UnknownAttribute
from verigauge.pairing import (
    YokingPolicy,
    build_pair_set,
    enumerate_genuine_pairs,
    enumerate_impostor_pairs,
    stratify_pairs,
    write_pair_list,
)

THREE_SUBJECTS = [rec("i1", "s1"), rec("i2", "s1"), rec("i3", "s2"), rec("i4", "s2"), rec("i5", "s3")]


def brute_force(records, attrs=()):
    gen, imp = set(), set()
    for a, b in itertools.combinations(records, 2):
        key = tuple(sorted((a.image_id, b.image_id)))
        if a.subject_id == b.subject_id:
            gen.add(key)
        elif all(a.get(x) is not None and a.get(x) == b.get(x) for x in attrs):
            imp.add(key)
    return sorted(gen), sorted(imp)


class TestGenuine:
    def test_three_subjects(self):
        assert enumerate_genuine_pairs(THREE_SUBJECTS) == [("i1", "i2"), ("i3", "i4")]

    def test_single_image_subjects(self):
        assert enumerate_genuine_pairs([rec(f"i{k}", f"s{k}") for k in range(5)]) == []

    def test_one_subject_four_images(self):
        assert len(enumerate_genuine_pairs([rec(f"i{k}", "s") for k in range(4)])) == 6


class TestImpostor:
    def test_unyoked_count(self):
        assert len(enumerate_impostor_pairs(THREE_SUBJECTS)) == 8

    def test_race_yoked(self):
        records = [rec("A1", "a1", race="X"), rec("A2", "a2", race="X"),
                   rec("B1", "b1", race="Y"), rec("B2", "b2", race="Y")]
        assert enumerate_impostor_pairs(records, YokingPolicy(("race",))) == [("A1", "A2"), ("B1", "B2")]
        assert len(enumerate_impostor_pairs(records)) == 6

    def test_race_gender_yoked(self):
        records = [rec("p", "1", race="X", gender="M"), rec("q", "2", race="X", gender="F"),
                   rec("r", "3", race="Y", gender="M"), rec("s", "4", race="Y", gender="M")]
        assert enumerate_impostor_pairs(records, YokingPolicy.parse("race,gender")) == [("r", "s")]

    def test_unknown_attribute(self):
        with pytest.raises(UnknownAttribute):
            enumerate_impostor_pairs(THREE_SUBJECTS, YokingPolicy(("race",)))

    def test_missing_attribute_excludes_subject(self):
        records = [rec("a", "1", race="X"), rec("b", "2", race="X"), rec("c", "3")]
        pairs = build_pair_set(records, YokingPolicy(("race",)))
        assert pairs.impostor_pairs() == [("a", "b")]
        assert pairs.excluded_subjects == 1

    def test_policy_parsing(self):
        assert YokingPolicy.parse("none").label == "none"
        assert YokingPolicy.parse(None) == YokingPolicy()
        assert YokingPolicy.parse("race, gender").constrained_attributes == ("race", "gender")
        with pytest.raises(ValueError):
            YokingPolicy(("race", "race"))


people = st.lists(
    st.tuples(st.integers(0, 6), st.sampled_from(["X", "Y", None]), st.sampled_from(["M", "F"])),
    min_size=0,
    max_size=18,
)


def _records(rows):
    # subject-level attributes: the first row of each subject wins
    first = {}
    for s, r, g in rows:
        first.setdefault(s, (r, g))
    out = []
    for k, (s, _, _) in enumerate(rows):
        r, g = first[s]
        attrs = {"gender": g, **({"race": r} if r else {})}
        out.append(rec(f"img{k:02d}", f"s{s}", **attrs))
    out.append(rec("zz-anchor", "anchor", race="X", gender="M"))
    return out


@settings(max_examples=300, deadline=None)
@given(people)
def test_matches_brute_force(rows):
    records = _records(rows)
    for attrs in ((), ("race",), ("race", "gender")):
        ps = build_pair_set(records, YokingPolicy(attrs))
        gen, imp = brute_force(records, attrs)
        assert ps.genuine_pairs() == gen
        assert ps.impostor_pairs() == imp


@settings(max_examples=300, deadline=None)
@given(people)
def test_yoking_shrinks_monotonically(rows):
    records = _records(rows)
    sets = [set(enumerate_impostor_pairs(records, YokingPolicy(a))) for a in ((), ("race",), ("race", "gender"))]
    assert sets[2] <= sets[1] <= sets[0]
    gen = set(enumerate_genuine_pairs(records))
    n = len(records)
    assert not gen & sets[0]
    assert len(gen | sets[0]) == n * (n - 1) // 2


def test_order_independent_of_input_order():
    records = _records([(k % 4, "XY"[k % 2], "MF"[k % 3 == 0]) for k in range(12)])
    a = build_pair_set(records, YokingPolicy(("race",)))
    b = build_pair_set(list(reversed(records)), YokingPolicy(("race",)))
    assert a.genuine_pairs() == b.genuine_pairs()
    assert a.impostor_pairs() == b.impostor_pairs()


class TestSampling:
    records = [rec(f"i{k:03d}", f"s{k // 2}", race="XY"[k % 2]) for k in range(80)]

    def test_seeded_subsample_is_subset_and_reproducible(self):
        full = set(enumerate_impostor_pairs(self.records))
        a = enumerate_impostor_pairs(self.records, sample=100, seed=5)
        assert len(a) == len(set(a)) == 100
        assert set(a) <= full
        assert a == sorted(a)
        assert a == enumerate_impostor_pairs(self.records, sample=100, seed=5)
        assert a != enumerate_impostor_pairs(self.records, sample=100, seed=6)

    def test_sample_larger_than_population_is_complete(self):
        full = enumerate_impostor_pairs(self.records)
        assert enumerate_impostor_pairs(self.records, sample=10**6, seed=1) == full

    def test_seed_recorded(self):
        assert build_pair_set(self.records, sample=10, seed=3).sample_seed == 3
        assert build_pair_set(self.records).sample_seed is None

    def test_rejection_path(self, monkeypatch):
        import verigauge.pairing as pairing

        monkeypatch.setattr(pairing, "_ENUMERATE_LIMIT", 10)
        policy = YokingPolicy(("race",))
        full = set(enumerate_impostor_pairs(self.records, policy))
        got = enumerate_impostor_pairs(self.records, policy, sample=200, seed=2)
        assert len(set(got)) == 200 and set(got) <= full


class TestStratify:
    def test_race_yoked_two_buckets(self):
        records = [rec(f"{r}{k}", f"{r}s{k // 2}", race=r) for r in "XY" for k in range(4)]
        strata = stratify_pairs(build_pair_set(records, YokingPolicy(("race",))), "race")
        assert sorted(strata.groups) == ["X", "Y"]
        assert strata.cross_group.n_impostor == 0

    def test_unyoked_one_image_per_subject(self):
        records = [rec("a", "1", race="X"), rec("b", "2", race="X"), rec("c", "3", race="Y"), rec("d", "4", race="Y")]
        sizes = stratify_pairs(build_pair_set(records), "race").sizes()
        assert sizes["X"] == (0, 1) and sizes["Y"] == (0, 1)
        assert sizes["<cross-group>"] == (0, 4)

    @settings(max_examples=200, deadline=None)
    @given(people)
    def test_partition_is_complete(self, rows):
        ps = build_pair_set(_records(rows))
        strata = stratify_pairs(ps, "race")
        parts = [*strata.groups.values(), strata.cross_group, strata.unlabeled]
        assert sorted(p for s in parts for p in s.impostor_pairs()) == ps.impostor_pairs()
        assert sorted(p for s in parts for p in s.genuine_pairs()) == ps.genuine_pairs()


def test_write_pair_list(tmp_path):
    write_pair_list(build_pair_set(THREE_SUBJECTS), tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "id_a,id_b,label"
    assert lines[1:3] == ["i1,i2,genuine", "i1,i3,impostor"]
    assert len(lines) == 11
