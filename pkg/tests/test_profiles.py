from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from tibias.profiles import (HEADER_BYTES, Concept, MetadataLedger, Profile, SimilarityClass,
                             classify, concept_sim, default_profiles, format_profiles,
                             handshake, parse_profiles, profile_sim, profile_sim_bruteforce)


def flat(node, *labels):
    return Profile(node, [Concept(x) for x in labels])


class TestConceptSim:
    def test_identity(self):
        assert concept_sim(Concept("football"), Concept("football")) == 1.0

    def test_unrelated_flat(self):
        assert concept_sim(Concept("chess"), Concept("football")) == 0.0

    def test_wu_palmer(self):
        a = Concept.parse("football", "sports/ball/football")
        b = Concept.parse("tennis", "sports/racquet/tennis")
        assert concept_sim(a, b) == pytest.approx(float(Fraction(2 * 1, 3 + 3)))

    def test_labels_case_insensitive(self):
        assert concept_sim(Concept("Jazz"), Concept("jazz")) == 1.0


class TestProfileSim:
    def test_identical(self):
        p = flat("a", "x", "y", "z")
        assert profile_sim(p, p) == 1.0

    def test_half(self):
        assert profile_sim(flat("x", "football", "chess"), flat("y", "football", "go")) == 0.5

    def test_disjoint(self):
        assert profile_sim(flat("x", "a", "b"), flat("y", "c")) == 0.0

    def test_empty_source_is_zero(self, caplog):
        assert profile_sim(Profile("e"), flat("y", "c")) == 0.0
        assert "no concepts" in caplog.text

    def test_not_symmetric(self):
        small, big = flat("s", "a"), flat("b", "a", "b", "c", "d")
        assert profile_sim(small, big) == 1.0
        assert profile_sim(big, small) == 0.25


class TestClassify:
    def test_examples(self):
        assert classify(0.9, 0.6) is SimilarityClass.MAX_MATCH
        assert classify(0.0) is SimilarityClass.NO_MATCH
        assert classify(0.6, 0.6) is SimilarityClass.LESS_MATCH
        assert classify(0.2) is SimilarityClass.LESS_MATCH

    def test_rejects_bad_threshold(self):
        with pytest.raises(ValueError):
            classify(0.5, 0.0)


class TestHandshake:
    def _ten(self, node, prefix):
        return flat(node, *[f"{prefix}{i}" for i in range(10)])

    def test_bytes_of_full_exchange(self):
        a, b = self._ten("a", "alpha"), self._ten("b", "be")
        ledger = MetadataLedger()
        r = handshake(a, b, ledger)
        size = lambda p: HEADER_BYTES + sum(2 + len(c.label) for c in p.concepts)
        assert r.full_exchange
        assert ledger.bytes_exchanged == size(a) + size(b) == 2 * 16 + 10 * 8 + 10 * 5
        assert ledger.full_exchanges == 1

    def test_repeat_is_short(self):
        a, b = self._ten("a", "x"), self._ten("b", "y")
        ledger = MetadataLedger()
        handshake(a, b, ledger)
        before = ledger.bytes_exchanged
        r = handshake(a, b, ledger)
        assert not r.full_exchange
        assert ledger.bytes_exchanged - before == HEADER_BYTES
        assert (ledger.full_exchanges, ledger.short_handshakes) == (1, 1)

    def test_change_forces_full_exchange(self):
        a, b = self._ten("a", "x"), self._ten("b", "y")
        ledger = MetadataLedger()
        handshake(a, b, ledger)
        a.concepts.append(Concept("new"))
        assert handshake(a, b, ledger).full_exchange

    def test_reports_connection_count_and_latency(self):
        ledger = MetadataLedger()
        r = handshake(flat("a", "x"), flat("b", "x"), ledger, T=4)
        assert r.T_reported == 4 and r.klass is SimilarityClass.MAX_MATCH
        assert len(ledger.match_latency_samples) == 1


def test_profile_file_round_trip():
    relay, senders = default_profiles(3)
    text = format_profiles([relay, *senders])
    again = parse_profiles(text)
    assert [p.node_id for p in again] == ["relay", "s0", "s1", "s2"]
    assert again[1].concepts == senders[0].concepts


def test_profile_file_errors():
    with pytest.raises(ValueError, match="line 1"):
        parse_profiles("concept x\n")
    with pytest.raises(ValueError, match="duplicate"):
        parse_profiles("node a\nconcept x\nconcept X\n")


# -- properties --------------------------------------------------------------

_tokens = st.sampled_from("abcdefgh")
_paths = st.lists(_tokens, min_size=1, max_size=4).map(lambda p: "/".join(p))


@st.composite
def concepts(draw):
    label = draw(st.text("abcdefghij", min_size=1, max_size=3))
    path = draw(st.one_of(st.none(), _paths))
    return Concept.parse(label, f"{path}/{label}" if path else None)


@st.composite
def profiles(draw, min_size=0):
    cs = draw(st.lists(concepts(), min_size=min_size, max_size=12,
                       unique_by=lambda c: c.label))
    return Profile("p", cs)


@given(profiles(), profiles())
def test_range(a, b):
    assert 0.0 <= profile_sim(a, b) <= 1.0


@given(profiles(min_size=1))
def test_self_similarity(a):
    assert profile_sim(a, a) == 1.0


@given(profiles(), profiles())
def test_indexed_matches_bruteforce(a, b):
    assert profile_sim(a, b) == pytest.approx(profile_sim_bruteforce(a, b), abs=1e-12)


@given(profiles(min_size=1), profiles(), concepts())
def test_adding_target_concepts_never_lowers_similarity(a, b, extra):
    if extra.label in {c.label for c in b.concepts}:
        return
    bigger = Profile("q", [*b.concepts, extra])
    assert profile_sim(a, bigger) >= profile_sim(a, b) - 1e-12
