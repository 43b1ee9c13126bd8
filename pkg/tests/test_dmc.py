import itertools

import pytest
from hypothesis import given, strategies as st

from chatnet.errors import AmbiguousMax, RangeTooNarrow
from chatnet.tasks.dmc import (
    DigitalVector,
    DmcTask,
    accuracy,
    answer_text,
    batch_question,
    find_vectors,
    generate_dataset,
    majority_vote,
    oracle_label,
    parse_batch,
    parse_category,
    read_dataset,
    write_dataset,
)
from parse_golden import GOLDEN


def brute_max_position(v):
    best, pos = None, None
    for i in range(len(v)):
        if all(v[i] > v[j] for j in range(len(v)) if j != i):
            best, pos = v[i], i + 1
    return pos


def test_oracle_examples():
    assert oracle_label((1, 2, 4)) == 3
    assert oracle_label((48, 68, 49)) == 2
    assert oracle_label((99, 1, 98)) == 1
    with pytest.raises(AmbiguousMax):
        oracle_label((5, 5, 1))
    with pytest.raises(ValueError):
        oracle_label((5,))


@given(st.lists(st.integers(-50, 50), min_size=2, max_size=6))
def test_oracle_matches_brute_force(v):
    expected = brute_max_position(v)
    if expected is None:
        with pytest.raises(AmbiguousMax):
            oracle_label(v)
    else:
        assert oracle_label(v) == expected


def test_generate_dataset_balanced_and_seeded():
    a = generate_dataset(30, seed=3)
    b = generate_dataset(30, seed=3)
    assert a == b
    assert generate_dataset(30, seed=4) != a
    assert sorted(v.label for v in a) == [1] * 10 + [2] * 10 + [3] * 10
    for v in a:
        assert oracle_label(v.components) == v.label
        assert all(1 <= c <= 99 for c in v.components)


def test_generate_challenging_gap():
    for v in generate_dataset(30, seed=1, max_gap=5):
        top, second = sorted(v.components, reverse=True)[:2]
        assert 1 <= top - second <= 5


def test_range_too_narrow():
    with pytest.raises(RangeTooNarrow):
        generate_dataset(5, value_range=(3, 3))
    with pytest.raises(RangeTooNarrow):
        generate_dataset(5, max_gap=0)


def test_dataset_file_round_trip(tmp_path):
    vs = generate_dataset(12, seed=9)
    p = tmp_path / "train.csv"
    write_dataset(p, vs)
    assert read_dataset(p) == vs
    assert p.read_text().splitlines()[0].count(",") == 3


def test_from_line_rejects_wrong_label():
    assert DigitalVector.from_line("48,68,49,2") == DigitalVector((48, 68, 49), 2)
    with pytest.raises(ValueError):
        DigitalVector.from_line("48,68,49,1")


def test_answer_text():
    assert answer_text(DigitalVector((48, 68, 49), 2)) == "The correct answer: (48, 68, 49) belongs to the second category."


@pytest.mark.parametrize("text,dims,expected", GOLDEN)
def test_parse_golden(text, dims, expected):
    assert parse_category(text, dims) == expected


def test_golden_corpus_size():
    assert len(GOLDEN) == 50


def test_parse_batch_lines():
    text = "1: belongs to the second category\n2: unsure\n3: the third category\n9: first category"
    assert parse_batch(text, 3) == [2, None, 3]
    assert parse_batch("", 2) == [None, None]


def test_batch_question_round_trip_through_find_vectors():
    vs = generate_dataset(6, seed=2)
    q = batch_question(vs)
    assert find_vectors(q) == [v.components for v in vs]


def test_majority_vote():
    assert majority_vote([2, 2, 3]) == 2
    assert majority_vote([1, 2, 3]) == 1
    assert majority_vote([3, 1, 2]) == 3
    assert majority_vote([None, 2, 3]) == 2
    assert majority_vote([None, None]) is None
    assert majority_vote([3, 1, 1, 3]) == 3


@given(st.lists(st.one_of(st.none(), st.integers(1, 4)), min_size=1, max_size=7))
def test_majority_is_a_cast_vote(votes):
    out = majority_vote(votes)
    cast = [v for v in votes if v is not None]
    if not cast:
        assert out is None
    else:
        assert out in cast
        assert cast.count(out) == max(cast.count(v) for v in cast)


def test_accuracy():
    assert accuracy([1, 2, None], [1, 3, 2]) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        accuracy([1], [1, 2])


def test_task_matcher_strings():
    t = DmcTask()
    assert t.matcher("it is the second category") == "2"
    assert t.matcher("no idea") is None
    assert t.sample(DigitalVector((1, 2, 4), 3)).answer == "3"


def test_parse_never_returns_out_of_range():
    words = ["first", "second", "third", "fourth", "fifth"]
    for dims, (a, b) in itertools.product([2, 3, 4], itertools.product(words, words)):
        got = parse_category(f"maybe the {a} category, or the {b} category", dims)
        assert got is None or 1 <= got <= dims
