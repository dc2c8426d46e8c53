import pytest
from hypothesis import given, strategies as st

from foldlab.symbolic import (
    FOLD,
    HYPERBOLIC,
    LEFT,
    RIGHT,
    Arrow,
    OneSidedSequence,
    SymbolicError,
    TransitionGraph,
    Word,
    concat,
    cylinder_distance,
    validate_word,
    word_cylinder_distance,
)


@pytest.fixture(scope="module")
def loop_graph():
    """Single vertex, two hyperbolic loops and one fold loop."""
    return TransitionGraph(
        ["v"],
        [Arrow("a", "v", "v", HYPERBOLIC), Arrow("b", "v", "v", HYPERBOLIC),
         Arrow("f", "v", "v", FOLD)],
    )


@pytest.fixture(scope="module")
def two_vertex_graph():
    return TransitionGraph(
        ["u", "w"],
        [Arrow("uw", "u", "w", HYPERBOLIC), Arrow("wu", "w", "u", HYPERBOLIC),
         Arrow("ww", "w", "w", HYPERBOLIC)],
    )


def test_graph_rejects_bad_arrows():
    with pytest.raises(SymbolicError):
        TransitionGraph(["v"], [Arrow("a", "v", "x", HYPERBOLIC)])
    with pytest.raises(SymbolicError):
        TransitionGraph(["v"], [Arrow("a", "v", "v", "weird")])
    with pytest.raises(SymbolicError):
        TransitionGraph(["v"], [Arrow("a", "v", "v", HYPERBOLIC),
                                Arrow("a", "v", "v", FOLD)])


def test_graph_json_roundtrip(two_vertex_graph):
    assert TransitionGraph.from_json(two_vertex_graph.to_json()) == two_vertex_graph


def test_positive_entropy(loop_graph, two_vertex_graph):
    assert loop_graph.positive_entropy()  # two parallel loops
    assert two_vertex_graph.positive_entropy()  # ww vs wu·uw at vertex w
    cycle = TransitionGraph(
        ["u", "w"],
        [Arrow("uw", "u", "w", HYPERBOLIC), Arrow("wu", "w", "u", HYPERBOLIC)])
    assert not cycle.positive_entropy()  # a single cycle carries no entropy
    empty = TransitionGraph(["v"], [])
    assert not empty.positive_entropy()


def test_word_admissibility(two_vertex_graph):
    w = Word(two_vertex_graph, ("uw", "ww", "wu"))
    assert w.origin == "u" and w.target == "u"
    with pytest.raises(SymbolicError):
        Word(two_vertex_graph, ("uw", "uw"))
    assert validate_word(w, two_vertex_graph)


def test_concat_endpoint_check(two_vertex_graph):
    a = Word(two_vertex_graph, ("uw",))
    b = Word(two_vertex_graph, ("wu",))
    assert concat(a, b).letters == ("uw", "wu")
    with pytest.raises(SymbolicError):
        concat(a, a)
    empty = Word(two_vertex_graph, ())
    assert concat(empty, a) == a and concat(a, empty) == a


@given(st.lists(st.sampled_from(["a", "b"]), max_size=6),
       st.lists(st.sampled_from(["a", "b"]), max_size=6),
       st.lists(st.sampled_from(["a", "b"]), max_size=6))
def test_concat_associative(x, y, z):
    g = TransitionGraph(
        ["v"], [Arrow("a", "v", "v", HYPERBOLIC), Arrow("b", "v", "v", HYPERBOLIC)])
    wx, wy, wz = (Word(g, tuple(l)) for l in (x, y, z))
    assert concat(concat(wx, wy), wz) == concat(wx, concat(wy, wz))


def test_sequence_right_letters(loop_graph):
    s = OneSidedSequence(loop_graph, RIGHT, ("a",), ("b", "a"))
    assert s.truncate(5).letters == ("a", "b", "a", "b", "a")
    assert s.letter(1) == "a" and s.letter(2) == "b"
    assert s.shift().truncate(4).letters == ("b", "a", "b", "a")


def test_sequence_left_letters(loop_graph):
    s = OneSidedSequence(loop_graph, LEFT, ("a", "b"), ("b",))
    # ... b b b a b: last two letters are the prefix
    assert s.truncate(4).letters == ("b", "b", "a", "b")
    assert s.letter(1) == "b" and s.letter(2) == "a"
    with pytest.raises(SymbolicError):
        s.shift()


def test_cylinder_distance(loop_graph):
    s1 = OneSidedSequence(loop_graph, RIGHT, (), ("a",))
    s2 = OneSidedSequence(loop_graph, RIGHT, ("a", "a", "b"), ("a",))
    d = cylinder_distance(s1, s2, horizon=10)
    assert d.value == 2.0 ** -3 and not d.is_lower_bound
    same = cylinder_distance(s1, s1, horizon=10)
    assert same.is_lower_bound and same.value <= 2.0 ** -10


@given(st.lists(st.sampled_from("ab"), min_size=1, max_size=10),
       st.lists(st.sampled_from("ab"), min_size=1, max_size=10),
       st.lists(st.sampled_from("ab"), min_size=1, max_size=10))
def test_word_cylinder_ultrametric(a, b, c):
    a, b, c = tuple(a), tuple(b), tuple(c)
    dab = word_cylinder_distance(a, b)
    assert dab == word_cylinder_distance(b, a)
    assert (dab == 0.0) == (a == b)
    # strong triangle inequality
    assert dab <= max(word_cylinder_distance(a, c), word_cylinder_distance(c, b))
