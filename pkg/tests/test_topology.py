import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topocollapse.errors import ConfigurationError
from topocollapse.qstate import Polarization
from topocollapse.topology import (
    CLOSED,
    OPEN,
    ConnectivityClass,
    RegionGraph,
    block_of,
    classify,
    flip_reachable,
    polarized_only,
    strong_partition,
    weak_partition,
)

H, V = Polarization.H, Polarization.V
C = ConnectivityClass

FIG1A = RegionGraph(("box1", "box2"), (("box1", "box2", OPEN),))
FIG1B = RegionGraph(("box1", "box2"), (("box1", "box2", CLOSED),))
# two cavities separated by a gap; V passes into the gap, H passes out of it
FIG2 = RegionGraph(
    ("cav1", "gap", "cav2"),
    (("cav1", "gap", polarized_only(V)), ("gap", "cav2", polarized_only(H))),
    rotators=frozenset({"cav1", "gap", "cav2"}),
)
FIG5_DT = RegionGraph(
    ("src", "xarm", "y1", "ybox", "y2", "out"),
    (
        ("src", "xarm", OPEN),
        ("xarm", "out", OPEN),
        ("src", "y1", OPEN),
        ("y1", "ybox", polarized_only(V)),
        ("ybox", "y2", polarized_only(V)),
        ("y2", "out", OPEN),
    ),
    rotators=frozenset({"ybox"}),
)


# --------------------------------------------------------------------------
# brute-force oracles: enumerate simple paths and flip assignments


def _simple_paths(graph, a, b):
    adjacency = {r: [] for r in graph.regions}
    for x, y, cond in graph.passages:
        adjacency[x].append((y, cond))
        adjacency[y].append((x, cond))

    def walk(node, seen, edges):
        if node == b:
            yield list(edges)
            return
        for nxt, cond in adjacency[node]:
            if nxt not in seen:
                yield from walk(nxt, seen | {nxt}, edges + [(node, nxt, cond)])

    if a == b:
        yield []
        return
    yield from walk(a, {a}, [])


def _path_ok(edges, pol, rotators, flips):
    """``flips[i]`` says whether to flip before edge i (allowed at rotator regions only)."""
    for (src, _, cond), flip in zip(edges, flips):
        if flip:
            if src not in rotators:
                return False
            pol = pol.flipped
        if not cond.admits(pol):
            return False
    return True


def brute_classify(graph, a, b, pol):
    paths = list(_simple_paths(graph, a, b))
    if any(_path_ok(p, pol, frozenset(), [False] * len(p)) for p in paths):
        return C.CONNECTED
    if not any(all(c.kind != "closed" for _, _, c in p) for p in paths):
        return C.STRONGLY_DISCONNECTED
    return C.WEAKLY_DISCONNECTED


def brute_flip(graph, a, b, pol):
    # a region may be revisited with the other polarization, so walk (region, pol) states
    for p in _simple_paths(graph, a, b):
        for flips in itertools.product((False, True), repeat=len(p)):
            if _path_ok(p, pol, graph.rotators, flips):
                return True
    return False


@st.composite
def small_graphs(draw):
    n = draw(st.integers(1, 6))
    regions = tuple(f"r{i}" for i in range(n))
    conds = st.sampled_from([OPEN, CLOSED, polarized_only(H), polarized_only(V)])
    pairs = list(itertools.combinations(regions, 2))
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    passages = tuple((a, b, draw(conds)) for a, b in chosen)
    rotators = frozenset(draw(st.lists(st.sampled_from(regions), unique=True)))
    return RegionGraph(regions, passages, rotators)


class TestClassify:
    def test_fig1_connected(self):
        assert classify(FIG1A, "box1", "box2", V) is C.CONNECTED

    def test_fig1_strong(self):
        assert classify(FIG1B, "box1", "box2", V) is C.STRONGLY_DISCONNECTED

    def test_fig2_weak(self):
        assert classify(FIG2, "cav1", "cav2", V) is C.WEAKLY_DISCONNECTED
        assert flip_reachable(FIG2, "cav1", "cav2", V)

    def test_fig5_interior_exterior(self):
        assert classify(FIG5_DT, "ybox", "xarm", H) is C.WEAKLY_DISCONNECTED
        assert classify(FIG5_DT, "ybox", "xarm", V) is C.CONNECTED

    def test_unknown_region(self):
        with pytest.raises(ConfigurationError):
            classify(FIG1A, "box1", "nowhere", V)

    @settings(max_examples=400, deadline=None)
    @given(small_graphs(), st.data())
    def test_agrees_with_path_enumeration(self, graph, data):
        a = data.draw(st.sampled_from(graph.regions))
        b = data.draw(st.sampled_from(graph.regions))
        pol = data.draw(st.sampled_from([H, V]))
        assert classify(graph, a, b, pol) is brute_classify(graph, a, b, pol)
        assert classify(graph, a, b, pol) is classify(graph, b, a, pol)

    @settings(max_examples=300, deadline=None)
    @given(small_graphs(), st.data())
    def test_flip_reachable_matches_enumeration(self, graph, data):
        a = data.draw(st.sampled_from(graph.regions))
        b = data.draw(st.sampled_from(graph.regions))
        pol = data.draw(st.sampled_from([H, V]))
        if brute_flip(graph, a, b, pol):
            assert flip_reachable(graph, a, b, pol)
        # a flip-reachable pair is never strongly disconnected
        if flip_reachable(graph, a, b, pol):
            assert classify(graph, a, b, pol) is not C.STRONGLY_DISCONNECTED

    @settings(max_examples=300, deadline=None)
    @given(small_graphs(), st.data())
    def test_monotone_under_closing(self, graph, data):
        if not graph.passages:
            return
        k = data.draw(st.integers(0, len(graph.passages) - 1))
        a = data.draw(st.sampled_from(graph.regions))
        b = data.draw(st.sampled_from(graph.regions))
        pol = data.draw(st.sampled_from([H, V]))
        closed = graph.with_passage(k, CLOSED)
        opened = graph.with_passage(k, OPEN)
        assert classify(closed, a, b, pol) >= classify(graph, a, b, pol) >= classify(opened, a, b, pol)


class TestPartitions:
    def test_fig1b_strong(self):
        assert strong_partition(FIG1B) == (frozenset({"box1"}), frozenset({"box2"}))

    def test_open_bench_single_block(self):
        assert strong_partition(FIG5_DT) == (frozenset(FIG5_DT.regions),)
        g = RegionGraph(("a", "b", "c"), (("a", "b", OPEN), ("b", "c", OPEN)))
        assert weak_partition(g, H) == (frozenset("abc"),)

    def test_chain_with_closed_middle(self):
        g = RegionGraph(
            ("r1", "r2", "r3", "r4"), (("r1", "r2", OPEN), ("r2", "r3", CLOSED), ("r3", "r4", OPEN))
        )
        assert strong_partition(g) == (frozenset({"r1", "r2"}), frozenset({"r3", "r4"}))

    def test_fig5_box_alone_for_h(self):
        blocks = weak_partition(FIG5_DT, H)
        assert frozenset({"ybox"}) in blocks
        assert len(blocks) == 2

    def test_fig2_v_partition(self):
        assert weak_partition(FIG2, V) == (frozenset({"cav1", "gap"}), frozenset({"cav2"}))

    def test_block_of_missing_region(self):
        with pytest.raises(ConfigurationError):
            block_of(strong_partition(FIG1B), "box3")

    @settings(max_examples=300, deadline=None)
    @given(small_graphs(), st.sampled_from([H, V]))
    def test_strong_blocks_are_unions_of_weak_blocks(self, graph, pol):
        strong = strong_partition(graph)
        for block in weak_partition(graph, pol):
            assert any(block <= s for s in strong)

    @settings(max_examples=300, deadline=None)
    @given(small_graphs(), st.data())
    def test_classify_matches_partitions(self, graph, data):
        a = data.draw(st.sampled_from(graph.regions))
        b = data.draw(st.sampled_from(graph.regions))
        pol = data.draw(st.sampled_from([H, V]))
        weak, strong = weak_partition(graph, pol), strong_partition(graph)
        cls = classify(graph, a, b, pol)
        assert (cls is C.CONNECTED) == (block_of(weak, a) == block_of(weak, b))
        assert (cls is C.STRONGLY_DISCONNECTED) == (block_of(strong, a) != block_of(strong, b))

    def test_blocks_sorted_by_smallest_member(self):
        g = RegionGraph(("z", "a", "m"), ())
        assert strong_partition(g) == (frozenset("a"), frozenset("m"), frozenset("z"))
