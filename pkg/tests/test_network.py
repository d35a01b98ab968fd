import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from current_lab.errors import ValidationError
from current_lab.network import (
    build_network,
    components,
    cyclomatic_number,
    incidence_parity_check,
    load_network,
    save_network,
)


def test_build_single_edge():
    net = build_network({"vertices": 2, "edges": [[0, 1]], "beta": [1.0]})
    assert net.vertex_count == 2
    assert net.edge_count == 1


def test_build_triangle():
    net = build_network(
        {"vertices": 3, "edges": [[0, 1], [1, 2], [2, 0]], "beta": [0.5, 0.5, 0.5]}
    )
    assert net.edge_count == 3


def test_disconnected_rejected():
    with pytest.raises(ValidationError, match="disconnected"):
        build_network({"vertices": 2, "edges": [], "beta": []})


def test_zero_weight_edge_is_not_connectivity():
    # an edge with beta = 0 does not connect its endpoints
    with pytest.raises(ValidationError, match="disconnected"):
        build_network({"vertices": 2, "edges": [[0, 1]], "beta": [0.0]})


def test_negative_weight_names_edge():
    with pytest.raises(ValidationError, match="edge 1"):
        build_network({"vertices": 2, "edges": [[0, 1], [1, 0]], "beta": [1.0, -0.5]})


def test_vertex_out_of_range():
    with pytest.raises(ValidationError, match="edge 0"):
        build_network({"vertices": 2, "edges": [[0, 5]], "beta": [1.0]})


def test_parallel_edges_and_self_loops_are_first_class():
    net = build_network(
        {"vertices": 2, "edges": [[0, 1], [0, 1], [1, 1]], "beta": [1.0, 2.0, 0.3]}
    )
    assert net.edge_count == 3
    assert list(net.is_self_loop) == [False, False, True]


def test_json_round_trip(tmp_path):
    net = build_network(
        {"vertices": 3, "edges": [[0, 1], [1, 2]], "beta": [0.3, 0.7],
         "pinning": {"vertex": 1, "conductance": 2.0}}
    )
    path = tmp_path / "net.json"
    save_network(net, path)
    again = load_network(path)
    assert again == net


def test_load_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ValidationError, match="invalid JSON"):
        load_network(path)


TRIANGLE = build_network(
    {"vertices": 3, "edges": [[0, 1], [1, 2], [2, 0]], "beta": [1.0, 1.0, 1.0]}
)


@pytest.mark.parametrize(
    "open_edges,expected_k",
    [([1, 1, 1], 1), ([0, 0, 0], 3), ([1, 0, 0], 2)],
)
def test_components_counts(open_edges, expected_k):
    clusters, k = components(TRIANGLE, open_edges)
    assert k == expected_k
    assert sorted(v for c in clusters for v in c) == [0, 1, 2]


def test_components_mismatched_length():
    with pytest.raises(ValidationError):
        components(TRIANGLE, [1, 0])


def _gf2_rank(matrix):
    m = [row.copy() for row in matrix]
    rank, cols = 0, len(m[0]) if m else 0
    for col in range(cols):
        pivot = next((r for r in range(rank, len(m)) if m[r][col]), None)
        if pivot is None:
            continue
        m[rank], m[pivot] = m[pivot], m[rank]
        for r in range(len(m)):
            if r != rank and m[r][col]:
                m[r] = [(a + b) % 2 for a, b in zip(m[r], m[rank])]
        rank += 1
    return rank


def _cycle_space_dim(net, open_edges):
    # independent oracle: o minus the GF(2) rank of the open incidence matrix
    open_idx = [i for i in range(net.edge_count) if open_edges[i]]
    matrix = [
        [int(net.incidence_matrix[v, e]) for e in open_idx]
        for v in range(net.vertex_count)
    ]
    return len(open_idx) - _gf2_rank(matrix)


@pytest.mark.parametrize(
    "edges,open_edges,expected",
    [
        ([(0, 1), (1, 2), (2, 0)], [1, 1, 1], 1),
        ([(0, 1), (1, 2), (2, 0)], [1, 1, 0], 0),
        ([(0, 1), (1, 2), (2, 3), (3, 0)], [1, 1, 1, 1], 1),
    ],
)
def test_cyclomatic_number(edges, open_edges, expected):
    n = max(max(e) for e in edges) + 1
    net = build_network(
        {"vertices": n, "edges": [list(e) for e in edges], "beta": [1.0] * len(edges)}
    )
    assert cyclomatic_number(net, open_edges) == expected
    assert cyclomatic_number(net, open_edges) == _cycle_space_dim(net, open_edges)


def test_cyclomatic_matches_gf2_oracle_on_multigraph():
    net = build_network(
        {"vertices": 3,
         "edges": [[0, 1], [0, 1], [1, 2], [2, 2], [2, 0]],
         "beta": [1.0] * 5}
    )
    for mask in range(2**5):
        open_edges = [(mask >> j) & 1 for j in range(5)]
        assert cyclomatic_number(net, open_edges) == _cycle_space_dim(net, open_edges)


def test_parity_check_single_edge():
    net = build_network({"vertices": 2, "edges": [[0, 1]], "beta": [1.0]})
    assert not incidence_parity_check(net, np.array([1]), mode="current")
    assert incidence_parity_check(net, np.array([2]), mode="current")


def test_parity_check_signed_triangle():
    assert incidence_parity_check(TRIANGLE, np.array([-1, -1, -1]), mode="signed")
    assert not incidence_parity_check(TRIANGLE, np.array([-1, 0, 0]), mode="signed")


def test_parity_self_loop_never_breaks():
    net = build_network({"vertices": 2, "edges": [[0, 1], [1, 1]], "beta": [1.0, 1.0]})
    # odd current on the self-loop is fine (counted twice at its vertex)
    assert incidence_parity_check(net, np.array([0, 3]), mode="current")
    assert incidence_parity_check(net, np.array([2, 1]), mode="current")
    # a negative sign on the self-loop never breaks the signed parity either
    assert incidence_parity_check(net, np.array([0, -1]), mode="signed")


def test_parity_mode_validation():
    with pytest.raises(ValidationError):
        incidence_parity_check(TRIANGLE, np.array([0.5, 0.0, 0.0]), mode="current")
    with pytest.raises(ValidationError):
        incidence_parity_check(TRIANGLE, np.array([2, 0, 0]), mode="signed")
    with pytest.raises(ValidationError):
        incidence_parity_check(TRIANGLE, np.array([0, 0, 0]), mode="nonsense")


@st.composite
def _random_net_and_mask(draw):
    n = draw(st.integers(2, 5))
    tree_edges = [(i, draw(st.integers(0, i - 1))) for i in range(1, n)]
    extra = draw(
        st.lists(
            st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=4
        )
    )
    edges = tree_edges + extra
    mask = draw(st.lists(st.integers(0, 1), min_size=len(edges), max_size=len(edges)))
    return n, edges, mask


@given(_random_net_and_mask(), st.randoms(use_true_random=False))
@settings(max_examples=60, deadline=None)
def test_components_invariant_under_edge_permutation(data, rnd):
    n, edges, mask = data
    net = build_network(
        {"vertices": n, "edges": [list(e) for e in edges], "beta": [1.0] * len(edges)}
    )
    perm = list(range(len(edges)))
    rnd.shuffle(perm)
    permuted = build_network(
        {"vertices": n, "edges": [list(edges[j]) for j in perm],
         "beta": [1.0] * len(edges)}
    )
    clusters, k = components(net, mask)
    clusters_p, k_p = components(permuted, [mask[j] for j in perm])
    assert clusters == clusters_p
    assert k == k_p


@given(
    st.lists(st.integers(0, 4), min_size=3, max_size=3),
    st.integers(0, 2),
)
@settings(max_examples=40, deadline=None)
def test_parity_invariant_under_adding_two(current, which):
    vec = np.array(current, dtype=np.int64)
    bumped = vec.copy()
    bumped[which] += 2
    assert incidence_parity_check(TRIANGLE, vec, mode="current") == incidence_parity_check(
        TRIANGLE, bumped, mode="current"
    )


def test_cyclomatic_opening_an_edge_changes_by_zero_or_one():
    net = TRIANGLE
    for mask in range(8):
        open_edges = [(mask >> j) & 1 for j in range(3)]
        base = cyclomatic_number(net, open_edges)
        for j in range(3):
            if not open_edges[j]:
                more = list(open_edges)
                more[j] = 1
                assert cyclomatic_number(net, more) - base in (0, 1)
