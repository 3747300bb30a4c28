import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beurling_lab.geometry import (PHI_MULTIPLICITY_C2, WHITNEY_GAP, WHITNEY_R, Disk, GeometryError,
                                   GraphDomain, HalfPlane, LipschitzGraph, LipschitzPolygon,
                                   SampledFunction, build_whitney, dist_to_boundary, dyadic_tree,
                                   phi_assign, phi_multiplicity, square_polygon)


def tent(delta):
    return lambda x: delta * np.maximum(0.0, 1.0 - np.abs(x))


@pytest.fixture(scope="module")
def tent_graph():
    return GraphDomain(LipschitzGraph.from_callable(tent(0.05), 1.0, 1 / 64, pad=3.0))


def test_graph_invariants():
    g = LipschitzGraph.from_callable(tent(0.1), 1.0, 1 / 32, pad=1.0)
    assert g.measured_slope == pytest.approx(0.1)
    assert g(5.0) == 0.0
    with pytest.raises(GeometryError):
        LipschitzGraph.from_callable(tent(0.1), 1.0, 1 / 32, slope_bound=0.05)
    with pytest.raises(GeometryError):
        SampledFunction(0.0, 0.1, np.array([1.0]))


def test_polygon_validation():
    with pytest.raises(GeometryError):
        LipschitzPolygon(np.array([0, 1, 1, 0j]))
    with pytest.raises(GeometryError):
        LipschitzPolygon(np.array([0, 1, 2 + 0j]))
    bowtie = np.array([0, 1 + 1j, 1, 1j])
    with pytest.raises(GeometryError):
        LipschitzPolygon(bowtie)
    cw = LipschitzPolygon(np.array([0, 1j, 1 + 1j, 1]))
    assert cw.area > 0
    assert cw.chord_arc >= 1


def test_dist_examples():
    assert dist_to_boundary(HalfPlane(0j, 1 + 0j), 3 + 2j) == pytest.approx(2.0)
    assert dist_to_boundary(Disk(0j, 1.0), 0.25) == pytest.approx(0.75)


def test_graph_dist_dense_oracle():
    step = 1 / 128
    dom = GraphDomain(LipschitzGraph.from_callable(tent(0.1), 1.0, step, pad=2.0))
    x = np.linspace(-3, 3, 10 ** 6)
    brute = np.min(np.abs(1j - (x + 1j * tent(0.1)(x))))
    assert abs(float(dist_to_boundary(dom, 1j)) - brute) <= 0.1 * step


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(0.05, 3), st.floats(-3, 3), st.floats(0.05, 3))
def test_dist_is_one_lipschitz(x1, y1, x2, y2):
    dom = GraphDomain(LipschitzGraph.from_callable(tent(0.2), 1.0, 1 / 32, pad=2.0))
    z1, z2 = complex(x1, y1), complex(x2, y2)
    d1, d2 = dist_to_boundary(dom, z1), dist_to_boundary(dom, z2)
    assert abs(d1 - d2) <= abs(z1 - z2) + 1e-12


def test_dyadic_segment():
    t = dyadic_tree((0.0, 1.0), 2)
    got = [(n.start, n.end) for n in t.nodes()]
    assert got == [(0, 1), (0, .5), (.5, 1), (0, .25), (.25, .5), (.5, .75), (.75, 1)]


def test_dyadic_circle_polygon():
    poly = Disk(0j, 1.0).polygon(256)
    t = dyadic_tree(poly, 3)
    arcs = t.level_nodes(3)
    assert len(arcs) == 8
    for a in arcs:
        assert 2 * math.pi / 16 <= t.arc_h1(a) <= 2 * math.pi / 4


def test_dyadic_graph_arc_lengths():
    delta = 0.1
    dom = GraphDomain(LipschitzGraph.from_callable(tent(delta), 1.0, 1 / 64, pad=1.0))
    t = dyadic_tree(dom, 5)
    for j in (2, 4, 5):
        for n in t.level_nodes(j):
            h1 = t.arc_h1(n)
            assert n.length * (1 - 1e-12) <= h1 <= n.length * math.sqrt(1 + delta ** 2) * (1 + 1e-12)


def test_dyadic_nesting():
    t = dyadic_tree((0.0, 1.0), 5)
    nodes = list(t.nodes())
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b = rng.choice(len(nodes), 2)
        p, q = nodes[a], nodes[b]
        overlap = min(p.end, q.end) - max(p.start, q.start)
        assert overlap <= 0 or p.contains(q) or q.contains(p)


def test_dyadic_rejects_bad_depth():
    with pytest.raises(GeometryError):
        dyadic_tree((0.0, 1.0), -1)


def _check_whitney(dom, wd):
    c, s, _ = wd.arrays()
    d = dist_to_boundary(dom, c)
    # distance from the square (not its centre) to the boundary
    dq = d - s / math.sqrt(2)
    assert np.all(dq >= WHITNEY_GAP * s * (1 - 1e-9))
    uncapped = np.array([not q.capped for q in wd.cubes])
    assert np.all(d[uncapped] <= (WHITNEY_R + 1) * math.sqrt(2) * s[uncapped])
    assert np.all(dom.square_inside(c.real, c.imag, 2.5 * s))


def test_whitney_half_plane():
    dom = HalfPlane(0j, 1 + 0j)
    wd = build_whitney(dom, (-1, 1, -1, 1), 0, 6)
    _check_whitney(dom, wd)
    for q in wd.cubes:
        dist_q = q.corner.imag
        assert q.side <= dist_q <= (WHITNEY_R + 1) * q.side * math.sqrt(2)


def test_whitney_disk_area():
    dom = Disk(0j, 1.0)
    wd = build_whitney(dom, (-2, 2, -2, 2), 0, 7)
    _check_whitney(dom, wd)
    _, s, _ = wd.arrays()
    assert np.sum(s ** 2) + wd.collar_area >= math.pi - 1e-9
    assert np.sum(s ** 2) <= math.pi


def test_whitney_disjoint_and_neighbours(tent_graph):
    wd = build_whitney(tent_graph, (-4, 4, -0.5, 4), 0, 8)
    _check_whitney(tent_graph, wd)
    c, s, _ = wd.arrays()
    # disjointness: compare lattice squares at a common fine level
    cells = set()
    top = max(q.level for q in wd.cubes)
    for q in wd.cubes:
        k = 1 << (top - q.level)
        for a in range(k):
            for b in range(k):
                key = (q.ix * k + a, q.iy * k + b)
                assert key not in cells
                cells.add(key)
    # neighbours touching 5Q have comparable sides
    for i in range(len(s)):
        near = (np.abs(c.real - c.real[i]) < 2.5 * s[i] + 0.5 * s) & (np.abs(c.imag - c.imag[i]) < 2.5 * s[i] + 0.5 * s)
        assert np.all(s[near] <= 2 * s[i]) and np.all(s[near] >= 0.5 * s[i])


def _brute_whitney_counts(A, box, levels, root_side):
    """Maximal admissible lattice squares found by exhaustive search with
    dense sampling of the graph."""
    xmin, xmax, ymin, ymax = box
    counts = {}

    def admissible(cx, cy, half):
        xs = cx[:, None] + half * np.linspace(-1, 1, 513)[None, :]
        return cy - half > np.max(A(xs), axis=1)

    for j in levels:
        side = root_side * 2.0 ** -j
        ix = np.arange(math.floor(xmin / side), math.ceil(xmax / side))
        iy = np.arange(math.floor(ymin / side), math.ceil(ymax / side))
        IX, IY = [a.ravel() for a in np.meshgrid(ix, iy, indexing="ij")]
        cx, cy = (IX + 0.5) * side, (IY + 0.5) * side
        ok = admissible(cx, cy, (WHITNEY_GAP + 0.5) * side)
        if j > levels[0]:
            px = (np.floor_divide(IX, 2) + 0.5) * 2 * side
            py = (np.floor_divide(IY, 2) + 0.5) * 2 * side
            ok &= ~admissible(px, py, (WHITNEY_GAP + 0.5) * 2 * side)
        counts[j] = int(np.count_nonzero(ok))
    return counts


def test_whitney_matches_brute_force(tent_graph):
    box = (-4, 4, -0.5, 4)
    wd = build_whitney(tent_graph, box, 0, 7)
    brute = _brute_whitney_counts(tent_graph.graph, box, list(range(0, 8)), wd.root_side)
    got = wd.counts_by_level()
    assert {j: got.get(j, 0) for j in brute} == brute
    # boundary-hugging growth: counts roughly double per level at fine scales
    assert 1.5 <= got[7] / got[6] <= 2.5


def test_whitney_errors():
    with pytest.raises(GeometryError):
        build_whitney(Disk(0j, 1.0), (5, 6, 5, 6), 0, 3)
    with pytest.raises(GeometryError):
        build_whitney(Disk(0j, 1.0), (0, 0, 0, 1), 0, 3)
    with pytest.raises(GeometryError):
        build_whitney(Disk(0j, 1.0), (-2, 2, -2, 2), 4, 3)


def test_phi_graph_vertical_projection(tent_graph):
    tree = dyadic_tree(tent_graph, 8)
    wd = build_whitney(tent_graph, (-4, 4, -0.5, 4), 0, 7)
    for q in wd.cubes:
        n = phi_assign(q, tree)
        assert n.start == pytest.approx(q.base[0])
        assert n.end == pytest.approx(q.base[1])


def test_phi_graph_worked_example():
    dom = GraphDomain(LipschitzGraph.from_callable(tent(0.05), 1.0, 1 / 64, pad=3.0))
    tree = dyadic_tree(dom, 6)
    from beurling_lab.geometry import WhitneyCube
    q = WhitneyCube(3, 0, 2, 1.0, complex(0, 2))
    n = phi_assign(q, tree)
    assert (n.start, n.end) == (0.0, 1.0)


def test_phi_half_plane():
    dom = HalfPlane(0j, 1 + 0j)
    tree = dyadic_tree((-1.0, 1.0), 8)
    wd = build_whitney(dom, (-1, 1, -1, 1), 0, 6)
    for q in wd.cubes:
        n = phi_assign(q, tree, dom)
        assert (n.start, n.end) == pytest.approx(q.base)


def test_phi_multiplicity_square_polygon():
    sq = square_polygon(2.0, per_edge=16)
    wd = build_whitney(sq, (-1, 1, -1, 1), 0, 7)
    tree = dyadic_tree(sq, 12)
    m = phi_multiplicity(wd.cubes, tree)
    assert 1 <= m <= PHI_MULTIPLICITY_C2
