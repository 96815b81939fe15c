import json
import random

import pytest

from chitab.complexity import FilterConfig, HeaderCell, qualifying_spanners, sorted_columns
from chitab.geometry import BBox
from chitab.hierarchy import build_forest, find_parent, sort_reading_order
from chitab.synth import random_table
from oracles import brute_force_parents


def cell(x0, y0, x1, y1, text=""):
    return HeaderCell(BBox(x0, y0, x1, y1), text, ())


def grid(n, w=10.0):
    return [BBox(k * w, 0, (k + 1) * w, 100) for k in range(n)]


def test_sort_reading_order_examples(rng):
    a, b = cell(0, 0, 5, 1, "A"), cell(0, 1, 5, 2, "B")
    assert [c.text for c in sort_reading_order([b, a])] == ["A", "B"]
    l, r = cell(0, 0, 5, 1, "L"), cell(6, 0, 9, 1, "R")
    assert [c.text for c in sort_reading_order([r, l])] == ["L", "R"]
    for _ in range(30):
        cells = [cell(x, row * 10 + rng.uniform(-0.3, 0.3), x + 8, row * 10 + 6 + rng.uniform(-0.3, 0.3), f"{row}{x}")
                 for row, x in [(0, 0), (0, 20), (1, 0), (1, 40), (2, 10)]]
        rng.shuffle(cells)
        oracle = sorted(cells, key=lambda c: (round(c.box.y_min / 10), c.box.x_min))
        assert sort_reading_order(cells) == oracle


def test_find_parent_examples():
    child = cell(2, 2, 6, 3)
    cand = cell(0, 0, 8, 1.9)
    assert find_parent(child, [cand], 0.5) == cand
    assert brute_force_parents([cand, child], 0.5) == {0: None, 1: 0}
    far = cell(0, 0, 8, 1.4)  # gap 0.6 >= half the child height
    assert find_parent(child, [far], 0.5) is None
    assert brute_force_parents([far, child], 0.5)[1] is None
    same = cell(2, 0, 6, 1.9)
    assert find_parent(child, [same], 0.5) is None


def test_find_parent_prefers_nearest_then_narrowest():
    child = cell(2, 4, 6, 6)
    high = cell(0, 0, 8, 3.5)
    low = cell(0, 2, 10, 3.8)
    narrow = cell(1, 2, 7, 3.8)
    assert find_parent(child, [high, low], 0.5) == low
    assert find_parent(child, [high, low, narrow], 0.5) == narrow


def test_overlapping_stack_counts_as_zero_gap():
    parent, child = cell(0, 0, 8, 1.2), cell(2, 1.0, 6, 2.0)
    assert find_parent(child, [parent], 0.5) == parent


def _topology(forest):
    return {n.text: (forest.nodes[n.parent].text if n.parent is not None else None) for n in forest.nodes}


def test_one_parent_two_children():
    cells = [cell(0, 0, 40, 10, "P"), cell(0, 10, 20, 20, "A"), cell(20, 10, 40, 20, "B")]
    f = build_forest(cells, grid(4))
    assert f.roots == [0]
    assert [f.nodes[c].text for c in f.nodes[0].children] == ["A", "B"]
    assert [n.value_columns for n in f.nodes] == [(0, 1, 2, 3), (0, 1), (2, 3)]
    assert brute_force_parents(sort_reading_order(cells), 0.5) == {0: None, 1: 0, 2: 0}


def test_unrelated_spanners_are_two_roots():
    f = build_forest([cell(0, 0, 20, 10, "A"), cell(20, 0, 40, 10, "B")], grid(4))
    assert len(f.roots) == 2 and f.edges() == []


def test_chain_of_three():
    cells = [cell(0, 20, 20, 30, "C"), cell(0, 0, 60, 10, "A"), cell(0, 10, 40, 20, "B")]
    f = build_forest(cells, grid(6))
    assert _topology(f) == {"A": None, "B": "A", "C": "B"}
    assert max(f.depth(i) for i in range(3)) == 3


def test_forest_json_shape():
    f = build_forest([cell(0, 0, 40, 10, "P"), cell(0, 10, 20, 20, "A")], grid(4))
    d = json.loads(json.dumps(f.to_dict("tab")))
    assert d["table_id"] == "tab"
    assert d["nodes"][1] == {"id": 1, "text": "A", "bbox": [0.0, 10.0, 20.0, 20.0], "parent_id": 0,
                             "children": [], "value_columns": [0, 1]}


def test_forest_matches_brute_force_and_is_permutation_invariant():
    r = random.Random(5)
    for k in range(200):
        t = random_table(r, f"t{k}").table
        cells = qualifying_spanners(t)
        columns = sorted_columns(t)
        f = build_forest(cells, columns)
        oracle = brute_force_parents(cells, 0.5)
        assert {i: n.parent for i, n in enumerate(f.nodes)} == oracle
        shuffled = cells[:]
        r.shuffle(shuffled)
        g = build_forest(shuffled, columns)
        assert g.to_dict("x") == f.to_dict("x")
        assert f.warnings == []


def test_translation_and_scaling_keep_topology():
    r = random.Random(8)
    for k in range(100):
        t = random_table(r, f"t{k}").table
        cells = qualifying_spanners(t)
        columns = sorted_columns(t)
        base = build_forest(cells, columns)
        s, dx, dy = r.uniform(0.3, 4), r.uniform(-100, 100), r.uniform(-100, 100)
        moved = [HeaderCell(c.box.scaled(s).translated(dx, dy), c.text, c.covered_columns) for c in cells]
        mcols = [b.scaled(s).translated(dx, dy) for b in columns]
        other = build_forest(moved, mcols, FilterConfig(containment_eps=0.5 * s))
        assert _topology(other) == _topology(base)


def test_sibling_overlap_is_warned_not_fatal():
    cells = [cell(0, 0, 40, 10, "P"), cell(0, 10, 30, 20, "A"), cell(15, 10, 40, 20.5, "B")]
    f = build_forest(cells, grid(4))
    assert _topology(f) == {"P": None, "A": "P", "B": "P"}
    assert any("share columns" in w for w in f.warnings)
