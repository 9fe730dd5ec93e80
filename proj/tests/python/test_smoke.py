"""End-to-end smoke of the python bindings: covers every exported symbol."""

import os
import tempfile

import gnnir


def test_graph_basics():
    g = gnnir.Graph(4, [(0, 1), (1, 2), (0, 2)])
    assert g.n == 4
    assert g.degree(0) == 2
    assert g.neighbors(1) == [0, 2]
    assert g.has_edge(0, 2)
    assert not g.has_edge(0, 3)
    assert gnnir.triangle_count(g) == 1
    assert "Graph(n=4" in repr(g)


def test_wl_and_canonical():
    c11 = gnnir.gen_csl(11, 2)
    colors, rounds = gnnir.wl_cells(c11)
    assert len(colors) == 11 and rounds >= 1
    assert len(set(colors)) == 1  # vertex-transitive: one cell

    a, b = gnnir.hard_pairs()[0]
    assert not gnnir.wl_distinguishes(a, b)
    assert gnnir.canonical_form(a) != gnnir.canonical_form(b)
    assert gnnir.canonical_form(a) == gnnir.canonical_form(gnnir.permute_random(a, 3))

    leaves, depth, truncated = gnnir.search_tree_stats(a)
    assert leaves >= 1 and not truncated


def test_gradients():
    rows = gnnir.gradient_suite(0)
    assert len(rows) >= 25
    assert all(ok for _, _, ok in rows)


def test_model_roundtrip():
    a, b = gnnir.hard_pairs()[0]
    model = gnnir.Model(layers=1, k=2, hidden=8, out_dim=2, seed=5)
    assert model.embed_dim == 8 * 3

    emb = model.embed([a, b])
    assert len(emb) == 2 and len(emb[0]) == model.embed_dim
    gap = max(abs(x - y) for x, y in zip(emb[0], emb[1]))
    assert gap > 1e-3  # one individualization round splits the pair

    logits = model.logits([a])
    assert len(logits) == 1 and len(logits[0]) == 2

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "m.bin")
        model.save(path)
        again = gnnir.load_model(path)
        assert again.embed([a, b]) == emb


def main():
    test_graph_basics()
    test_wl_and_canonical()
    test_gradients()
    test_model_roundtrip()
    print("ok")


if __name__ == "__main__":
    main()
