"""Graph isomorphism machinery and the individualization-refinement GNN."""

from ._core import (
    Graph,
    Model,
    canonical_form,
    gen_csl,
    gradient_suite,
    hard_pairs,
    load_model,
    permute_random,
    search_tree_stats,
    triangle_count,
    wl_cells,
    wl_distinguishes,
)

__all__ = [
    "Graph",
    "Model",
    "canonical_form",
    "gen_csl",
    "gradient_suite",
    "hard_pairs",
    "load_model",
    "permute_random",
    "search_tree_stats",
    "triangle_count",
    "wl_cells",
    "wl_distinguishes",
]
