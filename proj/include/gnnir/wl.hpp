#pragma once

#include <string>
#include <vector>

#include "gnnir/graph.hpp"

namespace gnnir {

// How fresh color ids are numbered after each refinement sweep.
//  FirstAppearance: ids follow first appearance under vertex order (the public
//    contract; ids depend on vertex labels).
//  Signature: ids follow the lexicographic order of (old color, sorted
//    neighbor-color multiset). This keeps ids order-consistent with the input
//    coloring and independent of vertex labels, which the canonical-labeling
//    search requires.
enum class ColorOrder { FirstAppearance, Signature };

struct RefineOptions {
    int max_rounds = -1;  // default: n + 1, which refinement can never exceed
    bool keep_history = false;
    ColorOrder order = ColorOrder::FirstAppearance;
};

struct RefinementResult {
    Coloring coloring;
    int rounds = 0;                  // sweeps executed, including the final stable one
    std::vector<Coloring> history;   // coloring after each sweep when requested
};

RefinementResult wl_refine(const Graph& g, const Coloring& init, RefineOptions opts = {});
RefinementResult wl_refine(const Graph& g);  // from the uniform coloring

// True if every pair of same-colored vertices sees identical per-color neighbor counts.
bool is_equitable(const Graph& g, const Coloring& c);

// Canonical, label-independent trace of the refinement from the uniform
// coloring. Two graphs compare equal iff color refinement cannot tell them
// apart. Each round records, per cell in canonical rank order:
// [parent rank, size, (neighbor rank, count)...].
struct WlSignature {
    std::vector<std::vector<std::vector<long long>>> rounds;
    bool operator==(const WlSignature& other) const = default;
    std::string to_string() const;
};

WlSignature wl_signature(const Graph& g);

bool wl_distinguishes(const Graph& a, const Graph& b);

}  // namespace gnnir
