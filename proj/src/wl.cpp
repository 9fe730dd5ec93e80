#include "gnnir/wl.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gnnir {

namespace {

// One sweep: signature(v) = [old color of v, sorted old colors of neighbors].
std::vector<std::vector<int>> sweep_signatures(const Graph& g, const Coloring& c) {
    std::vector<std::vector<int>> sig(g.n());
    for (int v = 0; v < g.n(); v++) {
        auto& s = sig[v];
        s.reserve(g.degree(v) + 1);
        s.push_back(c.color_of(v));
        for (int u : g.neighbors(v)) s.push_back(c.color_of(u));
        std::sort(s.begin() + 1, s.end());
    }
    return sig;
}

Coloring renumber(const std::vector<std::vector<int>>& sig, ColorOrder order) {
    int n = static_cast<int>(sig.size());
    std::vector<int> color(n);
    if (order == ColorOrder::FirstAppearance) {
        std::map<std::vector<int>, int> ids;
        int next = 0;
        for (int v = 0; v < n; v++) {
            auto [it, inserted] = ids.emplace(sig[v], next);
            if (inserted) next++;
            color[v] = it->second;
        }
    } else {
        std::map<std::vector<int>, int> ids;
        for (const auto& s : sig) ids.emplace(s, 0);
        int rank = 0;
        for (auto& [key, id] : ids) id = rank++;
        for (int v = 0; v < n; v++) color[v] = ids[sig[v]];
    }
    return Coloring(std::move(color));
}

}  // namespace

RefinementResult wl_refine(const Graph& g, const Coloring& init, RefineOptions opts) {
    if (init.n() != g.n()) throw std::invalid_argument("coloring size does not match graph");
    int limit = opts.max_rounds >= 0 ? opts.max_rounds : g.n() + 1;
    RefinementResult res;
    res.coloring = init;
    if (g.n() == 0) return res;
    while (true) {
        if (res.rounds >= limit)
            throw std::logic_error("wl_refine exceeded its round limit; refinement must "
                                   "stabilize within n rounds");
        Coloring next = renumber(sweep_signatures(g, res.coloring), opts.order);
        res.rounds++;
        bool stable = next.num_colors() == res.coloring.num_colors();
        res.coloring = std::move(next);
        if (opts.keep_history) res.history.push_back(res.coloring);
        if (stable) break;
    }
    return res;
}

RefinementResult wl_refine(const Graph& g) { return wl_refine(g, Coloring::uniform(g.n())); }

bool is_equitable(const Graph& g, const Coloring& c) {
    if (c.n() != g.n()) throw std::invalid_argument("coloring size does not match graph");
    // Reference neighbor-count vector per cell, compared against every member.
    std::vector<std::vector<int>> ref(c.num_colors());
    std::vector<bool> seen(c.num_colors(), false);
    for (int v = 0; v < g.n(); v++) {
        std::vector<int> counts(c.num_colors(), 0);
        for (int u : g.neighbors(v)) counts[c.color_of(u)]++;
        int cell = c.color_of(v);
        if (!seen[cell]) {
            ref[cell] = std::move(counts);
            seen[cell] = true;
        } else if (ref[cell] != counts) {
            return false;
        }
    }
    return true;
}

WlSignature wl_signature(const Graph& g) {
    WlSignature out;
    if (g.n() == 0) return out;
    out.rounds.push_back({{0, g.n()}});  // uniform start: one cell, parent rank 0
    Coloring cur = Coloring::uniform(g.n());
    int sweeps = 0;
    while (true) {
        auto sig = sweep_signatures(g, cur);
        Coloring next = renumber(sig, ColorOrder::Signature);
        sweeps++;
        if (sweeps > g.n() + 1) throw std::logic_error("wl_signature failed to stabilize");

        // Per new cell: parent rank, size, run-length counts of neighbor ranks.
        auto sizes = next.cell_sizes();
        std::vector<std::vector<long long>> records(next.num_colors());
        std::vector<bool> done(next.num_colors(), false);
        for (int v = 0; v < g.n(); v++) {
            int cell = next.color_of(v);
            if (done[cell]) continue;
            done[cell] = true;
            std::vector<long long> rec;
            rec.push_back(sig[v][0]);  // parent rank in the previous round
            rec.push_back(sizes[cell]);
            for (size_t i = 1; i < sig[v].size();) {
                size_t j = i;
                while (j < sig[v].size() && sig[v][j] == sig[v][i]) j++;
                rec.push_back(sig[v][i]);
                rec.push_back(static_cast<long long>(j - i));
                i = j;
            }
            records[cell] = std::move(rec);
        }
        out.rounds.push_back(std::move(records));
        bool stable = next.num_colors() == cur.num_colors();
        cur = std::move(next);
        if (stable) break;
    }
    return out;
}

std::string WlSignature::to_string() const {
    std::ostringstream os;
    for (size_t r = 0; r < rounds.size(); r++) {
        os << "round " << r << ":";
        for (const auto& rec : rounds[r]) {
            os << " [";
            for (size_t i = 0; i < rec.size(); i++) os << (i ? "," : "") << rec[i];
            os << "]";
        }
        os << "\n";
    }
    return os.str();
}

bool wl_distinguishes(const Graph& a, const Graph& b) { return !(wl_signature(a) == wl_signature(b)); }

}  // namespace gnnir
