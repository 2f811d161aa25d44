#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "metastab/field.hpp"
#include "metastab/lattice.hpp"
#include "metastab/union_find.hpp"

namespace metastab {

using StateId = std::uint32_t;
using StateSet = std::vector<StateId>;

/// Finite state space with exact energies and a symmetric adjacency.
///
/// Two flavours: the full single-flip landscape of a box (state id = bit
/// pattern, adjacency implicit) and an explicit graph (induced sub-landscapes,
/// hand-built fixtures).
class LandscapeGraph {
public:
    static constexpr std::size_t default_cap = 24;

    static LandscapeGraph enumerate(const LatticeContext& ctx, std::size_t cap = default_cap) {
        const std::size_t n = ctx.sites();
        if (n > cap || n > 31)
            throw std::length_error("landscape enumeration cap exceeded: " + std::to_string(n) + " sites > " +
                                    std::to_string(std::min<std::size_t>(cap, 31)));
        LandscapeGraph g(ctx.field());
        g.implicit_ = true;
        g.nbits_ = static_cast<int>(n);
        g.ctx_ = &ctx;
        const std::uint64_t count = 1ull << n;
        g.bonds_.resize(count);
        // Gray-code walk: one flip per step.
        std::uint64_t mask = 0;
        std::int64_t bonds = 0;
        g.bonds_[0] = 0;
        for (std::uint64_t i = 1; i < count; ++i) {
            const auto x = static_cast<Site>(std::countr_zero(i));
            bonds += ctx.delta_of_mask(mask, x).bonds;
            mask ^= 1ull << x;
            g.bonds_[mask] = static_cast<std::int32_t>(bonds);
        }
        return g;
    }

    /// Explicit graph from energies and an undirected edge list.
    static LandscapeGraph from_edges(const MagneticField& h, std::vector<EnergyValue> energies,
                                     const std::vector<std::pair<StateId, StateId>>& edges,
                                     std::vector<std::uint64_t> patterns = {}) {
        LandscapeGraph g(h);
        g.implicit_ = false;
        const std::size_t n = energies.size();
        g.adj_.assign(n, {});
        for (auto [a, b] : edges) {
            if (a >= n || b >= n || a == b) throw std::invalid_argument("bad landscape edge");
            g.adj_[a].push_back(b);
            g.adj_[b].push_back(a);
        }
        for (auto& l : g.adj_) {
            std::sort(l.begin(), l.end());
            l.erase(std::unique(l.begin(), l.end()), l.end());
        }
        g.bonds_.resize(n);
        g.pluses_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!energies[i].finite()) throw std::invalid_argument("state energies must be finite");
            g.bonds_[i] = static_cast<std::int32_t>(energies[i].bonds);
            g.pluses_[i] = static_cast<std::int32_t>(energies[i].pluses);
        }
        if (patterns.empty()) {
            patterns.resize(n);
            std::iota(patterns.begin(), patterns.end(), 0ull);
        }
        if (patterns.size() != n) throw std::invalid_argument("pattern count mismatch");
        g.patterns_ = std::move(patterns);
        return g;
    }

    /// Sub-landscape induced on `subset` (ids renumbered in the given order).
    [[nodiscard]] LandscapeGraph induced(const StateSet& subset) const {
        std::vector<std::int64_t> local(size(), -1);
        for (std::size_t i = 0; i < subset.size(); ++i) local[subset[i]] = static_cast<std::int64_t>(i);
        std::vector<EnergyValue> e;
        std::vector<std::uint64_t> pat;
        std::vector<std::pair<StateId, StateId>> edges;
        for (std::size_t i = 0; i < subset.size(); ++i) {
            e.push_back(energy(subset[i]));
            pat.push_back(pattern(subset[i]));
            for_each_neighbor(subset[i], [&](StateId w) {
                if (local[w] > static_cast<std::int64_t>(i)) edges.emplace_back(static_cast<StateId>(i), static_cast<StateId>(local[w]));
            });
        }
        return from_edges(h_, std::move(e), edges, std::move(pat));
    }

    [[nodiscard]] std::size_t size() const { return bonds_.size(); }
    [[nodiscard]] const MagneticField& field() const { return h_; }
    [[nodiscard]] bool implicit() const { return implicit_; }
    [[nodiscard]] int bits() const { return nbits_; }
    /// Context used for enumeration (null for explicit graphs).
    [[nodiscard]] const LatticeContext* context() const { return ctx_; }

    [[nodiscard]] EnergyValue energy(StateId s) const {
        if (implicit_) return {bonds_[s], std::popcount(static_cast<std::uint64_t>(s))};
        return {bonds_[s], pluses_[s]};
    }
    [[nodiscard]] std::uint64_t pattern(StateId s) const { return implicit_ ? s : patterns_[s]; }

    template <class F>
    void for_each_neighbor(StateId s, F&& f) const {
        if (implicit_) {
            for (int x = 0; x < nbits_; ++x) f(static_cast<StateId>(s ^ (1u << x)));
        } else {
            for (StateId w : adj_[s]) f(w);
        }
    }
    [[nodiscard]] std::size_t degree(StateId s) const { return implicit_ ? static_cast<std::size_t>(nbits_) : adj_[s].size(); }
    [[nodiscard]] std::size_t max_degree() const {
        if (implicit_) return static_cast<std::size_t>(nbits_);
        std::size_t m = 0;
        for (const auto& l : adj_) m = std::max(m, l.size());
        return m;
    }
    [[nodiscard]] bool adjacent(StateId a, StateId b) const {
        if (implicit_) return std::has_single_bit(static_cast<std::uint32_t>(a ^ b));
        return std::binary_search(adj_[a].begin(), adj_[a].end(), b);
    }

    [[nodiscard]] bool less(StateId a, StateId b) const { return h_.less(energy(a), energy(b)); }

    /// State ids sorted by energy value (ties by id), cached.
    [[nodiscard]] const std::vector<StateId>& order() const {
        if (order_.size() != size()) {
            order_.resize(size());
            std::iota(order_.begin(), order_.end(), 0u);
            std::stable_sort(order_.begin(), order_.end(), [this](StateId a, StateId b) { return less(a, b); });
        }
        return order_;
    }

    /// All states as a set.
    [[nodiscard]] StateSet all() const {
        StateSet s(size());
        std::iota(s.begin(), s.end(), 0u);
        return s;
    }
    [[nodiscard]] std::vector<char> membership(const StateSet& s) const {
        std::vector<char> m(size(), 0);
        for (StateId x : s) {
            if (x >= size()) throw std::out_of_range("state id outside landscape");
            m[x] = 1;
        }
        return m;
    }

    /// Distinct value groups with differing pairs (rational fields only).
    [[nodiscard]] std::vector<std::pair<StateId, StateId>> tie_pairs(std::size_t limit = 64) const {
        std::vector<std::pair<StateId, StateId>> out;
        const auto& ord = order();
        for (std::size_t i = 1; i < ord.size() && out.size() < limit; ++i)
            if (h_.tie(energy(ord[i - 1]), energy(ord[i]))) out.emplace_back(ord[i - 1], ord[i]);
        return out;
    }

private:
    explicit LandscapeGraph(const MagneticField& h) : h_(h) {}

    MagneticField h_;
    bool implicit_ = true;
    int nbits_ = 0;
    const LatticeContext* ctx_ = nullptr;
    std::vector<std::int32_t> bonds_;
    std::vector<std::int32_t> pluses_;
    std::vector<std::uint64_t> patterns_;
    std::vector<std::vector<StateId>> adj_;
    mutable std::vector<StateId> order_;
};

inline LandscapeGraph enumerate_landscape(const LatticeContext& ctx, std::size_t cap = LandscapeGraph::default_cap) {
    return LandscapeGraph::enumerate(ctx, cap);
}

// ---------------------------------------------------------------------------
// Set-level quantities
// ---------------------------------------------------------------------------

/// Minimax energy over paths joining A and B.
inline EnergyValue communication_energy(const LandscapeGraph& G, const StateSet& A, const StateSet& B) {
    if (A.empty() || B.empty()) throw std::invalid_argument("communication energy needs non-empty sets");
    const auto inA = G.membership(A);
    const auto inB = G.membership(B);
    UnionFind uf(G.size());
    std::vector<char> hasA(inA.begin(), inA.end()), hasB(inB.begin(), inB.end()), active(G.size(), 0);
    for (StateId s : G.order()) {
        active[s] = 1;
        std::uint32_t r = uf.find(s);
        G.for_each_neighbor(s, [&](StateId w) {
            if (!active[w]) return;
            const auto rw = uf.find(w);
            if (rw == r) return;
            const char a = hasA[r] | hasA[rw], b = hasB[r] | hasB[rw];
            r = uf.unite(r, rw);
            hasA[r] = a;
            hasB[r] = b;
        });
        if (hasA[r] && hasB[r]) return G.energy(s);
    }
    throw std::logic_error("sets do not communicate (landscape not connected)");
}

/// E(A, X \ A): min over boundary edges of the larger endpoint energy, +inf without boundary.
inline EnergyValue exit_energy(const LandscapeGraph& G, const StateSet& A, const std::vector<char>* inA_cache = nullptr) {
    std::vector<char> local;
    if (!inA_cache) local = G.membership(A);
    const auto& inA = inA_cache ? *inA_cache : local;
    const auto& h = G.field();
    EnergyValue best = EnergyValue::pos_inf();
    for (StateId u : A)
        G.for_each_neighbor(u, [&](StateId w) {
            if (inA[w]) return;
            const EnergyValue m = h.max(G.energy(u), G.energy(w));
            if (h.less(m, best)) best = m;
        });
    return best;
}

inline bool is_connected(const LandscapeGraph& G, const StateSet& A) {
    if (A.empty()) return false;
    auto inA = G.membership(A);
    std::vector<StateId> stack{A.front()};
    inA[A.front()] = 2;
    std::size_t seen = 1;
    while (!stack.empty()) {
        StateId u = stack.back();
        stack.pop_back();
        G.for_each_neighbor(u, [&](StateId w) {
            if (inA[w] == 1) {
                inA[w] = 2;
                ++seen;
                stack.push_back(w);
            }
        });
    }
    return seen == A.size();
}

/// Max energy for connected sets with >= 2 states, -inf for singletons.
inline EnergyValue height_of(const LandscapeGraph& G, const StateSet& A) {
    if (A.size() == 1) return EnergyValue::neg_inf();
    EnergyValue m = G.energy(A.front());
    for (StateId s : A)
        if (G.field().less(m, G.energy(s))) m = G.energy(s);
    return m;
}

/// Energy minimizers of A (value ties under rational fields are all kept).
inline StateSet bottom_of(const LandscapeGraph& G, const StateSet& A) {
    if (A.empty()) throw std::invalid_argument("bottom of an empty set");
    EnergyValue m = G.energy(A.front());
    for (StateId s : A)
        if (G.field().less(G.energy(s), m)) m = G.energy(s);
    StateSet out;
    for (StateId s : A)
        if (G.field().equal(G.energy(s), m)) out.push_back(s);
    std::sort(out.begin(), out.end());
    return out;
}

inline bool is_cycle(const LandscapeGraph& G, const StateSet& A) {
    if (A.size() == 1) return true;
    return is_connected(G, A) && G.field().less(height_of(G, A), exit_energy(G, A));
}
inline bool is_compound(const LandscapeGraph& G, const StateSet& A) {
    if (A.size() == 1) return true;
    return is_connected(G, A) && G.field().less_equal(height_of(G, A), exit_energy(G, A));
}

// ---------------------------------------------------------------------------
// Partitions into maximal cycles / compounds
// ---------------------------------------------------------------------------

struct Block {
    StateSet states;
    EnergyValue height;
    EnergyValue exit;
    StateSet bottom;
    EnergyValue bottom_energy;
    EnergyValue depth;
    bool verified = false;  // connected and satisfies the defining inequality
};

struct CyclePartition {
    enum class Kind { Cycles, Compounds };
    Kind kind = Kind::Cycles;
    std::vector<Block> blocks;
    std::vector<std::int32_t> block_of;  // -1 outside Y
    std::vector<std::string> ties;       // tie certificates (rational fields)

    [[nodiscard]] const Block& block_containing(StateId s) const {
        if (s >= block_of.size() || block_of[s] < 0) throw std::out_of_range("state outside partitioned set");
        return blocks[static_cast<std::size_t>(block_of[s])];
    }
};

namespace detail {

inline Block summarize_block(const LandscapeGraph& G, StateSet states, const std::vector<char>& inA, bool compound) {
    Block b;
    std::sort(states.begin(), states.end());
    b.states = std::move(states);
    b.height = height_of(G, b.states);
    b.exit = exit_energy(G, b.states, &inA);
    b.bottom = bottom_of(G, b.states);
    b.bottom_energy = G.energy(b.bottom.front());
    b.depth = b.exit.finite() ? b.exit - b.bottom_energy : EnergyValue::pos_inf();
    const bool conn = b.states.size() == 1 || is_connected(G, b.states);
    const auto cmp = G.field().compare(b.height, b.exit);
    b.verified = conn && (compound ? cmp <= 0 : cmp < 0);
    return b;
}

/// Level sweep shared by both partitions.
///
/// Forest nodes are sets that are cycles (closed sublevel components) or, in
/// compound mode, connected unions of strict-sublevel components and states
/// sitting exactly at the sweep level, all contained in Y. Each node contains
/// its children, so the root above a state is the largest such set.
inline CyclePartition sweep_partition(const LandscapeGraph& G, const StateSet& Y, bool compound) {
    const auto& h = G.field();
    const std::size_t n = G.size();
    const auto inY = G.membership(Y);
    const auto& ord = G.order();

    UnionFind uf(n);
    std::vector<char> active(n, 0), clean(n, 0);
    constexpr std::int64_t none = -1;
    std::vector<std::int64_t> node_of_root(n, none);  // valid while the root is clean
    std::vector<std::int64_t> parent;                 // forest over nodes
    std::vector<std::int64_t> leaf_node(n, none);
    std::vector<std::int64_t> slot(n, none);          // per-level scratch index keyed by state or root

    auto new_node = [&]() {
        parent.push_back(none);
        return static_cast<std::int64_t>(parent.size() - 1);
    };

    std::size_t i = 0;
    while (i < ord.size()) {
        std::size_t j = i + 1;
        while (j < ord.size() && h.equal(G.energy(ord[i]), G.energy(ord[j]))) ++j;

        // Pieces: clean strict-sublevel components and level states of Y,
        // glued along adjacency. Roots are read before this level's merges.
        UnionFind tmp;
        std::vector<std::int64_t> tmp_node;  // tmp element -> existing forest node
        std::vector<std::uint32_t> slot_keys;
        auto tmp_for_root = [&](std::uint32_t r) {
            if (slot[r] == none) {
                slot[r] = tmp.add();
                tmp_node.push_back(node_of_root[r]);
                slot_keys.push_back(r);
            }
            return static_cast<std::uint32_t>(slot[r]);
        };
        std::vector<std::int64_t> tmp_of_state(j - i, none);
        for (std::size_t k = i; k < j; ++k) {
            active[ord[k]] = 1;
            clean[ord[k]] = inY[ord[k]];
            if (!inY[ord[k]]) continue;
            tmp_of_state[k - i] = tmp.add();
            tmp_node.push_back(none);
        }
        for (std::size_t k = i; k < j; ++k) {
            if (tmp_of_state[k - i] == none) continue;
            const StateId s = ord[k];
            G.for_each_neighbor(s, [&](StateId w) {
                if (!active[w] || h.equal(G.energy(w), G.energy(s))) return;
                const auto r = uf.find(w);
                if (clean[r] && node_of_root[r] != none)
                    tmp.unite(static_cast<std::uint32_t>(tmp_of_state[k - i]), tmp_for_root(r));
            });
        }
        for (auto r : slot_keys) slot[r] = none;
        for (std::size_t k = i; k < j; ++k) slot[ord[k]] = static_cast<std::int64_t>(k - i);
        for (std::size_t k = i; k < j; ++k) {
            if (tmp_of_state[k - i] == none) continue;
            const StateId s = ord[k];
            G.for_each_neighbor(s, [&](StateId w) {
                if (!active[w] || slot[w] == none) return;
                const auto pw = tmp_of_state[static_cast<std::size_t>(slot[w])];
                if (pw != none) tmp.unite(static_cast<std::uint32_t>(tmp_of_state[k - i]), static_cast<std::uint32_t>(pw));
            });
        }
        for (std::size_t k = i; k < j; ++k) slot[ord[k]] = none;

        // Closed sublevel components {H <= level}.
        for (std::size_t k = i; k < j; ++k) {
            const StateId s = ord[k];
            G.for_each_neighbor(s, [&](StateId w) {
                if (!active[w]) return;
                const auto ra = uf.find(s), rb = uf.find(w);
                if (ra == rb) return;
                const char c = clean[ra] && clean[rb];
                clean[uf.unite(ra, rb)] = c;
            });
        }

        // One node per glued piece component. In cycle mode only those that
        // are whole closed components qualify; the others leave their parts
        // (earlier cycles, singleton leaves) as tops.
        std::vector<std::int64_t> comp_node(tmp.size(), none);
        for (std::size_t k = i; k < j; ++k) {
            if (tmp_of_state[k - i] == none) continue;
            const StateId s = ord[k];
            leaf_node[s] = new_node();
            const auto tr = tmp.find(static_cast<std::uint32_t>(tmp_of_state[k - i]));
            if (!compound && !clean[uf.find(s)]) continue;
            if (comp_node[tr] == none) comp_node[tr] = new_node();
            parent[static_cast<std::size_t>(leaf_node[s])] = comp_node[tr];
        }
        for (std::size_t t = 0; t < tmp_node.size(); ++t) {
            if (tmp_node[t] == none) continue;
            const auto tr = tmp.find(static_cast<std::uint32_t>(t));
            if (comp_node[tr] != none) parent[static_cast<std::size_t>(tmp_node[t])] = comp_node[tr];
        }
        // A clean closed component is exactly one glued piece component.
        for (std::size_t k = i; k < j; ++k) {
            const auto r = uf.find(ord[k]);
            node_of_root[r] = none;
            if (clean[r]) node_of_root[r] = comp_node[tmp.find(static_cast<std::uint32_t>(tmp_of_state[k - i]))];
        }
        i = j;
    }

    // Resolve the topmost node above each state.
    std::vector<std::int64_t> top(parent.size(), none);
    std::vector<std::int64_t> chain;
    for (std::size_t k = 0; k < parent.size(); ++k) {
        auto x = static_cast<std::int64_t>(k);
        while (top[static_cast<std::size_t>(x)] == none && parent[static_cast<std::size_t>(x)] != none) {
            chain.push_back(x);
            x = parent[static_cast<std::size_t>(x)];
        }
        const auto t = top[static_cast<std::size_t>(x)] == none ? x : top[static_cast<std::size_t>(x)];
        top[static_cast<std::size_t>(x)] = t;
        for (auto c : chain) top[static_cast<std::size_t>(c)] = t;
        chain.clear();
    }
    CyclePartition P;
    P.kind = compound ? CyclePartition::Kind::Compounds : CyclePartition::Kind::Cycles;
    P.block_of.assign(n, -1);
    std::vector<std::int64_t> block_of_top(parent.size(), -1);
    std::vector<StateSet> members;
    for (StateId s : Y) {
        const auto t = top[static_cast<std::size_t>(leaf_node[s])];
        if (block_of_top[static_cast<std::size_t>(t)] < 0) {
            block_of_top[static_cast<std::size_t>(t)] = static_cast<std::int64_t>(members.size());
            members.emplace_back();
        }
        const auto b = block_of_top[static_cast<std::size_t>(t)];
        members[static_cast<std::size_t>(b)].push_back(s);
        P.block_of[s] = static_cast<std::int32_t>(b);
    }
    std::vector<char> inA(n, 0);
    for (auto& m : members) {
        for (StateId s : m) inA[s] = 1;
        P.blocks.push_back(summarize_block(G, m, inA, compound));
        for (StateId s : m) inA[s] = 0;
    }
    if (!h.irrational()) {
        for (std::size_t b = 0; b < P.blocks.size(); ++b) {
            const auto& blk = P.blocks[b];
            for (StateId s : blk.bottom)
                if (!(G.energy(s) == blk.bottom_energy))
                    P.ties.push_back("block " + std::to_string(b) + ": bottom tie " + G.energy(s).str() + " ~ " +
                                     blk.bottom_energy.str());
            if (!blk.exit.finite()) continue;
            for (StateId s : blk.states) {
                bool hit = false;
                G.for_each_neighbor(s, [&](StateId w) {
                    if (hit || (P.block_of[w] == static_cast<std::int32_t>(b))) return;
                    const auto m = h.max(G.energy(s), G.energy(w));
                    if (h.tie(m, blk.exit)) {
                        P.ties.push_back("block " + std::to_string(b) + ": exit tie " + m.str() + " ~ " + blk.exit.str());
                        hit = true;
                    }
                });
            }
        }
    }
    return P;
}

}  // namespace detail

inline CyclePartition maximal_cycles(const LandscapeGraph& G, const StateSet& Y) {
    return detail::sweep_partition(G, Y, false);
}

inline CyclePartition maximal_compounds(const LandscapeGraph& G, const StateSet& Y) {
    return detail::sweep_partition(G, Y, true);
}

}  // namespace metastab
