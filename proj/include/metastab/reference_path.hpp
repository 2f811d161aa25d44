#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "metastab/lattice.hpp"

namespace metastab {

/// Monotone filling path from all-minus to all-plus, stored as the order in
/// which sites turn plus together with the energy after each step.
struct ReferencePath {
    BoxGeometry geometry;
    std::vector<Site> order;            // order[i] turns plus at step i+1
    std::vector<EnergyValue> energies;  // energies[i] = H(rho_i), i = 0..|box|

    [[nodiscard]] std::size_t length() const { return order.size(); }

    [[nodiscard]] Configuration configuration(std::size_t i) const {
        Configuration c(geometry);
        for (std::size_t k = 0; k < i; ++k) c.set(order[k], true);
        return c;
    }

    /// Smallest index of the maximal energy; `tie` reports another index with an equal value.
    struct Argmax {
        std::size_t index;
        EnergyValue energy;
        bool tie;
    };
    [[nodiscard]] Argmax argmax(const MagneticField& h, std::size_t lo = 0, std::size_t hi = SIZE_MAX) const {
        hi = std::min(hi, energies.size() - 1);
        Argmax a{lo, energies[lo], false};
        for (std::size_t i = lo + 1; i <= hi; ++i) {
            const auto c = h.compare(energies[i], a.energy);
            if (c > 0) a = {i, energies[i], false};
            else if (c == 0) a.tie = true;
        }
        return a;
    }
};

namespace detail {

/// Recursive quasicube filling of the sub-box spanned by `axes` with side
/// lengths `sides`, anchored at global coordinates `base`.
inline void quasicube_fill(const BoxGeometry& g, const std::vector<int>& axes, const std::vector<int>& sides,
                           std::vector<int> base, std::vector<Site>& out) {
    const std::size_t k = axes.size();
    if (k == 1) {
        for (int t = 0; t < sides[0]; ++t) {
            base[static_cast<std::size_t>(axes[0])] += (t == 0 ? 0 : 1);
            out.push_back(g.index(base));
        }
        return;
    }
    std::vector<int> s(k, 1);
    out.push_back(g.index(base));
    for (;;) {
        std::size_t j = k;
        for (std::size_t a = 0; a < k; ++a)
            if (s[a] < sides[a] && (j == k || s[a] < s[j])) j = a;
        if (j == k) break;
        std::vector<int> face_axes, face_sides;
        for (std::size_t a = 0; a < k; ++a)
            if (a != j) {
                face_axes.push_back(axes[a]);
                face_sides.push_back(s[a]);
            }
        auto face_base = base;
        face_base[static_cast<std::size_t>(axes[j])] += s[j];
        quasicube_fill(g, face_axes, face_sides, face_base, out);
        ++s[j];
    }
}

inline std::vector<Site> greedy_order(const LatticeContext& ctx) {
    const auto& g = ctx.geometry();
    const std::size_t n = ctx.sites();
    Configuration c(g);
    std::vector<int> plus_nbrs(n, 0);
    for (Site x = 0; x < n; ++x) plus_nbrs[x] = ctx.exterior_plus(x);
    std::vector<Site> order;
    order.reserve(n);
    auto qualifies = [&](Site x, int m) { return !c.plus(x) && plus_nbrs[x] == m; };
    for (std::size_t step = 0; step < n; ++step) {
        int m = -1, count = 0;
        Site only = 0;
        for (Site x = 0; x < n; ++x) {
            if (c.plus(x)) continue;
            if (plus_nbrs[x] > m) {
                m = plus_nbrs[x];
                count = 1;
                only = x;
            } else if (plus_nbrs[x] == m) {
                ++count;
            }
        }
        Site pick = only;
        if (count > 1) {
            // Longest run of qualifying sites along an axis; ties by (first site, axis).
            int best_len = 0;
            for (Site x = 0; x < n; ++x) {
                if (!qualifies(x, m)) continue;
                for (int a = 0; a < g.d(); ++a) {
                    const int cx = g.coord(x, a);
                    if (cx > 0 && qualifies(static_cast<Site>(x - g.stride(a)), m)) continue;  // not a run start
                    int len = 0;
                    for (int t = cx; t < g.side(a) && qualifies(static_cast<Site>(x + static_cast<std::uint64_t>(t - cx) * g.stride(a)), m); ++t) ++len;
                    if (len > best_len) {
                        best_len = len;
                        pick = x;
                    }
                }
            }
        }
        c.set(pick, true);
        order.push_back(pick);
        for (Site y : ctx.neighbors(pick)) ++plus_nbrs[y];
    }
    return order;
}

}  // namespace detail

/// Quasicube path for minus boundaries (including n+- with n = d), the
/// greedy most-plus-neighbours path otherwise.
inline ReferencePath reference_path(const LatticeContext& ctx) {
    const auto& g = ctx.geometry();
    const auto& bc = ctx.boundary();
    const bool minus_like = bc.overrides.empty() &&
                            (bc.kind == BoundaryCondition::Kind::AllMinus ||
                             (bc.kind == BoundaryCondition::Kind::NPlusMinus && bc.n == g.d()));
    ReferencePath p{g, {}, {}};
    p.order.reserve(g.sites());
    if (minus_like) {
        std::vector<int> axes(static_cast<std::size_t>(g.d()));
        for (int a = 0; a < g.d(); ++a) axes[static_cast<std::size_t>(a)] = a;
        detail::quasicube_fill(g, axes, g.dims(), std::vector<int>(static_cast<std::size_t>(g.d()), 0), p.order);
    } else {
        p.order = detail::greedy_order(ctx);
    }
    Configuration c(g);
    p.energies.reserve(g.sites() + 1);
    EnergyValue e = EnergyValue::zero();
    p.energies.push_back(e);
    for (Site x : p.order) {
        e += ctx.delta_h(c, x);
        c.set(x, true);
        p.energies.push_back(e);
    }
    return p;
}

}  // namespace metastab
