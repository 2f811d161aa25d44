#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "metastab/lattice.hpp"

namespace metastab {

/// Fixed polyomino (translation class) in d dimensions.
struct Polyomino {
    int d = 2;
    std::vector<std::vector<int>> cells;  // translated so per-axis minima are 0, sorted

    [[nodiscard]] std::size_t volume() const { return cells.size(); }

    [[nodiscard]] long adjacencies() const {
        long adj = 0;
        for (std::size_t i = 0; i < cells.size(); ++i)
            for (std::size_t j = i + 1; j < cells.size(); ++j) {
                int dist = 0;
                for (int a = 0; a < d; ++a) dist += std::abs(cells[i][static_cast<std::size_t>(a)] - cells[j][static_cast<std::size_t>(a)]);
                adj += dist == 1;
            }
        return adj;
    }
    [[nodiscard]] long perimeter() const { return 2L * d * static_cast<long>(volume()) - 2 * adjacencies(); }

    static Polyomino canonical(int d, std::vector<std::vector<int>> cells) {
        if (!cells.empty()) {
            std::vector<int> lo = cells.front();
            for (const auto& c : cells)
                for (int a = 0; a < d; ++a) lo[static_cast<std::size_t>(a)] = std::min(lo[static_cast<std::size_t>(a)], c[static_cast<std::size_t>(a)]);
            for (auto& c : cells)
                for (int a = 0; a < d; ++a) c[static_cast<std::size_t>(a)] -= lo[static_cast<std::size_t>(a)];
        }
        std::sort(cells.begin(), cells.end());
        return {d, std::move(cells)};
    }
};

inline std::size_t default_polyomino_cap(int d) { return d == 2 ? 12 : d == 3 ? 8 : 6; }

namespace detail {

/// Redelmeier enumeration of fixed polyominoes with the origin as
/// lexicographically minimal cell; tracks the best adjacency count per size.
class PolyominoEnumerator {
public:
    PolyominoEnumerator(int d, int vmax) : d_(d), vmax_(vmax), w_(2 * vmax + 1) {
        std::size_t cells = 1;
        for (int a = 0; a < d; ++a) cells *= static_cast<std::size_t>(w_);
        state_.assign(cells, 0);
        best_.assign(static_cast<std::size_t>(vmax) + 1, -1);
        count_.assign(static_cast<std::size_t>(vmax) + 1, 0);
        for (int a = 0; a < d; ++a) {
            std::size_t s = 1;
            for (int b = 0; b < a; ++b) s *= static_cast<std::size_t>(w_);
            stride_.push_back(static_cast<std::int64_t>(s));
        }
        origin_ = 0;
        for (int a = 0; a < d; ++a) origin_ += static_cast<std::int64_t>(vmax) * stride_[static_cast<std::size_t>(a)];
    }

    void run() {
        std::vector<std::int64_t> untried{origin_};
        state_[static_cast<std::size_t>(origin_)] = reached;
        grow(untried, 0, 0);
    }

    [[nodiscard]] long best_adjacency(int v) const { return best_[static_cast<std::size_t>(v)]; }
    [[nodiscard]] std::uint64_t count(int v) const { return count_[static_cast<std::size_t>(v)]; }

private:
    static constexpr char free_ = 0, reached = 1, placed = 2;

    [[nodiscard]] int coord(std::int64_t idx, int a) const {
        return static_cast<int>((idx / stride_[static_cast<std::size_t>(a)]) % w_) - vmax_;
    }
    /// Cells lexicographically after the origin (first nonzero coordinate, scanning axes from the last, positive).
    [[nodiscard]] bool allowed(std::int64_t idx) const {
        for (int a = d_ - 1; a >= 0; --a) {
            const int c = coord(idx, a);
            if (c != 0) return c > 0;
        }
        return true;
    }
    template <class F>
    void for_each_neighbor(std::int64_t idx, F&& f) const {
        for (int a = 0; a < d_; ++a) {
            const int c = coord(idx, a);
            if (c > -vmax_) f(idx - stride_[static_cast<std::size_t>(a)]);
            if (c < vmax_) f(idx + stride_[static_cast<std::size_t>(a)]);
        }
    }

    void grow(std::vector<std::int64_t> untried, int size, long adj) {
        while (!untried.empty()) {
            const auto c = untried.back();
            untried.pop_back();
            long add = 0;
            for_each_neighbor(c, [&](std::int64_t y) { add += state_[static_cast<std::size_t>(y)] == placed; });
            const int nsize = size + 1;
            const long nadj = adj + add;
            count_[static_cast<std::size_t>(nsize)]++;
            best_[static_cast<std::size_t>(nsize)] = std::max(best_[static_cast<std::size_t>(nsize)], nadj);
            if (nsize < vmax_) {
                state_[static_cast<std::size_t>(c)] = placed;
                std::vector<std::int64_t> fresh;
                for_each_neighbor(c, [&](std::int64_t y) {
                    if (state_[static_cast<std::size_t>(y)] == free_ && allowed(y)) {
                        state_[static_cast<std::size_t>(y)] = reached;
                        fresh.push_back(y);
                    }
                });
                auto next = untried;
                next.insert(next.end(), fresh.begin(), fresh.end());
                grow(std::move(next), nsize, nadj);
                for (auto y : fresh) state_[static_cast<std::size_t>(y)] = free_;
                state_[static_cast<std::size_t>(c)] = reached;
            }
        }
    }

    int d_, vmax_, w_;
    std::vector<std::int64_t> stride_;
    std::int64_t origin_;
    std::vector<char> state_;
    std::vector<long> best_;
    std::vector<std::uint64_t> count_;
};

}  // namespace detail

/// Minimal perimeters for all volumes 1..vmax (index 0 unused, value 0).
inline std::vector<long> min_perimeter_table(int d, int vmax, std::size_t cap = 0) {
    if (d < 1) throw std::invalid_argument("dimension must be >= 1");
    if (cap == 0) cap = default_polyomino_cap(d);
    if (vmax < 1) throw std::invalid_argument("volume must be >= 1");
    if (static_cast<std::size_t>(vmax) > cap)
        throw std::length_error("polyomino enumeration cap exceeded: v=" + std::to_string(vmax) + " > " + std::to_string(cap));
    detail::PolyominoEnumerator e(d, vmax);
    e.run();
    std::vector<long> out(static_cast<std::size_t>(vmax) + 1, 0);
    for (int v = 1; v <= vmax; ++v) out[static_cast<std::size_t>(v)] = 2L * d * v - 2 * e.best_adjacency(v);
    return out;
}

/// Number of fixed polyominoes per volume (enumeration sanity data).
inline std::vector<std::uint64_t> fixed_polyomino_counts(int d, int vmax) {
    detail::PolyominoEnumerator e(d, vmax);
    e.run();
    std::vector<std::uint64_t> out(static_cast<std::size_t>(vmax) + 1, 0);
    for (int v = 1; v <= vmax; ++v) out[static_cast<std::size_t>(v)] = e.count(v);
    return out;
}

inline long min_perimeter(int d, int v, std::size_t cap = 0) { return min_perimeter_table(d, v, cap).back(); }

/// Largest integer r with r^d <= v.
inline long integer_root(long v, int d) {
    long r = static_cast<long>(std::floor(std::pow(static_cast<double>(v), 1.0 / d)));
    auto pw = [d](long x) {
        long p = 1;
        for (int i = 0; i < d; ++i) p *= x;
        return p;
    };
    while (r > 0 && pw(r) > v) --r;
    while (pw(r + 1) <= v) ++r;
    return r;
}

struct IsoperimetricRow {
    int d;
    int v;
    long min_perimeter;
    double simplified_bound;  // 2d v^{(d-1)/d}
    long cube_bound;         // 2d floor(v^{1/d})^{d-1}
    bool simplified_ok;
    bool cube_ok;
    bool equality;            // min_perimeter == simplified bound, decided in integers
};

inline IsoperimetricRow isoperimetric_row(int d, int v, long minper) {
    IsoperimetricRow r{};
    r.d = d;
    r.v = v;
    r.min_perimeter = minper;
    r.simplified_bound = 2.0 * d * std::pow(static_cast<double>(v), static_cast<double>(d - 1) / d);
    long root = integer_root(v, d), nb = 2L * d;
    for (int i = 0; i < d - 1; ++i) nb *= root;
    r.cube_bound = nb;
    // minper^d vs (2d)^d v^(d-1), exact
    __int128 lhs = 1, rhs = 1;
    for (int i = 0; i < d; ++i) {
        lhs *= minper;
        rhs *= 2 * d;
    }
    for (int i = 0; i < d - 1; ++i) rhs *= v;
    r.simplified_ok = lhs >= rhs;
    r.equality = lhs == rhs;
    r.cube_ok = minper >= nb;
    return r;
}

inline std::vector<IsoperimetricRow> isoperimetric_check(int d, int vmax, std::size_t cap = 0) {
    const auto table = min_perimeter_table(d, vmax, cap);
    std::vector<IsoperimetricRow> rows;
    for (int v = 1; v <= vmax; ++v) rows.push_back(isoperimetric_row(d, v, table[static_cast<std::size_t>(v)]));
    return rows;
}

/// Compacts every column along `axis` towards coordinate 0.
inline Configuration gravity_fall(const Configuration& s, int axis) {
    const BoxGeometry g(s.dims());
    if (axis < 0 || axis >= g.d()) throw std::invalid_argument("gravity axis out of range");
    Configuration out(g);
    const int L = g.side(axis);
    const auto st = g.stride(axis);
    for (Site x = 0; x < g.sites(); ++x) {
        if (g.coord(x, axis) != 0) continue;
        int k = 0;
        for (int t = 0; t < L; ++t) k += s.plus(static_cast<Site>(x + static_cast<std::uint64_t>(t) * st));
        for (int t = 0; t < k; ++t) out.set(static_cast<Site>(x + static_cast<std::uint64_t>(t) * st), true);
    }
    return out;
}

struct Projection {
    LatticeContext context;   // (d-1)-dimensional box with the same n+- condition
    Configuration config;
    EnergyValue energy;       // in the lower box
    EnergyValue source_energy;
};

/// Gravity fall along axis n, then the layers laid side by side along axis 0
/// in a (d-1)-dimensional box with n+- boundary.
inline Projection project_to_lower_dim(const LatticeContext& ctx, const Configuration& s) {
    const auto& g = ctx.geometry();
    const int d = g.d();
    const auto& bc = ctx.boundary();
    if (bc.kind != BoundaryCondition::Kind::NPlusMinus || !bc.overrides.empty())
        throw std::invalid_argument("projection needs a plain n+- context");
    const int n = bc.n;
    if (d < 2 || n < 1 || n >= d) throw std::invalid_argument("projection needs 1 <= n < d");
    int smallest = g.side(0);
    for (int a = 1; a < d; ++a) smallest = std::min(smallest, g.side(a));
    if (static_cast<int>(s.volume()) >= smallest)
        throw std::invalid_argument("projection needs |sigma| < smallest side");

    const Configuration fallen = gravity_fall(s, n);
    std::vector<int> lower_axes;
    for (int a = 0; a < d; ++a)
        if (a != n) lower_axes.push_back(a);
    // Layers by height along axis n.
    std::vector<std::vector<std::vector<int>>> layers(static_cast<std::size_t>(g.side(n)));
    for (Site x : fallen.plus_sites()) {
        auto c = g.coords(x);
        std::vector<int> lc;
        for (int a : lower_axes) lc.push_back(c[static_cast<std::size_t>(a)]);
        layers[static_cast<std::size_t>(c[static_cast<std::size_t>(n)])].push_back(lc);
    }
    std::vector<int> dims;
    for (int a : lower_axes) dims.push_back(g.side(a));
    int offset = 0;
    std::vector<std::vector<int>> placed;
    for (auto& layer : layers) {
        if (layer.empty()) continue;
        int lo = layer.front()[0], hi = layer.front()[0];
        for (auto& c : layer) {
            lo = std::min(lo, c[0]);
            hi = std::max(hi, c[0]);
        }
        for (auto c : layer) {
            c[0] = c[0] - lo + offset;
            placed.push_back(c);
        }
        offset += hi - lo + 2;
    }
    dims[0] = std::max(dims[0], offset);
    BoxGeometry lg(dims);
    LatticeContext lctx(lg, BoundaryCondition::n_plus_minus(n), ctx.field());
    Configuration out(lg);
    for (auto& c : placed) out.set(lg.index(c), true);
    Projection p{lctx, out, lctx.hamiltonian(out), ctx.hamiltonian(s)};
    return p;
}

}  // namespace metastab
