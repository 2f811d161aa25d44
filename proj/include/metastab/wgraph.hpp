#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "metastab/landscape.hpp"

namespace metastab {

/// Continuous-time rate matrix: nonnegative off-diagonal entries, zero row sums.
struct RateMatrix {
    std::vector<std::vector<double>> rates;

    RateMatrix() = default;
    explicit RateMatrix(std::vector<std::vector<double>> r) : rates(std::move(r)) { normalize(); }

    [[nodiscard]] std::size_t size() const { return rates.size(); }
    [[nodiscard]] double operator()(std::size_t x, std::size_t y) const { return rates[x][y]; }

    /// Sets the diagonal to minus the off-diagonal row sum and validates.
    void normalize() {
        const auto n = rates.size();
        for (std::size_t x = 0; x < n; ++x) {
            if (rates[x].size() != n) throw std::invalid_argument("rate matrix must be square");
            double s = 0.0;
            for (std::size_t y = 0; y < n; ++y) {
                if (x == y) continue;
                if (!(rates[x][y] >= 0.0) || !std::isfinite(rates[x][y])) throw std::invalid_argument("off-diagonal rates must be finite and >= 0");
                s += rates[x][y];
            }
            rates[x][x] = -s;
        }
    }

    [[nodiscard]] bool irreducible() const {
        const auto n = rates.size();
        for (std::size_t src = 0; src < n; ++src) {
            std::vector<char> seen(n, 0);
            std::vector<std::size_t> stack{src};
            seen[src] = 1;
            std::size_t count = 1;
            while (!stack.empty()) {
                auto x = stack.back();
                stack.pop_back();
                for (std::size_t y = 0; y < n; ++y)
                    if (y != x && rates[x][y] > 0 && !seen[y]) {
                        seen[y] = 1;
                        ++count;
                        stack.push_back(y);
                    }
            }
            if (count != n) return false;
        }
        return true;
    }

    /// Dense CSV, one row per line.
    static RateMatrix from_csv(const std::string& text) {
        std::vector<std::vector<double>> r;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            std::vector<double> row;
            std::istringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
            r.push_back(std::move(row));
        }
        return RateMatrix(std::move(r));
    }

    /// Metropolis rates exp(-beta (H(y)-H(x))^+) on landscape edges.
    static RateMatrix metropolis(const LandscapeGraph& G, double beta) {
        const auto n = G.size();
        std::vector<std::vector<double>> r(n, std::vector<double>(n, 0.0));
        for (StateId x = 0; x < n; ++x)
            G.for_each_neighbor(x, [&](StateId y) {
                r[x][y] = std::exp(-beta * G.field().value_of(G.field().positive_part(G.energy(y) - G.energy(x))));
            });
        return RateMatrix(std::move(r));
    }
};

/// arrow[x] = target of the arrow leaving x, or -1.
struct WGraph {
    std::vector<int> arrow;

    /// End of the arrow chain from x (x itself when no arrow leaves it).
    [[nodiscard]] int endpoint(int x) const {
        while (arrow[static_cast<std::size_t>(x)] >= 0) x = arrow[static_cast<std::size_t>(x)];
        return x;
    }
    bool operator==(const WGraph&) const = default;
    bool operator<(const WGraph& o) const { return arrow < o.arrow; }
};

enum class WGraphVariant { Plain, ToTarget, Avoid };

inline constexpr std::size_t kWGraphStateLimit = 10;

namespace detail {

inline void check_wgraph_size(std::size_t n) {
    if (n > kWGraphStateLimit)
        throw std::length_error("W-graph enumeration limited to " + std::to_string(kWGraphStateLimit) + " states, got " + std::to_string(n));
}

/// Depth-first over states in order; an arrow x->t is rejected when the
/// chain from t already returns to x.
template <class F>
void for_each_wgraph_raw(const std::vector<std::vector<int>>& out, const std::vector<char>& inW, F&& visit) {
    const auto n = out.size();
    WGraph g{std::vector<int>(n, -1)};
    std::vector<int> free;
    for (std::size_t x = 0; x < n; ++x)
        if (!inW[x]) free.push_back(static_cast<int>(x));
    auto rec = [&](auto&& self, std::size_t k) -> void {
        if (k == free.size()) {
            visit(static_cast<const WGraph&>(g));
            return;
        }
        const int x = free[k];
        for (int t : out[static_cast<std::size_t>(x)]) {
            int w = t;
            while (w != x && g.arrow[static_cast<std::size_t>(w)] >= 0) w = g.arrow[static_cast<std::size_t>(w)];
            if (w == x) continue;
            g.arrow[static_cast<std::size_t>(x)] = t;
            self(self, k + 1);
            g.arrow[static_cast<std::size_t>(x)] = -1;
        }
    };
    rec(rec, 0);
}

}  // namespace detail

/// Streams the graphs of G(W), G_{x,y}(W) or G(x -/-> W) over the directed
/// adjacency `out` (out[x] lists the y with c(x,y) > 0).
template <class F>
void for_each_wgraph(const std::vector<std::vector<int>>& out, const std::vector<char>& inW, WGraphVariant variant,
                     int x, int y, F&& visit) {
    const auto n = out.size();
    detail::check_wgraph_size(n);
    if (inW.size() != n) throw std::invalid_argument("W membership size mismatch");
    if (std::none_of(inW.begin(), inW.end(), [](char c) { return c != 0; })) throw std::invalid_argument("W must be non-empty");
    switch (variant) {
        case WGraphVariant::Plain:
            detail::for_each_wgraph_raw(out, inW, visit);
            return;
        case WGraphVariant::ToTarget:
            if (!inW[static_cast<std::size_t>(y)]) throw std::invalid_argument("target must lie in W");
            if (inW[static_cast<std::size_t>(x)]) {
                if (x == y) detail::for_each_wgraph_raw(out, inW, visit);
                return;
            }
            detail::for_each_wgraph_raw(out, inW, [&](const WGraph& g) {
                if (g.endpoint(x) == y) visit(g);
            });
            return;
        case WGraphVariant::Avoid: {
            if (inW[static_cast<std::size_t>(x)]) return;
            auto W2 = inW;
            for (std::size_t z = 0; z < n; ++z) {
                if (inW[z]) continue;
                W2[z] = 1;
                detail::for_each_wgraph_raw(out, W2, [&](const WGraph& g) {
                    if (g.endpoint(x) == static_cast<int>(z)) visit(g);
                });
                W2[z] = 0;
            }
            return;
        }
    }
}

inline std::vector<WGraph> enumerate_wgraphs(const std::vector<std::vector<int>>& out, const std::vector<char>& inW,
                                             WGraphVariant variant = WGraphVariant::Plain, int x = 0, int y = 0) {
    std::vector<WGraph> gs;
    for_each_wgraph(out, inW, variant, x, y, [&](const WGraph& g) { gs.push_back(g); });
    return gs;
}

inline std::vector<std::vector<int>> adjacency_of(const RateMatrix& R) {
    std::vector<std::vector<int>> out(R.size());
    for (std::size_t x = 0; x < R.size(); ++x)
        for (std::size_t y = 0; y < R.size(); ++y)
            if (x != y && R(x, y) > 0) out[x].push_back(static_cast<int>(y));
    return out;
}

inline std::vector<std::vector<int>> adjacency_of(const LandscapeGraph& G) {
    std::vector<std::vector<int>> out(G.size());
    for (StateId x = 0; x < G.size(); ++x) G.for_each_neighbor(x, [&](StateId y) { out[x].push_back(static_cast<int>(y)); });
    return out;
}

namespace detail {

/// log-sum-exp accumulator.
struct LogSum {
    double m = -INFINITY;
    double s = 0.0;
    void add(double v) {
        if (v == -INFINITY) return;
        if (v > m) {
            s = s * std::exp(m - v) + 1.0;
            m = v;
        } else {
            s += std::exp(v - m);
        }
    }
    [[nodiscard]] double value() const { return s == 0.0 ? -INFINITY : m + std::log(s); }
};

inline double log_weight(const RateMatrix& R, const WGraph& g) {
    double v = 0.0;
    for (std::size_t x = 0; x < g.arrow.size(); ++x)
        if (g.arrow[x] >= 0) v += std::log(R(x, static_cast<std::size_t>(g.arrow[x])));
    return v;
}

inline std::vector<char> membership(std::size_t n, const std::vector<int>& W) {
    std::vector<char> in(n, 0);
    for (int w : W) {
        if (w < 0 || static_cast<std::size_t>(w) >= n) throw std::out_of_range("state outside the rate matrix");
        in[static_cast<std::size_t>(w)] = 1;
    }
    return in;
}

}  // namespace detail

/// Law of the first state of W visited from x, by graph sums.
inline std::vector<double> exit_point_law(const RateMatrix& R, const std::vector<int>& W, int x) {
    const auto n = R.size();
    detail::check_wgraph_size(n);
    const auto inW = detail::membership(n, W);
    std::vector<double> p(n, 0.0);
    if (inW.at(static_cast<std::size_t>(x))) {
        p[static_cast<std::size_t>(x)] = 1.0;
        return p;
    }
    const auto out = adjacency_of(R);
    detail::LogSum den;
    std::vector<detail::LogSum> num(n);
    for_each_wgraph(out, inW, WGraphVariant::Plain, 0, 0, [&](const WGraph& g) {
        const double lw = detail::log_weight(R, g);
        den.add(lw);
        num[static_cast<std::size_t>(g.endpoint(x))].add(lw);
    });
    if (den.value() == -INFINITY) throw std::domain_error("no W-graph: W unreachable");
    for (std::size_t y = 0; y < n; ++y)
        if (inW[y]) p[y] = std::exp(num[y].value() - den.value());
    return p;
}

/// Expected time to reach W from x, by graph sums.
inline double expected_exit_time(const RateMatrix& R, const std::vector<int>& W, int x) {
    const auto n = R.size();
    detail::check_wgraph_size(n);
    const auto inW = detail::membership(n, W);
    if (inW.at(static_cast<std::size_t>(x))) return 0.0;
    const auto out = adjacency_of(R);
    detail::LogSum den, num;
    for_each_wgraph(out, inW, WGraphVariant::Plain, 0, 0, [&](const WGraph& g) { den.add(detail::log_weight(R, g)); });
    for_each_wgraph(out, inW, WGraphVariant::Avoid, x, 0, [&](const WGraph& g) { num.add(detail::log_weight(R, g)); });
    if (den.value() == -INFINITY) throw std::domain_error("no W-graph: W unreachable");
    return std::exp(num.value() - den.value());
}

struct ExitLaw {
    std::vector<double> distribution;
    double expected_time = 0.0;
};

/// Harmonic equations solved directly: (I - P) m = P_W and -Q t = 1 on the complement of W.
inline ExitLaw exit_oracle_linear(const RateMatrix& R, const std::vector<int>& W, int x) {
    const auto n = R.size();
    const auto inW = detail::membership(n, W);
    ExitLaw law{std::vector<double>(n, 0.0), 0.0};
    if (inW.at(static_cast<std::size_t>(x))) {
        law.distribution[static_cast<std::size_t>(x)] = 1.0;
        return law;
    }
    std::vector<int> idx(n, -1), comp;
    for (std::size_t z = 0; z < n; ++z)
        if (!inW[z]) {
            idx[z] = static_cast<int>(comp.size());
            comp.push_back(static_cast<int>(z));
        }
    const auto k = static_cast<Eigen::Index>(comp.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k, k);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(k, static_cast<Eigen::Index>(n));
    Eigen::VectorXd rhs = Eigen::VectorXd::Ones(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto z = static_cast<std::size_t>(comp[static_cast<std::size_t>(i)]);
        A(i, i) = -R(z, z);
        for (std::size_t y = 0; y < n; ++y) {
            if (y == z) continue;
            if (inW[y]) B(i, static_cast<Eigen::Index>(y)) = R(z, y);
            else A(i, idx[y]) = -R(z, y);
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw std::domain_error("singular exit system: W not reachable from every state");
    const Eigen::MatrixXd M = lu.solve(B);
    const Eigen::VectorXd t = lu.solve(rhs);
    const auto row = idx[static_cast<std::size_t>(x)];
    for (std::size_t y = 0; y < n; ++y)
        if (inW[y]) law.distribution[y] = M(row, static_cast<Eigen::Index>(y));
    law.expected_time = t(row);
    return law;
}

// ---------------------------------------------------------------------------
// Exit-cost identities on small landscapes.

/// V(g) = sum over arrows of (H(target) - H(source))^+, exact.
inline EnergyValue arrow_cost(const LandscapeGraph& G, const WGraph& g) {
    EnergyValue v = EnergyValue::zero();
    for (std::size_t x = 0; x < g.arrow.size(); ++x)
        if (g.arrow[x] >= 0)
            v = v + G.field().positive_part(G.energy(static_cast<StateId>(g.arrow[x])) - G.energy(static_cast<StateId>(x)));
    return v;
}

struct ExitCostReport {
    bool precondition_ok = true;
    bool holds = true;
    std::size_t checked = 0;
    std::vector<std::string> failures;
};

/// Checks, for a compound A with complement W, that
///   min V over G_{x,y}(W) - min V over G(W) = (H(y) - E(A, W))^+   for x in A, y on the boundary,
///   min V over G(W) - min V over G(x -/-> W) = E(A, W) - H(bottom A)  for x in A.
/// The second difference is taken in the orientation that gives the exit-time
/// asymptotics E[tau] ~ exp(beta * depth) when c(g) = exp(-beta V(g)).
inline ExitCostReport exitcost_identity_check(const LandscapeGraph& G, const StateSet& A) {
    ExitCostReport rep;
    const auto n = G.size();
    detail::check_wgraph_size(n);
    const auto& h = G.field();
    if (A.empty() || A.size() == n || !is_compound(G, A)) {
        rep.precondition_ok = false;
        rep.holds = false;
        rep.failures.push_back("set is not a proper cycle compound");
        return rep;
    }
    const auto inA = G.membership(A);
    std::vector<char> inW(n);
    for (std::size_t i = 0; i < n; ++i) inW[i] = !inA[i];
    const auto out = adjacency_of(G);
    const EnergyValue none = EnergyValue::pos_inf();
    auto keep_min = [&](EnergyValue& m, const EnergyValue& v) {
        if (h.less(v, m)) m = v;
    };

    EnergyValue base = none;
    std::vector<std::vector<EnergyValue>> to(n, std::vector<EnergyValue>(n, none));  // [x][endpoint]
    for_each_wgraph(out, inW, WGraphVariant::Plain, 0, 0, [&](const WGraph& g) {
        const auto v = arrow_cost(G, g);
        keep_min(base, v);
        for (StateId x : A) keep_min(to[x][static_cast<std::size_t>(g.endpoint(static_cast<int>(x)))], v);
    });
    const auto exit = exit_energy(G, A, &inA);
    const auto depth = exit - G.energy(bottom_of(G, A).front());

    std::vector<char> boundary(n, 0);
    for (StateId x : A) G.for_each_neighbor(x, [&](StateId y) { boundary[y] = !inA[y]; });
    auto fail = [&](const std::string& s) {
        rep.holds = false;
        if (rep.failures.size() < 32) rep.failures.push_back(s);
    };
    for (StateId x : A) {
        for (StateId y = 0; y < n; ++y) {
            if (!boundary[y]) continue;
            ++rep.checked;
            const auto lhs = to[x][y] - base;
            const auto rhs = h.positive_part(G.energy(y) - exit);
            if (!h.equal(lhs, rhs))
                fail("exit point x=" + std::to_string(x) + " y=" + std::to_string(y) + ": " + lhs.str() + " vs " + rhs.str());
        }
        EnergyValue avoid = none;
        for_each_wgraph(out, inW, WGraphVariant::Avoid, static_cast<int>(x), 0,
                        [&](const WGraph& g) { keep_min(avoid, arrow_cost(G, g)); });
        ++rep.checked;
        if (!h.equal(base - avoid, depth))
            fail("exit time x=" + std::to_string(x) + ": " + (base - avoid).str() + " vs " + depth.str());
    }
    return rep;
}

}  // namespace metastab
