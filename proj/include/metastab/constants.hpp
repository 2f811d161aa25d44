#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "metastab/isoperimetry.hpp"
#include "metastab/lattice.hpp"
#include "metastab/reference_path.hpp"

namespace metastab {

struct DimensionConstants {
    int n = 0;
    int box_side = 0;
    std::int64_t l_c = 0;
    std::int64_t m = 0;
    EnergyValue gamma;
    double gamma_value = 0.0;
    double kappa = 0.0;
    double L = 0.0;
    bool argmax_tie = false;    // rational fields: another volume reaches the same value
    bool cube_ok = true;       // sandwich bounds on gamma
    bool control_ok = true;     // (Gamma_{n-1})^n <= (m_{n-1})^{n-1}
    double control_lhs = 0.0;
    double control_rhs = 0.0;
    std::optional<bool> oracle_match;  // path maximum vs polyomino oracle (small volumes)
};

struct CriticalConstants {
    int d = 0;
    MagneticField h = MagneticField::sqrt_over(2, 2);
    std::vector<DimensionConstants> by_dim;  // index n = 0..d

    [[nodiscard]] const DimensionConstants& at(int n) const { return by_dim.at(static_cast<std::size_t>(n)); }
    [[nodiscard]] std::int64_t l_c() const { return at(d).l_c; }
};

inline std::int64_t critical_length(int d, const MagneticField& h) { return h.floor_ratio(2L * (d - 1)); }

/// Side of the cubic box used to evaluate Gamma_n: at least l_c + 3 and strictly above 2n/h.
inline int constants_box_side(int n, const MagneticField& h) {
    return static_cast<int>(std::max<std::int64_t>(critical_length(n, h) + 3, h.floor_ratio(2L * n) + 1));
}

namespace detail {

inline std::int64_t ipow(std::int64_t b, int e) {
    std::int64_t r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

/// Maximum of min-perimeter(k) - h k over k <= vmax, as an exact pair.
inline EnergyValue oracle_max(int n, int vmax, const MagneticField& h) {
    const auto table = min_perimeter_table(n, vmax);
    EnergyValue best = EnergyValue::zero();
    for (int k = 1; k <= vmax; ++k) {
        const EnergyValue e{table[static_cast<std::size_t>(k)], k};
        if (h.less(best, e)) best = e;
    }
    return best;
}

}  // namespace detail

inline DimensionConstants dimension_constants(int n, const MagneticField& h, bool oracle_check) {
    DimensionConstants c;
    c.n = n;
    c.l_c = critical_length(n, h);
    c.box_side = constants_box_side(n, h);
    const LatticeContext ctx(BoxGeometry::cube(n, c.box_side), BoundaryCondition::all_minus(), h);
    const auto path = reference_path(ctx);
    const auto am = path.argmax(h);
    c.m = static_cast<std::int64_t>(am.index);
    c.gamma = am.energy;
    c.gamma_value = h.value_of(am.energy);
    c.argmax_tie = am.tie;
    const std::int64_t l = c.l_c;
    const EnergyValue lower{2L * n * detail::ipow(l, n - 1), detail::ipow(l + 1, n)};
    const EnergyValue upper{2L * n * detail::ipow(l + 1, n - 1), detail::ipow(l, n)};
    c.cube_ok = h.less_equal(lower, c.gamma) && h.less_equal(c.gamma, upper);
    if (oracle_check && n <= 2) {
        const int cap = static_cast<int>(default_polyomino_cap(n));
        if (c.m <= cap) {
            const auto restricted = path.argmax(h, 0, static_cast<std::size_t>(cap));
            c.oracle_match = h.equal(detail::oracle_max(n, cap, h), restricted.energy);
        }
    }
    return c;
}

inline CriticalConstants critical_constants(int d, const MagneticField& h, bool oracle_check = true) {
    if (d < 1) throw std::invalid_argument("dimension must be >= 1");
    CriticalConstants cc;
    cc.d = d;
    cc.h = h;
    cc.by_dim.emplace_back();  // n = 0: all zero
    double gamma_sum = 0.0;
    for (int n = 1; n <= d; ++n) {
        auto c = dimension_constants(n, h, oracle_check);
        gamma_sum += c.gamma_value;
        c.kappa = gamma_sum / (n + 1);
        c.L = (c.gamma_value - c.kappa) / n;
        const auto& prev = cc.by_dim.back();
        c.control_lhs = std::pow(prev.gamma_value, n);
        c.control_rhs = std::pow(static_cast<double>(prev.m), n - 1);
        c.control_ok = c.control_lhs <= c.control_rhs;
        cc.by_dim.push_back(c);
    }
    return cc;
}

struct ContinuityScan {
    std::vector<double> h;
    std::vector<double> gamma;
    double max_jump = 0.0;
};

inline ContinuityScan gamma_continuity_scan(int d, const std::vector<double>& grid) {
    ContinuityScan s;
    for (double hv : grid) {
        if (!(hv > 0 && hv < 1)) throw std::invalid_argument("field grid must lie in (0,1)");
        const auto h = MagneticField::from_double(hv);
        s.h.push_back(hv);
        s.gamma.push_back(dimension_constants(d, h, false).gamma_value);
    }
    for (std::size_t i = 1; i < s.gamma.size(); ++i) s.max_jump = std::max(s.max_jump, std::abs(s.gamma[i] - s.gamma[i - 1]));
    return s;
}

}  // namespace metastab
