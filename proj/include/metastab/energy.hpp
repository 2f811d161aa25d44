#pragma once

#include <cstdint>
#include <ostream>
#include <string>

namespace metastab {

/// Exact energy H = bonds - h * pluses, kept as the integer pair.
///
/// `bonds` is the interface-bond count relative to the all-minus
/// configuration (so H(all-minus) = (0,0) for every boundary condition),
/// `pluses` the plus-site count. Two sentinels bracket all finite pairs:
/// -inf (height of a singleton) and +inf (exit energy of the whole space).
struct EnergyValue {
    enum class Kind : std::int8_t { NegInf = 0, Finite = 1, PosInf = 2 };

    std::int64_t bonds = 0;
    std::int64_t pluses = 0;
    Kind kind = Kind::Finite;

    static constexpr EnergyValue zero() { return {}; }
    static constexpr EnergyValue neg_inf() { return {0, 0, Kind::NegInf}; }
    static constexpr EnergyValue pos_inf() { return {0, 0, Kind::PosInf}; }

    [[nodiscard]] constexpr bool finite() const { return kind == Kind::Finite; }

    constexpr EnergyValue operator+(const EnergyValue& o) const {
        if (!finite()) return *this;
        if (!o.finite()) return o;
        return {bonds + o.bonds, pluses + o.pluses, Kind::Finite};
    }
    constexpr EnergyValue operator-() const {
        if (kind == Kind::NegInf) return pos_inf();
        if (kind == Kind::PosInf) return neg_inf();
        return {-bonds, -pluses, Kind::Finite};
    }
    constexpr EnergyValue operator-(const EnergyValue& o) const { return *this + (-o); }
    constexpr EnergyValue& operator+=(const EnergyValue& o) { return *this = *this + o; }
    constexpr EnergyValue& operator-=(const EnergyValue& o) { return *this = *this - o; }

    /// Pair identity (not value equality: use MagneticField::equal for that).
    constexpr bool operator==(const EnergyValue&) const = default;

    [[nodiscard]] std::string str() const {
        if (kind == Kind::NegInf) return "-inf";
        if (kind == Kind::PosInf) return "+inf";
        return "(" + std::to_string(bonds) + "," + std::to_string(pluses) + ")";
    }
};

inline std::ostream& operator<<(std::ostream& os, const EnergyValue& e) { return os << e.str(); }

}  // namespace metastab
