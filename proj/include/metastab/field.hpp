#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>

#include "metastab/energy.hpp"

namespace metastab {

/// Magnetic field h in (0,1).
///
/// Two families are supported:
///  - symbolic irrational tokens h = sqrt(p)/q with p not a perfect square,
///    for which energy comparisons are decided exactly and two energies
///    are equal iff their (bonds, pluses) pairs are equal;
///  - explicit rationals h = num/den ("tie-audit" mode), where distinct
///    pairs may carry the same value and callers must report ties.
class MagneticField {
public:
    enum class Kind { SqrtOverInt, Rational };

    static MagneticField sqrt_over(std::int64_t p, std::int64_t q) {
        if (p <= 0 || q <= 0) throw std::invalid_argument("sqrt(p)/q needs p,q > 0");
        auto r = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(p))));
        for (auto c = r - 1; c <= r + 1; ++c)
            if (c >= 0 && c * c == p)
                throw std::invalid_argument("sqrt(p)/q needs non-square p (got p=" + std::to_string(p) + ")");
        MagneticField f(Kind::SqrtOverInt, p, q);
        f.check_range();
        return f;
    }

    static MagneticField rational(std::int64_t num, std::int64_t den) {
        if (den <= 0 || num <= 0) throw std::invalid_argument("rational field needs num, den > 0");
        auto g = std::gcd(num, den);
        MagneticField f(Kind::Rational, num / g, den / g);
        f.check_range();
        return f;
    }

    /// Parses "sqrt2/2", "sqrt(3)/3", "sqrt2", "1/2", "0.05".
    static MagneticField parse(std::string_view token) {
        std::string t;
        for (char c : token)
            if (c != ' ' && c != '(' && c != ')') t.push_back(c);
        if (t.empty()) throw std::invalid_argument("empty field token");
        try {
            if (t.rfind("sqrt", 0) == 0) {
                auto rest = t.substr(4);
                auto slash = rest.find('/');
                auto p = std::stoll(rest.substr(0, slash));
                std::int64_t q = slash == std::string::npos ? 1 : std::stoll(rest.substr(slash + 1));
                return sqrt_over(p, q);
            }
            if (auto slash = t.find('/'); slash != std::string::npos)
                return rational(std::stoll(t.substr(0, slash)), std::stoll(t.substr(slash + 1)));
            return from_decimal(t);
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("cannot parse field token '" + std::string(token) + "'");
        }
    }

    /// Exact conversion of a decimal literal such as "0.125" to a rational field.
    static MagneticField from_decimal(const std::string& s) {
        auto dot = s.find('.');
        std::string digits = s;
        std::int64_t den = 1;
        if (dot != std::string::npos) {
            digits = s.substr(0, dot) + s.substr(dot + 1);
            for (std::size_t i = dot + 1; i < s.size(); ++i) den *= 10;
        }
        if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
            throw std::invalid_argument("cannot parse field token '" + s + "'");
        return rational(std::stoll(digits), den);
    }

    /// Rational approximation of a double on a fixed decimal grid (1e-9).
    static MagneticField from_double(double h) {
        constexpr std::int64_t den = 1'000'000'000;
        return rational(std::llround(h * static_cast<double>(den)), den);
    }

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] bool irrational() const { return kind_ == Kind::SqrtOverInt; }
    [[nodiscard]] double value() const { return value_; }

    [[nodiscard]] std::string token() const {
        if (kind_ == Kind::SqrtOverInt)
            return "sqrt" + std::to_string(a_) + (b_ == 1 ? "" : "/" + std::to_string(b_));
        return std::to_string(a_) + "/" + std::to_string(b_);
    }

    [[nodiscard]] double value_of(const EnergyValue& e) const {
        switch (e.kind) {
            case EnergyValue::Kind::NegInf: return -INFINITY;
            case EnergyValue::Kind::PosInf: return INFINITY;
            default: return static_cast<double>(e.bonds) - value_ * static_cast<double>(e.pluses);
        }
    }

    /// Sign of bonds - h*pluses, exact.
    [[nodiscard]] int sign(std::int64_t bonds, std::int64_t pluses) const {
        using i128 = __int128;
        if (pluses == 0) return (bonds > 0) - (bonds < 0);
        if (kind_ == Kind::Rational) {
            i128 s = static_cast<i128>(b_) * bonds - static_cast<i128>(a_) * pluses;
            return (s > 0) - (s < 0);
        }
        // sign(q*bonds - pluses*sqrt(p))
        i128 A = static_cast<i128>(b_) * bonds;
        i128 B = pluses;
        if (A >= 0 && B <= 0) return (A == 0 && B == 0) ? 0 : 1;
        if (A <= 0 && B >= 0) return -1;
        i128 diff = A * A - static_cast<i128>(a_) * B * B;  // never zero: p is not a square
        int s = (diff > 0) - (diff < 0);
        return A > 0 ? s : -s;
    }

    /// floor(c / h) for an integer c >= 0, exact.
    [[nodiscard]] std::int64_t floor_ratio(std::int64_t c) const {
        auto k = static_cast<std::int64_t>(std::floor(static_cast<double>(c) / value_));
        while (k > 0 && sign(c, k) < 0) --k;
        while (sign(c, k + 1) >= 0) ++k;
        return k;
    }

    /// Three-way comparison of energy values. Under a rational field two
    /// distinct pairs can compare equal; use `tie()` to detect that case.
    [[nodiscard]] std::strong_ordering compare(const EnergyValue& x, const EnergyValue& y) const {
        if (x.kind != y.kind || x.kind != EnergyValue::Kind::Finite) {
            auto rank = [](const EnergyValue& e) { return static_cast<int>(e.kind); };
            if (rank(x) != rank(y)) return rank(x) <=> rank(y);
            return std::strong_ordering::equal;
        }
        int s = sign(x.bonds - y.bonds, x.pluses - y.pluses);
        return s < 0 ? std::strong_ordering::less
                     : (s > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
    }

    [[nodiscard]] bool less(const EnergyValue& x, const EnergyValue& y) const { return compare(x, y) < 0; }
    [[nodiscard]] bool less_equal(const EnergyValue& x, const EnergyValue& y) const { return compare(x, y) <= 0; }
    [[nodiscard]] bool equal(const EnergyValue& x, const EnergyValue& y) const { return compare(x, y) == 0; }

    /// Equal values carried by different pairs: only possible for rational h.
    [[nodiscard]] bool tie(const EnergyValue& x, const EnergyValue& y) const {
        return equal(x, y) && !(x == y);
    }

    [[nodiscard]] const EnergyValue& max(const EnergyValue& x, const EnergyValue& y) const {
        return less(x, y) ? y : x;
    }
    [[nodiscard]] const EnergyValue& min(const EnergyValue& x, const EnergyValue& y) const {
        return less(y, x) ? y : x;
    }

    /// (e)^+ = max(e, 0) in pair form.
    [[nodiscard]] EnergyValue positive_part(const EnergyValue& e) const {
        return compare(e, EnergyValue::zero()) > 0 ? e : EnergyValue::zero();
    }

    bool operator==(const MagneticField&) const = default;

private:
    MagneticField(Kind k, std::int64_t a, std::int64_t b) : kind_(k), a_(a), b_(b) {
        value_ = k == Kind::SqrtOverInt ? std::sqrt(static_cast<double>(a)) / static_cast<double>(b)
                                        : static_cast<double>(a) / static_cast<double>(b);
    }

    void check_range() const {
        if (!(value_ > 0.0 && value_ < 1.0))
            throw std::invalid_argument("magnetic field must lie in (0,1), got " + token());
    }

    Kind kind_;
    std::int64_t a_;  // p for sqrt(p)/q, numerator for rationals
    std::int64_t b_;  // q, denominator
    double value_ = 0.0;
};

/// Strict weak ordering on energies for sorting.
struct EnergyLess {
    const MagneticField* field;
    bool operator()(const EnergyValue& a, const EnergyValue& b) const { return field->less(a, b); }
};

}  // namespace metastab
