#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "metastab/energy.hpp"
#include "metastab/field.hpp"

namespace metastab {

using Site = std::uint32_t;

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Finite box with row-major site indexing (last axis fastest).
class BoxGeometry {
public:
    BoxGeometry() = default;
    explicit BoxGeometry(std::vector<int> dims) : dims_(std::move(dims)) {
        if (dims_.empty()) throw std::invalid_argument("box needs at least one axis");
        strides_.assign(dims_.size(), 1);
        std::uint64_t total = 1;
        for (std::size_t a = dims_.size(); a-- > 0;) {
            if (dims_[a] < 1) throw std::invalid_argument("box side lengths must be >= 1");
            strides_[a] = total;
            total *= static_cast<std::uint64_t>(dims_[a]);
            if (total > (1ull << 31)) throw std::invalid_argument("box too large");
        }
        sites_ = total;
    }

    static BoxGeometry cube(int d, int side) { return BoxGeometry(std::vector<int>(static_cast<std::size_t>(d), side)); }

    [[nodiscard]] int d() const { return static_cast<int>(dims_.size()); }
    [[nodiscard]] std::size_t sites() const { return sites_; }
    [[nodiscard]] const std::vector<int>& dims() const { return dims_; }
    [[nodiscard]] int side(int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
    [[nodiscard]] std::uint64_t stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }

    [[nodiscard]] int coord(Site x, int axis) const {
        return static_cast<int>((x / strides_[static_cast<std::size_t>(axis)]) %
                                static_cast<std::uint64_t>(dims_[static_cast<std::size_t>(axis)]));
    }
    [[nodiscard]] std::vector<int> coords(Site x) const {
        std::vector<int> c(dims_.size());
        for (int a = 0; a < d(); ++a) c[static_cast<std::size_t>(a)] = coord(x, a);
        return c;
    }
    [[nodiscard]] bool contains(const std::vector<int>& c) const {
        if (c.size() != dims_.size()) return false;
        for (std::size_t a = 0; a < c.size(); ++a)
            if (c[a] < 0 || c[a] >= dims_[a]) return false;
        return true;
    }
    [[nodiscard]] Site index(const std::vector<int>& c) const {
        if (!contains(c)) throw std::out_of_range("coordinates outside box");
        std::uint64_t idx = 0;
        for (std::size_t a = 0; a < c.size(); ++a) idx += static_cast<std::uint64_t>(c[a]) * strides_[a];
        return static_cast<Site>(idx);
    }

    bool operator==(const BoxGeometry& o) const { return dims_ == o.dims_; }

    [[nodiscard]] std::string str() const {
        std::string s;
        for (std::size_t a = 0; a < dims_.size(); ++a) s += (a ? "," : "") + std::to_string(dims_[a]);
        return s;
    }

private:
    std::vector<int> dims_;
    std::vector<std::uint64_t> strides_;
    std::size_t sites_ = 0;
};

// ---------------------------------------------------------------------------
// Boundary conditions
// ---------------------------------------------------------------------------

/// Exterior site adjacent to `site` across the face (axis, side), side in {-1,+1}.
struct ExteriorSite {
    Site site;
    int axis;
    int side;
    auto operator<=>(const ExteriorSite&) const = default;
};

struct BoundaryCondition {
    enum class Kind { AllMinus, AllPlus, NPlusMinus };

    Kind kind = Kind::AllMinus;
    int n = 0;
    std::map<ExteriorSite, int> overrides;  // spin +1 or -1

    static BoundaryCondition all_minus() { return {Kind::AllMinus, 0, {}}; }
    static BoundaryCondition all_plus() { return {Kind::AllPlus, 0, {}}; }
    static BoundaryCondition n_plus_minus(int n) { return {Kind::NPlusMinus, n, {}}; }

    /// Exterior spin of the face (axis, side) before overrides.
    [[nodiscard]] int base_spin(int axis, int d) const {
        (void)d;
        switch (kind) {
            case Kind::AllMinus: return -1;
            case Kind::AllPlus: return +1;
            default: return axis < n ? -1 : +1;
        }
    }

    [[nodiscard]] std::string str() const {
        std::string s = kind == Kind::AllMinus ? "minus" : kind == Kind::AllPlus ? "plus" : std::to_string(n) + "pm";
        if (!overrides.empty()) s += "+overrides";
        return s;
    }

    /// Parses "minus", "plus", "<n>pm" (also "n+-", "npm:<n>").
    static BoundaryCondition parse(const std::string& s) {
        if (s == "minus" || s == "all-minus" || s == "AllMinus") return all_minus();
        if (s == "plus" || s == "all-plus" || s == "AllPlus") return all_plus();
        std::string digits;
        for (char c : s)
            if (c >= '0' && c <= '9') digits.push_back(c);
        if (!digits.empty() && (s.find("pm") != std::string::npos || s.find("+-") != std::string::npos ||
                                s.find("±") != std::string::npos))
            return n_plus_minus(std::stoi(digits));
        throw std::invalid_argument("unknown boundary condition '" + s + "'");
    }
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Dense bit array, one bit per site (1 = plus).
class Configuration {
public:
    Configuration() = default;
    explicit Configuration(const BoxGeometry& g, bool plus = false)
        : dims_(g.dims()), n_(g.sites()), words_((g.sites() + 63) / 64, plus ? ~0ull : 0ull) {
        trim();
    }

    static Configuration from_mask(const BoxGeometry& g, std::uint64_t mask) {
        if (g.sites() > 64) throw std::invalid_argument("mask form needs <= 64 sites");
        Configuration c(g);
        if (!c.words_.empty()) c.words_[0] = mask;
        c.trim();
        return c;
    }
    static Configuration from_sites(const BoxGeometry& g, const std::vector<Site>& plus) {
        Configuration c(g);
        for (Site s : plus) c.set(s, true);
        return c;
    }

    [[nodiscard]] std::size_t size() const { return n_; }
    [[nodiscard]] const std::vector<int>& dims() const { return dims_; }
    [[nodiscard]] bool plus(Site x) const { return (words_[x >> 6] >> (x & 63)) & 1ull; }
    [[nodiscard]] int spin(Site x) const { return plus(x) ? 1 : -1; }
    void set(Site x, bool p) {
        if (p) words_[x >> 6] |= 1ull << (x & 63);
        else words_[x >> 6] &= ~(1ull << (x & 63));
    }
    void flip(Site x) { words_[x >> 6] ^= 1ull << (x & 63); }

    [[nodiscard]] std::size_t volume() const {
        std::size_t v = 0;
        for (auto w : words_) v += static_cast<std::size_t>(std::popcount(w));
        return v;
    }
    [[nodiscard]] std::uint64_t mask() const {
        if (n_ > 64) throw std::logic_error("mask form needs <= 64 sites");
        return words_.empty() ? 0 : words_[0];
    }
    [[nodiscard]] std::vector<Site> plus_sites() const {
        std::vector<Site> out;
        for (std::size_t w = 0; w < words_.size(); ++w)
            for (auto bits = words_[w]; bits; bits &= bits - 1)
                out.push_back(static_cast<Site>(w * 64 + static_cast<std::size_t>(std::countr_zero(bits))));
        return out;
    }
    [[nodiscard]] bool all_plus() const { return volume() == n_; }
    [[nodiscard]] bool all_minus() const {
        return std::all_of(words_.begin(), words_.end(), [](auto w) { return w == 0; });
    }
    /// Site-wise order: every plus of *this is a plus of o.
    [[nodiscard]] bool below(const Configuration& o) const {
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & ~o.words_[i]) return false;
        return true;
    }
    [[nodiscard]] const std::vector<std::uint64_t>& words() const { return words_; }
    std::vector<std::uint64_t>& words() { return words_; }

    bool operator==(const Configuration& o) const { return dims_ == o.dims_ && words_ == o.words_; }
    bool operator<(const Configuration& o) const { return std::tie(dims_, words_) < std::tie(o.dims_, o.words_); }

private:
    void trim() {
        if (n_ % 64 && !words_.empty()) words_.back() &= (1ull << (n_ % 64)) - 1;
    }

    std::vector<int> dims_;
    std::size_t n_ = 0;
    std::vector<std::uint64_t> words_;
};

inline void require_same_geometry(const Configuration& a, const Configuration& b) {
    if (a.dims() != b.dims()) throw std::invalid_argument("configuration geometry mismatch");
}

/// Site-wise min and max of plus-sets.
inline std::pair<Configuration, Configuration> meet_join(const Configuration& eta, const Configuration& xi) {
    require_same_geometry(eta, xi);
    Configuration lo = eta, hi = eta;
    for (std::size_t i = 0; i < eta.words().size(); ++i) {
        lo.words()[i] = eta.words()[i] & xi.words()[i];
        hi.words()[i] = eta.words()[i] | xi.words()[i];
    }
    return {lo, hi};
}

// ---------------------------------------------------------------------------
// Context
// ---------------------------------------------------------------------------

struct Component {
    std::vector<Site> sites;
    EnergyValue energy;
};

/// Immutable precomputed box + boundary + field.
class LatticeContext {
public:
    LatticeContext(BoxGeometry geometry, BoundaryCondition bc, MagneticField h, std::vector<int> origin = {})
        : geom_(std::move(geometry)), bc_(std::move(bc)), h_(h), origin_(std::move(origin)) {
        const int d = geom_.d();
        if (bc_.kind == BoundaryCondition::Kind::NPlusMinus && (bc_.n < 0 || bc_.n > d))
            throw std::invalid_argument("n+- boundary needs 0 <= n <= d (n=" + std::to_string(bc_.n) +
                                        ", d=" + std::to_string(d) + ")");
        if (origin_.empty()) origin_.assign(static_cast<std::size_t>(d), 0);
        if (static_cast<int>(origin_.size()) != d) throw std::invalid_argument("origin dimension mismatch");
        for (const auto& [ext, s] : bc_.overrides) {
            if (ext.site >= geom_.sites() || ext.axis < 0 || ext.axis >= d || (ext.side != 1 && ext.side != -1) ||
                (s != 1 && s != -1))
                throw std::invalid_argument("invalid boundary override");
            int c = geom_.coord(ext.site, ext.axis);
            if ((ext.side < 0 && c != 0) || (ext.side > 0 && c != geom_.side(ext.axis) - 1))
                throw std::invalid_argument("boundary override is not adjacent to the box exterior");
        }

        const std::size_t n = geom_.sites();
        offsets_.assign(n + 1, 0);
        ext_minus_.assign(n, 0);
        ext_plus_.assign(n, 0);
        nbrs_.reserve(n * static_cast<std::size_t>(2 * d));
        for (Site x = 0; x < n; ++x) {
            for (int a = 0; a < d; ++a) {
                const int c = geom_.coord(x, a);
                for (int side : {-1, 1}) {
                    const bool inside = side < 0 ? c > 0 : c + 1 < geom_.side(a);
                    if (inside) {
                        nbrs_.push_back(static_cast<Site>(side < 0 ? x - geom_.stride(a) : x + geom_.stride(a)));
                    } else {
                        int s = bc_.base_spin(a, d);
                        if (auto it = bc_.overrides.find({x, a, side}); it != bc_.overrides.end()) s = it->second;
                        (s < 0 ? ext_minus_ : ext_plus_)[x]++;
                    }
                }
            }
            offsets_[x + 1] = static_cast<std::uint32_t>(nbrs_.size());
        }
    }

    [[nodiscard]] const BoxGeometry& geometry() const { return geom_; }
    [[nodiscard]] const BoundaryCondition& boundary() const { return bc_; }
    [[nodiscard]] const MagneticField& field() const { return h_; }
    [[nodiscard]] const std::vector<int>& origin() const { return origin_; }
    [[nodiscard]] std::size_t sites() const { return geom_.sites(); }
    [[nodiscard]] int d() const { return geom_.d(); }

    struct NeighborRange {
        const Site* b;
        const Site* e;
        [[nodiscard]] const Site* begin() const { return b; }
        [[nodiscard]] const Site* end() const { return e; }
        [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(e - b); }
    };
    [[nodiscard]] NeighborRange neighbors(Site x) const {
        return {nbrs_.data() + offsets_[x], nbrs_.data() + offsets_[x + 1]};
    }
    [[nodiscard]] int exterior_minus(Site x) const { return ext_minus_[x]; }
    [[nodiscard]] int exterior_plus(Site x) const { return ext_plus_[x]; }

    /// Global lattice coordinates (origin + local), used to key shared randomness.
    [[nodiscard]] std::vector<int> global_coords(Site x) const {
        auto c = geom_.coords(x);
        for (std::size_t a = 0; a < c.size(); ++a) c[a] += origin_[a];
        return c;
    }

    void check(const Configuration& s) const {
        if (s.dims() != geom_.dims()) throw std::invalid_argument("configuration geometry mismatch");
    }
    void check_site(Site x) const {
        if (x >= geom_.sites()) throw std::out_of_range("site outside box");
    }

    [[nodiscard]] EnergyValue hamiltonian(const Configuration& s) const {
        check(s);
        std::int64_t bonds = 0, pluses = 0;
        for (Site x : s.plus_sites()) {
            ++pluses;
            bonds += ext_minus_[x] - ext_plus_[x];
            for (Site y : neighbors(x))
                if (!s.plus(y)) ++bonds;
        }
        return {bonds, pluses};
    }

    /// H(sigma^x) - H(sigma), exactly.
    [[nodiscard]] EnergyValue delta_h(const Configuration& s, Site x) const {
        check_site(x);
        int plus_nbrs = 0;
        for (Site y : neighbors(x)) plus_nbrs += s.plus(y);
        return delta_from_counts(x, plus_nbrs, s.plus(x));
    }

    /// Same as delta_h given the interior plus-neighbor count.
    [[nodiscard]] EnergyValue delta_from_counts(Site x, int plus_nbrs, bool currently_plus) const {
        const int deg = static_cast<int>(offsets_[x + 1] - offsets_[x]);
        const std::int64_t up = (deg - plus_nbrs) - plus_nbrs + ext_minus_[x] - ext_plus_[x];
        return currently_plus ? EnergyValue{-up, -1} : EnergyValue{up, 1};
    }

    [[nodiscard]] double flip_rate(const Configuration& s, Site x, double beta) const {
        if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
        return rate_of(delta_h(s, x), beta);
    }
    [[nodiscard]] double rate_of(const EnergyValue& delta, double beta) const {
        if (h_.compare(delta, EnergyValue::zero()) <= 0) return 1.0;
        return std::exp(-beta * h_.value_of(delta));
    }

    // Mask form for enumerable boxes (<= 64 sites).
    [[nodiscard]] EnergyValue energy_of_mask(std::uint64_t m) const {
        std::int64_t bonds = 0, pluses = 0;
        for (auto bits = m; bits; bits &= bits - 1) {
            const auto x = static_cast<Site>(std::countr_zero(bits));
            ++pluses;
            bonds += ext_minus_[x] - ext_plus_[x];
            for (Site y : neighbors(x))
                if (!((m >> y) & 1ull)) ++bonds;
        }
        return {bonds, pluses};
    }
    [[nodiscard]] EnergyValue delta_of_mask(std::uint64_t m, Site x) const {
        int plus_nbrs = 0;
        for (Site y : neighbors(x)) plus_nbrs += static_cast<int>((m >> y) & 1ull);
        return delta_from_counts(x, plus_nbrs, (m >> x) & 1ull);
    }

    /// Energy of the configuration whose plus set is exactly `set` (sorted or not).
    [[nodiscard]] EnergyValue energy_of_sites(const std::vector<Site>& set) const {
        std::vector<Site> sorted = set;
        std::sort(sorted.begin(), sorted.end());
        std::int64_t bonds = 0;
        for (Site x : sorted) {
            bonds += ext_minus_[x] - ext_plus_[x];
            for (Site y : neighbors(x))
                if (!std::binary_search(sorted.begin(), sorted.end(), y)) ++bonds;
        }
        return {bonds, static_cast<std::int64_t>(sorted.size())};
    }

    /// Nearest-neighbor plus clusters with their stand-alone energies.
    [[nodiscard]] std::vector<Component> connected_components(const Configuration& s) const {
        check(s);
        std::vector<Component> out;
        std::vector<char> seen(sites(), 0);
        std::vector<Site> stack;
        for (Site start : s.plus_sites()) {
            if (seen[start]) continue;
            Component c;
            seen[start] = 1;
            stack.push_back(start);
            while (!stack.empty()) {
                Site x = stack.back();
                stack.pop_back();
                c.sites.push_back(x);
                for (Site y : neighbors(x))
                    if (s.plus(y) && !seen[y]) {
                        seen[y] = 1;
                        stack.push_back(y);
                    }
            }
            std::sort(c.sites.begin(), c.sites.end());
            c.energy = energy_of_sites(c.sites);
            out.push_back(std::move(c));
        }
        return out;
    }

private:
    BoxGeometry geom_;
    BoundaryCondition bc_;
    MagneticField h_;
    std::vector<int> origin_;
    std::vector<std::uint32_t> offsets_;
    std::vector<Site> nbrs_;
    std::vector<std::int8_t> ext_minus_;
    std::vector<std::int8_t> ext_plus_;
};

inline LatticeContext build_context(const BoxGeometry& g, const BoundaryCondition& bc, const MagneticField& h) {
    return LatticeContext(g, bc, h);
}

}  // namespace metastab
