#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "metastab/kmc.hpp"
#include "metastab/landscape.hpp"
#include "metastab/union_find.hpp"

namespace metastab {

/// One maximal time interval during which a site carries a plus.
struct PlusInterval {
    Site site;
    double start;
    double end;  // +inf while open
    auto operator<=>(const PlusInterval&) const = default;
};

/// Summary of a space-time cluster.
struct SpaceTimeCluster {
    std::uint32_t id;
    std::vector<int> lo, hi;  // spatial bounding box
    double birth;
    double death;  // +inf while some member site is still plus
    bool seeded;   // contains a plus at the start time
    std::size_t live;

    [[nodiscard]] int diameter() const {
        int m = 0;
        for (std::size_t a = 0; a < lo.size(); ++a) m = std::max(m, hi[a] - lo[a]);
        return m;
    }
    [[nodiscard]] bool open() const { return live > 0; }
};

struct Merge {
    double time;
    std::uint32_t into;
    std::vector<std::uint32_t> parts;
};

/// A cluster reaching a new diameter.
struct GrowthRecord {
    double time;
    std::uint32_t cluster;
    int diameter;
};

/// Online space-time cluster bookkeeping. Each currently plus site points to
/// a union-find node; a plus flip joins the clusters of the plus neighbours.
class StcLedger {
public:
    /// `region` restricts tracking to the sites it flags (empty = whole box).
    /// `groups` optionally merges initial plus sites known to share a cluster.
    StcLedger(const BoxGeometry& g, const Configuration& initial, double t0 = 0.0,
              const std::vector<std::vector<Site>>& groups = {}, std::vector<char> region = {})
        : g_(g), region_(std::move(region)), start_(t0), now_(t0) {
        if (region_.empty()) region_.assign(g.sites(), 1);
        if (region_.size() != g.sites()) throw std::invalid_argument("region mask has the wrong size");
        nbrs_.resize(g.sites());
        for (Site x = 0; x < g.sites(); ++x) {
            auto c = g.coords(x);
            for (int a = 0; a < g.d(); ++a)
                for (int s : {-1, 1}) {
                    c[static_cast<std::size_t>(a)] += s;
                    if (g.contains(c)) nbrs_[x].push_back(g.index(c));
                    c[static_cast<std::size_t>(a)] -= s;
                }
        }
        node_.assign(g.sites(), kNone);
        open_interval_.assign(g.sites(), kNone);
        for (Site x = 0; x < g.sites(); ++x)
            if (region_[x] && initial.plus(x)) open_site(x, t0, true);
        for (const auto& grp : groups) {
            for (Site x : grp)
                if (x >= g.sites() || !region_[x] || node_[x] == kNone)
                    throw std::invalid_argument("initial cluster lists a site that is not plus");
            for (std::size_t i = 1; i < grp.size(); ++i) join(node_[grp[0]], node_[grp[i]]);
        }
        for (const auto& c : clusters()) {
            growth_.push_back({t0, c.id, c.diameter()});
            recorded_[c.id] = c.diameter();
        }
    }

    /// Applies one flip event; throws when it does not change the spin.
    void apply(const FlipEvent& e) {
        if (e.site >= g_.sites()) throw std::invalid_argument("flip outside the box");
        if (e.time < now_) throw std::invalid_argument("flip events out of order");
        now_ = e.time;
        if (!region_[e.site]) return;
        const bool is_plus = node_[e.site] != kNone;
        if (is_plus == e.plus)
            throw std::invalid_argument("inconsistent trajectory: flip to current value at site " + std::to_string(e.site));
        if (e.plus) {
            open_site(e.site, e.time, false);
        } else {
            const auto r = uf_.find(node_[e.site]);
            intervals_[open_interval_[e.site]].end = e.time;
            open_interval_[e.site] = kNone;
            node_[e.site] = kNone;
            if (--info_[r].live == 0) info_[r].death = e.time;
        }
    }

    [[nodiscard]] const BoxGeometry& geometry() const { return g_; }
    [[nodiscard]] double start_time() const { return start_; }
    [[nodiscard]] double now() const { return now_; }

    /// All clusters seen so far, one per union-find root, in id order.
    [[nodiscard]] std::vector<SpaceTimeCluster> clusters() const {
        std::vector<SpaceTimeCluster> out;
        for (std::uint32_t i = 0; i < info_.size(); ++i)
            if (root_[i]) out.push_back(info_[i]);
        return out;
    }

    /// Cluster currently holding site x, if x is plus.
    [[nodiscard]] std::optional<SpaceTimeCluster> cluster_at(Site x) {
        if (node_[x] == kNone) return std::nullopt;
        return info_[uf_.find(node_[x])];
    }

    /// Member intervals of the cluster with the given root id, sorted.
    [[nodiscard]] std::vector<PlusInterval> members(std::uint32_t id) {
        std::vector<PlusInterval> out;
        for (std::size_t i = 0; i < intervals_.size(); ++i)
            if (uf_.find(interval_node_[i]) == id) out.push_back(intervals_[i]);
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Union-find node of the current plus interval at x.
    [[nodiscard]] std::optional<std::uint32_t> node_at(Site x) const {
        if (node_[x] == kNone) return std::nullopt;
        return node_[x];
    }
    [[nodiscard]] std::uint32_t root_of(std::uint32_t node) { return uf_.find(node); }
    [[nodiscard]] const std::vector<Merge>& merges() const { return merges_; }
    [[nodiscard]] const std::vector<GrowthRecord>& growth() const { return growth_; }

    [[nodiscard]] int max_diameter() const {
        int m = 0;
        for (const auto& c : clusters()) m = std::max(m, c.diameter());
        return m;
    }

private:
    static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

    void open_site(Site x, double t, bool seeded) {
        const auto id = uf_.add();
        const auto c = g_.coords(x);
        info_.push_back({id, c, c, t, std::numeric_limits<double>::infinity(), seeded, 1});
        root_.push_back(1);
        node_[x] = id;
        open_interval_[x] = static_cast<std::uint32_t>(intervals_.size());
        intervals_.push_back({x, t, std::numeric_limits<double>::infinity()});
        interval_node_.push_back(id);
        std::vector<std::uint32_t> parts;
        for (Site y : nbrs_[x])
            if (region_[y] && node_[y] != kNone) {
                const auto r = uf_.find(node_[y]);
                if (r != uf_.find(id) && std::find(parts.begin(), parts.end(), r) == parts.end()) parts.push_back(r);
            }
        for (auto r : parts) join(id, r);
        const auto root = uf_.find(id);
        recorded_.resize(info_.size(), 0);
        if (seeded) return;
        if (!parts.empty()) merges_.push_back({t, root, parts});
        int prev = 0;
        for (auto r : parts) prev = std::max(prev, recorded_[r]);
        const int d = info_[root].diameter();
        if (parts.empty() || d > prev) growth_.push_back({t, root, d});
        recorded_[root] = std::max(prev, d);
    }

    std::uint32_t join(std::uint32_t a, std::uint32_t b) {
        a = uf_.find(a);
        b = uf_.find(b);
        if (a == b) return a;
        const auto r = uf_.unite(a, b);
        const auto o = r == a ? b : a;
        auto& R = info_[r];
        const auto& O = info_[o];
        for (std::size_t k = 0; k < R.lo.size(); ++k) {
            R.lo[k] = std::min(R.lo[k], O.lo[k]);
            R.hi[k] = std::max(R.hi[k], O.hi[k]);
        }
        R.birth = std::min(R.birth, O.birth);
        R.seeded = R.seeded || O.seeded;
        R.live += O.live;
        R.id = r;
        root_[o] = 0;
        return r;
    }

    BoxGeometry g_;
    std::vector<char> region_;
    std::vector<std::vector<Site>> nbrs_;
    double start_, now_;
    UnionFind uf_;
    std::vector<SpaceTimeCluster> info_;
    std::vector<char> root_;
    std::vector<std::uint32_t> node_;
    std::vector<std::uint32_t> open_interval_;
    std::vector<PlusInterval> intervals_;
    std::vector<std::uint32_t> interval_node_;
    std::vector<Merge> merges_;
    std::vector<GrowthRecord> growth_;
    std::vector<int> recorded_;
};

/// Ledger of a whole trajectory from its initial configuration.
inline StcLedger track(const BoxGeometry& g, const Trajectory& tr, const std::vector<std::vector<Site>>& initial_stc = {}) {
    StcLedger L(g, tr.initial, 0.0, initial_stc);
    for (const auto& e : tr.events) L.apply(e);
    return L;
}

/// Windowed diameter over [s, t]: clusters of the trajectory cut to the
/// window; those touching time s or time t contribute their summed diameters,
/// the others their maximum.
inline int diam_infty_window(const BoxGeometry& g, const Trajectory& tr, double s, double t) {
    if (!(s < t) || s < 0.0 || t > tr.end_time) throw std::invalid_argument("window outside the tracked horizon");
    StcLedger L(g, tr.at(s), s);
    for (const auto& e : tr.events)
        if (e.time > s && e.time <= t) L.apply(e);
    int sum = 0, inner = 0;
    for (const auto& c : L.clusters()) {
        if (c.seeded || c.open())
            sum += c.diameter();
        else
            inner = std::max(inner, c.diameter());
    }
    return std::max(sum, inner);
}

/// Axis-aligned sub-box given by inclusive corner coordinates.
struct SubBox {
    std::vector<int> lo, hi;
};

/// First time a cluster of the dynamics seen inside `box` meets both faces
/// orthogonal to `axis`.
inline std::optional<double> first_crossing(const BoxGeometry& g, const Trajectory& tr, const SubBox& box, int axis) {
    if (axis < 0 || axis >= g.d() || box.lo.size() != static_cast<std::size_t>(g.d()) || box.hi.size() != box.lo.size())
        throw std::invalid_argument("sub-box does not match the geometry");
    std::vector<char> region(g.sites(), 0);
    for (Site x = 0; x < g.sites(); ++x) {
        const auto c = g.coords(x);
        bool in = true;
        for (int a = 0; a < g.d(); ++a) {
            const auto k = static_cast<std::size_t>(a);
            in = in && c[k] >= box.lo[k] && c[k] <= box.hi[k];
        }
        region[x] = in;
    }
    const auto k = static_cast<std::size_t>(axis);
    StcLedger L(g, tr.initial, 0.0, {}, std::move(region));
    auto crossed = [&](StcLedger& led, Site x) {
        const auto c = led.cluster_at(x);
        return c && c->lo[k] <= box.lo[k] && c->hi[k] >= box.hi[k];
    };
    for (const auto& c : L.clusters())
        if (c.lo[k] <= box.lo[k] && c.hi[k] >= box.hi[k]) return 0.0;
    for (const auto& e : tr.events) {
        L.apply(e);
        if (e.plus && crossed(L, e.site)) return e.time;
    }
    return std::nullopt;
}

inline bool crossing_detected(const BoxGeometry& g, const Trajectory& tr, const SubBox& box, int axis) {
    return first_crossing(g, tr, box, axis).has_value();
}

struct DoublingWitness {
    double time;
    std::uint32_t cluster;
    int diameter;
};

/// First cluster whose diameter reaches D; by the one-site growth bound its
/// diameter is at most 2D.
inline std::optional<DoublingWitness> doubling_extraction(const StcLedger& L, int D) {
    int initial = 0;
    for (const auto& r : L.growth())
        if (r.time == L.start_time()) initial = std::max(initial, r.diameter);
    if (D < initial) throw std::invalid_argument("threshold below an initial cluster diameter");
    for (const auto& r : L.growth())
        if (r.diameter >= D) return DoublingWitness{r.time, r.cluster, r.diameter};
    return std::nullopt;
}

struct ReturnReport {
    std::size_t states = 0;      // distinct (configuration, cluster labelling) pairs reached
    std::size_t returns = 0;     // of those, the ones sitting at the bottom
    std::size_t violations = 0;
    bool complete = false;       // search closed before the length bound
};

/// Walks of single flips inside `block` from its bottom eta, up to `max_len`
/// steps. Tracks which components of eta each live cluster has absorbed; at
/// every return to eta, each component must sit in a cluster that contains
/// its own starting copy. The search runs over labelled states, so it covers
/// every walk, not a sample.
inline ReturnReport return_to_bottom_check(const LandscapeGraph& G, const Block& block, std::size_t max_len = 12) {
    if (!G.implicit()) throw std::invalid_argument("return check needs an enumerated lattice landscape");
    if (block.bottom.size() != 1) throw std::invalid_argument("block bottom is not a single configuration");
    const auto& ctx = *G.context();
    const auto& g = ctx.geometry();
    if (g.sites() > 9) throw std::length_error("return check limited to boxes of at most 9 sites");
    const StateId eta = block.bottom.front();
    const auto in = G.membership(block.states);
    const auto n = g.sites();
    const auto comps = ctx.connected_components(Configuration::from_mask(g, eta));

    // state: per site a cluster label (0 = minus), then per label the absorbed components
    using Key = std::vector<std::uint8_t>;
    auto canonical = [n](Key k) {
        std::uint8_t map[16] = {};
        std::uint8_t next = 0;
        Key out(k.size(), 0);
        for (std::size_t x = 0; x < n; ++x)
            if (k[x]) {
                if (!map[k[x]]) map[k[x]] = ++next;
                out[x] = map[k[x]];
            }
        for (std::uint8_t l = 1; l < 16; ++l)
            if (map[l]) out[n + map[l] - 1] = k[n + l - 1];
        return out;
    };
    Key start(n + n, 0);
    for (std::size_t c = 0; c < comps.size(); ++c) {
        for (Site x : comps[c].sites) start[x] = static_cast<std::uint8_t>(c + 1);
        start[n + c] = static_cast<std::uint8_t>(1u << c);
    }
    start = canonical(start);
    auto mask_of = [n](const Key& k) {
        StateId m = 0;
        for (std::size_t x = 0; x < n; ++x)
            if (k[x]) m |= StateId{1} << x;
        return m;
    };
    auto check = [&](const Key& k) {
        for (std::size_t c = 0; c < comps.size(); ++c)
            for (Site x : comps[c].sites)
                if (!((k[n + k[x] - 1] >> c) & 1u)) return false;
        return true;
    };
    ReturnReport rep;
    std::set<Key> seen{start};
    std::vector<Key> layer{start};
    for (std::size_t depth = 1; depth <= max_len && !layer.empty(); ++depth) {
        std::vector<Key> next;
        for (const auto& k : layer) {
            const StateId m = mask_of(k);
            for (Site x = 0; x < n; ++x) {
                if (!in[m ^ (StateId{1} << x)]) continue;
                Key t = k;
                if (t[x]) {
                    t[x] = 0;
                } else {
                    std::uint8_t lab = 0, absorbed = 0;
                    std::uint8_t used[16] = {};
                    for (std::size_t y = 0; y < n; ++y) used[t[y]] = 1;
                    for (std::uint8_t l = 1; l < 16 && !lab; ++l)
                        if (!used[l]) lab = l;
                    auto c = g.coords(x);
                    std::vector<std::uint8_t> joined;
                    for (int a = 0; a < g.d(); ++a)
                        for (int sd : {-1, 1}) {
                            c[static_cast<std::size_t>(a)] += sd;
                            if (g.contains(c) && t[g.index(c)]) joined.push_back(t[g.index(c)]);
                            c[static_cast<std::size_t>(a)] -= sd;
                        }
                    for (auto l : joined) absorbed |= t[n + l - 1];
                    for (std::size_t y = 0; y < n; ++y)
                        if (t[y] && std::find(joined.begin(), joined.end(), t[y]) != joined.end()) t[y] = lab;
                    t[x] = lab;
                    for (std::size_t l = 0; l < n; ++l) t[n + l] = 0;
                    // rebuild label payloads from the old state
                    for (std::size_t y = 0; y < n; ++y)
                        if (t[y] && t[y] != lab) t[n + t[y] - 1] = k[n + k[y] - 1];
                    t[n + lab - 1] = absorbed;
                }
                t = canonical(t);
                if (!seen.insert(t).second) continue;
                if (mask_of(t) == eta) {
                    ++rep.returns;
                    if (!check(t)) ++rep.violations;
                }
                next.push_back(std::move(t));
            }
        }
        layer = std::move(next);
    }
    rep.states = seen.size();
    rep.complete = layer.empty();
    return rep;
}

}  // namespace metastab
