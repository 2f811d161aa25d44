#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "metastab/lattice.hpp"
#include "metastab/restricted.hpp"

namespace metastab {

// ---------------------------------------------------------------------------
// Shared randomness for the graphical construction.

/// Two rate-one Poisson clocks per lattice site (family 0 sets a minus,
/// family 1 sets a plus), each arrival carrying a uniform mark. Values are
/// a pure function of (seed, global site coordinates, family, arrival
/// index), so boxes that overlap see the same clocks on common sites.
class EventStream {
public:
    explicit EventStream(std::uint64_t seed) : seed_(seed) {}
    [[nodiscard]] std::uint64_t seed() const { return seed_; }

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    [[nodiscard]] std::uint64_t key(const std::vector<int>& coords, int family, std::uint64_t index, int slot) const {
        std::uint64_t z = mix(seed_);
        for (int c : coords) z = mix(z ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(c)));
        z = mix(z ^ (static_cast<std::uint64_t>(family) << 1 | static_cast<std::uint64_t>(slot)));
        return mix(z ^ index);
    }

    /// Uniform in (0,1).
    static double to_unit(std::uint64_t z) { return (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53; }

    /// Inter-arrival gap before arrival `index` (1-based) and its mark.
    [[nodiscard]] double gap(const std::vector<int>& coords, int family, std::uint64_t index) const {
        return -std::log(to_unit(key(coords, family, index, 0)));
    }
    [[nodiscard]] double mark(const std::vector<int>& coords, int family, std::uint64_t index) const {
        return to_unit(key(coords, family, index, 1));
    }

private:
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Trajectories.

struct FlipEvent {
    double time;
    Site site;
    bool plus;  // new spin
    bool operator==(const FlipEvent&) const = default;
};

enum class StopReason { Predicate, TimeCap, EventCap };

inline std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::Predicate: return "predicate";
        case StopReason::TimeCap: return "time_cap";
        default: return "event_cap";
    }
}

struct Trajectory {
    Configuration initial;
    std::vector<FlipEvent> events;
    double end_time = 0.0;
    StopReason reason = StopReason::TimeCap;
    std::uint64_t flips = 0;     // counted even when events are not recorded
    std::uint64_t arrivals = 0;  // clock rings processed (graphical mode)
    Configuration final_config;

    [[nodiscard]] bool hit() const { return reason == StopReason::Predicate; }

    /// Configuration just after all events with time <= t.
    [[nodiscard]] Configuration at(double t) const {
        Configuration c = initial;
        for (const auto& e : events) {
            if (e.time > t) break;
            c.set(e.site, e.plus);
        }
        return c;
    }
};

/// Read-only view of the running state handed to stop predicates.
struct DynView {
    const Configuration& config;
    std::size_t volume;
    EnergyValue energy;
    double time;
};

using StopPredicate = std::function<bool(const DynView&)>;

namespace stop {
inline StopPredicate never() { return [](const DynView&) { return false; }; }
inline StopPredicate all_plus() { return [](const DynView& v) { return v.config.all_plus(); }; }
inline StopPredicate spin_at(Site x) { return [x](const DynView& v) { return v.config.plus(x); }; }
inline StopPredicate volume_exceeds(std::size_t m) { return [m](const DynView& v) { return v.volume > m; }; }
inline StopPredicate energy_exceeds(EnergyValue e, MagneticField h) {
    return [e, h](const DynView& v) { return h.less(e, v.energy); };
}
/// True once the state leaves the set described by `member`.
inline StopPredicate exits_set(std::function<bool(const Configuration&, std::size_t, const EnergyValue&)> member) {
    return [member = std::move(member)](const DynView& v) { return !member(v.config, v.volume, v.energy); };
}
}  // namespace stop

struct EvolveOptions {
    double time_cap = std::numeric_limits<double>::infinity();
    std::uint64_t event_cap = 1ull << 40;
    bool record = true;
};

/// Admission test for restricted dynamics: may the state move to (config with x flipped)?
using Admission = std::function<bool(std::size_t volume, const EnergyValue& energy)>;

// ---------------------------------------------------------------------------
// Incremental single-box state.

namespace detail {

struct BoxState {
    const LatticeContext* ctx;
    Configuration config;
    std::vector<int> plus_nbrs;
    std::size_t volume = 0;
    EnergyValue energy;

    BoxState(const LatticeContext& c, Configuration init) : ctx(&c), config(std::move(init)) {
        c.check(config);
        const auto n = c.geometry().sites();
        plus_nbrs.assign(n, 0);
        for (Site x = 0; x < n; ++x)
            if (config.plus(x))
                for (Site y : c.neighbors(x)) ++plus_nbrs[y];
        volume = config.volume();
        energy = c.hamiltonian(config);
    }

    [[nodiscard]] EnergyValue delta(Site x) const { return ctx->delta_from_counts(x, plus_nbrs[x], config.plus(x)); }
    [[nodiscard]] double rate(Site x, double beta) const { return ctx->rate_of(delta(x), beta); }

    void flip(Site x, const EnergyValue& d) {
        const bool now_plus = !config.plus(x);
        config.set(x, now_plus);
        energy += d;
        volume = now_plus ? volume + 1 : volume - 1;
        for (Site y : ctx->neighbors(x)) plus_nbrs[y] += now_plus ? 1 : -1;
    }

    [[nodiscard]] DynView view(double t) const { return {config, volume, energy, t}; }
};

struct Clock {
    double t;
    Site site;
    int family;
    std::uint64_t index;
    bool operator>(const Clock& o) const {
        if (t != o.t) return t > o.t;
        if (site != o.site) return site > o.site;
        if (family != o.family) return family > o.family;
        return index > o.index;
    }
};

/// All clocks of one box, popped in time order.
class ClockQueue {
public:
    ClockQueue(const EventStream& s, const LatticeContext& ctx) : stream_(&s) {
        const auto n = ctx.geometry().sites();
        coords_.reserve(n);
        for (Site x = 0; x < n; ++x) coords_.push_back(ctx.global_coords(x));
        for (Site x = 0; x < n; ++x)
            for (int f = 0; f < 2; ++f) q_.push({stream_->gap(coords_[x], f, 1), x, f, 1});
    }
    [[nodiscard]] const Clock& top() const { return q_.top(); }
    [[nodiscard]] double mark(const Clock& c) const { return stream_->mark(coords_[c.site], c.family, c.index); }
    void advance() {
        Clock c = q_.top();
        q_.pop();
        ++c.index;
        c.t += stream_->gap(coords_[c.site], c.family, c.index);
        q_.push(c);
    }

private:
    const EventStream* stream_;
    std::vector<std::vector<int>> coords_;
    std::priority_queue<Clock, std::vector<Clock>, std::greater<>> q_;
};

inline void finish(Trajectory& tr, const BoxState& s, double t, StopReason r) {
    tr.end_time = t;
    tr.reason = r;
    tr.final_config = s.config;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Graphical construction.

/// One box driven by the shared clocks: at an arrival of family e at x with
/// mark u, the spin flips when it currently differs from e and u < c(x).
/// With an admission test, flips leading outside the admitted set are refused.
inline Trajectory evolve_graphical(const EventStream& stream, const LatticeContext& ctx, const Configuration& initial,
                                   double beta, const StopPredicate& stop_when, const EvolveOptions& opt = {},
                                   const Admission& admit = nullptr) {
    if (!(beta > 0)) throw std::invalid_argument("beta must be > 0");
    detail::BoxState s(ctx, initial);
    Trajectory tr;
    tr.initial = initial;
    if (stop_when(s.view(0.0))) {
        detail::finish(tr, s, 0.0, StopReason::Predicate);
        return tr;
    }
    detail::ClockQueue clocks(stream, ctx);
    while (true) {
        const auto c = clocks.top();
        if (c.t > opt.time_cap) {
            detail::finish(tr, s, opt.time_cap, StopReason::TimeCap);
            return tr;
        }
        if (tr.arrivals >= opt.event_cap) {
            detail::finish(tr, s, c.t, StopReason::EventCap);
            return tr;
        }
        ++tr.arrivals;
        const bool target_plus = c.family == 1;
        if (s.config.plus(c.site) != target_plus) {
            const auto d = s.delta(c.site);
            if (clocks.mark(c) < ctx.rate_of(d, beta) && (!admit || admit(target_plus ? s.volume + 1 : s.volume - 1, s.energy + d))) {
                s.flip(c.site, d);
                ++tr.flips;
                if (opt.record) tr.events.push_back({c.t, c.site, target_plus});
                if (stop_when(s.view(c.t))) {
                    clocks.advance();
                    detail::finish(tr, s, c.t, StopReason::Predicate);
                    return tr;
                }
            }
        }
        clocks.advance();
    }
}

/// Instance of the dynamics sharing a stream: initial state, boundary, field.
struct Scenario {
    Configuration initial;
    BoundaryCondition boundary;
    MagneticField field;
};

/// All scenarios on one geometry consume the identical clocks up to `horizon`.
inline std::vector<Trajectory> coupled_evolve(const EventStream& stream, const BoxGeometry& geometry,
                                              const std::vector<Scenario>& scenarios, double beta, double horizon,
                                              const std::vector<int>& origin = {}) {
    if (!(beta > 0)) throw std::invalid_argument("beta must be > 0");
    std::vector<LatticeContext> ctxs;
    ctxs.reserve(scenarios.size());
    for (const auto& sc : scenarios) ctxs.emplace_back(geometry, sc.boundary, sc.field, origin);
    std::vector<detail::BoxState> states;
    std::vector<Trajectory> out(scenarios.size());
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        states.emplace_back(ctxs[i], scenarios[i].initial);
        out[i].initial = scenarios[i].initial;
    }
    if (scenarios.empty()) return out;
    detail::ClockQueue clocks(stream, ctxs.front());
    while (clocks.top().t <= horizon) {
        const auto c = clocks.top();
        const double u = clocks.mark(c);
        const bool target_plus = c.family == 1;
        for (std::size_t i = 0; i < states.size(); ++i) {
            auto& s = states[i];
            ++out[i].arrivals;
            if (s.config.plus(c.site) == target_plus) continue;
            const auto d = s.delta(c.site);
            if (u < ctxs[i].rate_of(d, beta)) {
                s.flip(c.site, d);
                ++out[i].flips;
                out[i].events.push_back({c.t, c.site, target_plus});
            }
        }
        clocks.advance();
    }
    for (std::size_t i = 0; i < states.size(); ++i) detail::finish(out[i], states[i], horizon, StopReason::TimeCap);
    return out;
}

/// Number of event times at which `lower` fails to be site-wise below `upper`.
inline std::size_t domination_violations(const Trajectory& lower, const Trajectory& upper) {
    Configuration a = lower.initial, b = upper.initial;
    std::size_t bad = a.below(b) ? 0 : 1;
    std::size_t i = 0, j = 0;
    while (i < lower.events.size() || j < upper.events.size()) {
        double t = std::numeric_limits<double>::infinity();
        if (i < lower.events.size()) t = lower.events[i].time;
        if (j < upper.events.size()) t = std::min(t, upper.events[j].time);
        while (i < lower.events.size() && lower.events[i].time == t) {
            a.set(lower.events[i].site, lower.events[i].plus);
            ++i;
        }
        while (j < upper.events.size() && upper.events[j].time == t) {
            b.set(upper.events[j].site, upper.events[j].plus);
            ++j;
        }
        if (!a.below(b)) ++bad;
    }
    return bad;
}

// ---------------------------------------------------------------------------
// Rejection-free sampler.

namespace detail {

/// Complete binary tree of rates; parents are recomputed from children so
/// sums never drift.
class RateTree {
public:
    explicit RateTree(std::size_t n) : size_(1) {
        while (size_ < n) size_ <<= 1;
        t_.assign(2 * size_, 0.0);
    }
    void set(std::size_t i, double v) {
        std::size_t k = i + size_;
        t_[k] = v;
        for (k >>= 1; k >= 1; k >>= 1) t_[k] = t_[2 * k] + t_[2 * k + 1];
    }
    [[nodiscard]] double total() const { return t_[1]; }
    [[nodiscard]] double get(std::size_t i) const { return t_[i + size_]; }
    /// Leaf whose cumulative interval contains r in [0, total).
    [[nodiscard]] std::size_t find(double r) const {
        std::size_t k = 1;
        while (k < size_) {
            if (r < t_[2 * k] || t_[2 * k + 1] <= 0.0) {
                k = 2 * k;
            } else {
                r -= t_[2 * k];
                k = 2 * k + 1;
            }
        }
        return k - size_;
    }

private:
    std::size_t size_;
    std::vector<double> t_;
};

inline double unit(std::mt19937_64& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }

}  // namespace detail

/// Selection law of the next flipped site, read off the sum tree.
inline std::vector<double> jump_probabilities(const LatticeContext& ctx, const Configuration& c, double beta) {
    const detail::BoxState s(ctx, c);
    const auto n = ctx.geometry().sites();
    detail::RateTree tree(n);
    for (Site x = 0; x < n; ++x) tree.set(x, s.rate(x, beta));
    std::vector<double> p(n);
    for (Site x = 0; x < n; ++x) p[x] = tree.get(x) / tree.total();
    return p;
}

/// Embedded jump chain with exponential holding times, drawn from the exact
/// Metropolis rates kept in a sum tree.
inline Trajectory evolve_rejection_free(std::uint64_t seed, const LatticeContext& ctx, const Configuration& initial,
                                        double beta, const StopPredicate& stop_when, const EvolveOptions& opt = {},
                                        const Admission& admit = nullptr) {
    if (!(beta > 0)) throw std::invalid_argument("beta must be > 0");
    std::mt19937_64 rng(seed);
    detail::BoxState s(ctx, initial);
    Trajectory tr;
    tr.initial = initial;
    if (stop_when(s.view(0.0))) {
        detail::finish(tr, s, 0.0, StopReason::Predicate);
        return tr;
    }
    const auto n = ctx.geometry().sites();
    detail::RateTree tree(n);
    auto refresh = [&](Site x) {
        double r = s.rate(x, beta);
        if (admit && r > 0) {
            const auto d = s.delta(x);
            if (!admit(s.config.plus(x) ? s.volume - 1 : s.volume + 1, s.energy + d)) r = 0.0;
        }
        tree.set(x, r);
    };
    for (Site x = 0; x < n; ++x) refresh(x);
    double t = 0.0;
    while (true) {
        const double total = tree.total();
        if (!(total > 0)) {
            detail::finish(tr, s, opt.time_cap, StopReason::TimeCap);
            return tr;
        }
        t += -std::log(detail::unit(rng)) / total;
        if (t > opt.time_cap) {
            detail::finish(tr, s, opt.time_cap, StopReason::TimeCap);
            return tr;
        }
        if (tr.flips >= opt.event_cap) {
            detail::finish(tr, s, t, StopReason::EventCap);
            return tr;
        }
        const Site x = static_cast<Site>(tree.find(detail::unit(rng) * total));
        const auto d = s.delta(x);
        s.flip(x, d);
        ++tr.flips;
        if (opt.record) tr.events.push_back({t, x, s.config.plus(x)});
        if (admit) {
            // admission depends on the global volume and energy
            for (Site y = 0; y < n; ++y) refresh(y);
        } else {
            refresh(x);
            for (Site y : ctx.neighbors(x)) refresh(y);
        }
        if (stop_when(s.view(t))) {
            detail::finish(tr, s, t, StopReason::Predicate);
            return tr;
        }
    }
}

// ---------------------------------------------------------------------------
// Conditioned dynamics.

/// Dynamics whose rates vanish on moves leaving the restricted ensemble.
inline Trajectory evolve_restricted(const EventStream& stream, const RestrictedEnsemble& R, const Configuration& initial,
                                    double beta, const StopPredicate& stop_when, const EvolveOptions& opt = {}) {
    if (!R.admits(initial)) throw std::invalid_argument("initial state outside the restricted ensemble");
    return evolve_graphical(stream, R.context(), initial, beta, stop_when, opt,
                            [&R](std::size_t v, const EnergyValue& e) { return R.admits(v, e); });
}

inline Trajectory evolve_restricted(std::uint64_t seed, const RestrictedEnsemble& R, const Configuration& initial,
                                    double beta, const StopPredicate& stop_when, const EvolveOptions& opt = {}) {
    if (!R.admits(initial)) throw std::invalid_argument("initial state outside the restricted ensemble");
    return evolve_rejection_free(seed, R.context(), initial, beta, stop_when, opt,
                                 [&R](std::size_t v, const EnergyValue& e) { return R.admits(v, e); });
}

/// Stop predicate for the first exit of the restricted ensemble.
inline StopPredicate exits(const RestrictedEnsemble& R) {
    return [&R](const DynView& v) { return !R.admits(v.volume, v.energy); };
}

// ---------------------------------------------------------------------------
// Hitting times.

enum class Mode { Graphical, RejectionFree };

inline Mode parse_mode(const std::string& s) {
    if (s == "graphical") return Mode::Graphical;
    if (s == "rejection-free" || s == "rejection_free") return Mode::RejectionFree;
    throw std::invalid_argument("unknown mode '" + s + "'");
}

struct HittingResult {
    double time = 0.0;
    bool censored = false;
    std::uint64_t flips = 0;
    Configuration final_config;
};

inline HittingResult hitting_time(Mode mode, std::uint64_t seed, const LatticeContext& ctx, const Configuration& initial,
                                  double beta, const StopPredicate& target, EvolveOptions opt = {}) {
    opt.record = false;
    const auto tr = mode == Mode::Graphical ? evolve_graphical(EventStream(seed), ctx, initial, beta, target, opt)
                                            : evolve_rejection_free(seed, ctx, initial, beta, target, opt);
    return {tr.end_time, !tr.hit(), tr.flips, tr.final_config};
}

}  // namespace metastab
