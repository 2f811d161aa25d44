#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "metastab/constants.hpp"
#include "metastab/landscape.hpp"
#include "metastab/lattice.hpp"

namespace metastab {

/// Configurations of a box with volume <= max_volume and energy <= max_energy,
/// with Gibbs weights on demand.
class RestrictedEnsemble {
public:
    RestrictedEnsemble(LatticeContext ctx, std::int64_t max_volume, EnergyValue max_energy)
        : ctx_(std::move(ctx)), max_volume_(max_volume), max_energy_(max_energy) {
        enumerate();
    }

    [[nodiscard]] const LatticeContext& context() const { return ctx_; }
    [[nodiscard]] std::int64_t max_volume() const { return max_volume_; }
    [[nodiscard]] const EnergyValue& max_energy() const { return max_energy_; }
    [[nodiscard]] const std::vector<Configuration>& members() const { return members_; }
    [[nodiscard]] const std::vector<EnergyValue>& energies() const { return energies_; }
    [[nodiscard]] std::size_t size() const { return members_.size(); }

    /// Membership by the defining inequalities.
    [[nodiscard]] bool admits(const Configuration& s) const { return admits(s.volume(), ctx_.hamiltonian(s)); }
    [[nodiscard]] bool admits(std::size_t volume, const EnergyValue& e) const {
        return static_cast<std::int64_t>(volume) <= max_volume_ && ctx_.field().less_equal(e, max_energy_);
    }

    /// Index in members(), or -1.
    [[nodiscard]] long index_of(const Configuration& s) const {
        auto it = std::lower_bound(members_.begin(), members_.end(), s);
        return (it != members_.end() && *it == s) ? static_cast<long>(it - members_.begin()) : -1;
    }

    /// Normalized weights proportional to exp(-beta H).
    [[nodiscard]] std::vector<double> weights(double beta) const {
        std::vector<double> w(members_.size());
        double lo = INFINITY;
        for (const auto& e : energies_) lo = std::min(lo, ctx_.field().value_of(e));
        double total = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) total += w[i] = std::exp(-beta * (ctx_.field().value_of(energies_[i]) - lo));
        for (auto& x : w) x /= total;
        return w;
    }

    /// Upper bound (m+1)|Q|^m on the member count, saturating.
    [[nodiscard]] double count_bound() const {
        return static_cast<double>(max_volume_ + 1) * std::pow(static_cast<double>(ctx_.geometry().sites()), static_cast<double>(max_volume_));
    }

private:
    struct Piece {
        std::vector<Site> sites;
        EnergyValue energy;
    };

    // Connected plus-sets of the box up to the volume cap, each listed once
    // from its smallest site.
    std::vector<Piece> connected_pieces() const {
        std::vector<Piece> out;
        const auto n = ctx_.geometry().sites();
        const auto cap = static_cast<std::size_t>(max_volume_);
        if (cap == 0) return out;
        std::vector<char> seen(n, 0);
        std::vector<Site> current;
        auto recurse = [&](auto&& self, std::vector<Site> untried) -> void {
            while (!untried.empty()) {
                const Site x = untried.back();
                untried.pop_back();
                current.push_back(x);
                out.push_back({current, ctx_.energy_of_sites(current)});
                if (current.size() < cap) {
                    auto next = untried;
                    std::vector<Site> added;
                    for (Site y : ctx_.neighbors(x))
                        if (y > current.front() && !seen[y]) {
                            seen[y] = 1;
                            added.push_back(y);
                            next.push_back(y);
                        }
                    self(self, std::move(next));
                    for (Site y : added) seen[y] = 0;
                }
                current.pop_back();
            }
        };
        for (Site r = 0; r < n; ++r) {
            seen[r] = 1;
            recurse(recurse, {r});
            seen[r] = 0;
        }
        return out;
    }

    void enumerate() {
        auto pieces = connected_pieces();
        const auto& h = ctx_.field();
        std::stable_sort(pieces.begin(), pieces.end(),
                         [&](const Piece& a, const Piece& b) { return h.less(a.energy, b.energy); });
        const auto& g = ctx_.geometry();
        std::vector<int> blocked(g.sites(), 0);
        Configuration cur(g);
        auto mark = [&](const Piece& p, int s) {
            for (Site x : p.sites) {
                blocked[x] += s;
                for (Site y : ctx_.neighbors(x)) blocked[y] += s;
            }
        };
        auto record = [&](const EnergyValue& e) {
            if (h.less_equal(e, max_energy_)) {
                members_.push_back(cur);
                energies_.push_back(e);
            }
        };
        record(EnergyValue::zero());
        auto combine = [&](auto&& self, std::size_t start, std::int64_t volume, const EnergyValue& e) -> void {
            for (std::size_t i = start; i < pieces.size(); ++i) {
                const auto& p = pieces[i];
                const auto ne = e + p.energy;
                if (h.compare(p.energy, EnergyValue::zero()) >= 0 && h.less(max_energy_, ne)) break;
                if (volume + static_cast<std::int64_t>(p.sites.size()) > max_volume_) continue;
                if (std::any_of(p.sites.begin(), p.sites.end(), [&](Site x) { return blocked[x] != 0; })) continue;
                mark(p, 1);
                for (Site x : p.sites) cur.set(x, true);
                record(ne);
                self(self, i + 1, volume + static_cast<std::int64_t>(p.sites.size()), ne);
                for (Site x : p.sites) cur.set(x, false);
                mark(p, -1);
            }
        };
        combine(combine, 0, 0, EnergyValue::zero());
        std::vector<std::size_t> idx(members_.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return members_[a] < members_[b]; });
        std::vector<Configuration> m;
        std::vector<EnergyValue> e;
        for (auto i : idx) {
            m.push_back(members_[i]);
            e.push_back(energies_[i]);
        }
        members_ = std::move(m);
        energies_ = std::move(e);
    }

    LatticeContext ctx_;
    std::int64_t max_volume_;
    EnergyValue max_energy_;
    std::vector<Configuration> members_;
    std::vector<EnergyValue> energies_;
};

/// The n-dimensional restricted ensemble of a box with n+- boundary.
inline RestrictedEnsemble restricted_ensemble(const LatticeContext& ctx, int n, const CriticalConstants& c) {
    const auto& bc = ctx.boundary();
    const bool plain_npm = bc.kind == BoundaryCondition::Kind::NPlusMinus && bc.n == n;
    const bool all_minus = bc.kind == BoundaryCondition::Kind::AllMinus && n == ctx.geometry().d();
    if ((!plain_npm && !all_minus) || !bc.overrides.empty())
        throw std::invalid_argument("restricted ensemble needs the matching n+- boundary");
    if (n < 0 || n > c.d) throw std::invalid_argument("restricted ensemble rank out of range");
    if (!(c.h == ctx.field())) throw std::invalid_argument("constants computed for another field");
    const auto& dc = c.at(n);
    return RestrictedEnsemble(ctx, dc.m, n == 0 ? EnergyValue::zero() : dc.gamma);
}

struct DomainReport {
    bool volume_ok = true;
    bool components_ok = true;
    bool closure_ok = true;
    std::vector<std::string> counterexamples;

    [[nodiscard]] bool ok() const { return volume_ok && components_ok && closure_ok; }
};

/// Checks the three domain conditions: bounded volume, every component above
/// the ground energy, and closure under sub-configurations of no larger energy.
inline DomainReport domain_hypothesis_check(const LandscapeGraph& G, const StateSet& D, std::int64_t volume_bound) {
    if (!G.implicit()) throw std::invalid_argument("domain check needs an enumerated lattice landscape");
    const auto& ctx = *G.context();
    const auto& h = G.field();
    const auto inD = G.membership(D);
    const auto ground = ctx.energy_of_mask(0);
    DomainReport r;
    auto note = [&](const std::string& what, StateId s) {
        if (r.counterexamples.size() < 32) r.counterexamples.push_back(what + ": state " + std::to_string(s));
    };
    for (StateId s : D) {
        const auto cfg = Configuration::from_mask(ctx.geometry(), s);
        if (static_cast<std::int64_t>(cfg.volume()) > volume_bound) {
            r.volume_ok = false;
            note("volume", s);
        }
        for (const auto& c : ctx.connected_components(cfg))
            if (!h.less(ground, c.energy)) {
                r.components_ok = false;
                note("component", s);
                break;
            }
        const auto e = G.energy(s);
        for (StateId sub = s; sub != 0;) {
            sub = (sub - 1) & s;
            if (!inD[sub] && h.less_equal(G.energy(sub), e)) {
                r.closure_ok = false;
                note("closure", s);
                break;
            }
        }
    }
    return r;
}

/// Members of a restricted ensemble as landscape state ids.
inline StateSet states_of(const RestrictedEnsemble& R) {
    StateSet out;
    for (const auto& m : R.members()) out.push_back(static_cast<StateId>(m.mask()));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace metastab
