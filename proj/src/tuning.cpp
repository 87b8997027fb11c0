#include "tclsafe/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace tclsafe {

SafetyAssignment random_blocking(std::size_t n, double fraction, Rng& rng) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("random_blocking: fraction outside [0, 1]");
    SafetyAssignment a = SafetyAssignment::free(n);
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    // Partial Fisher-Yates with the project RNG so the draw is portable.
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t j = k + static_cast<std::size_t>(rng.uniform() * static_cast<double>(n - k));
        std::swap(ids[k], ids[std::min(j, n - 1)]);
        a.tags[ids[k]].kind = SafetyKind::Blocked;
    }
    return a;
}

ScenarioConfig tuning_config(const ScenarioConfig& cfg, const TuningOptions& opt) {
    if (opt.trials < 1) throw std::invalid_argument("tuning: need at least one trial");
    ScenarioConfig t = cfg;
    t.trials = opt.trials;
    t.seed = Rng::derive(opt.seed, 1);
    t.signal.seed = Rng::derive(opt.seed, 2);
    t.signal.csv_path.reset();
    return t;
}

namespace {

struct Evaluator {
    Scenario sc;
    // blocked[level index][trial]
    std::vector<std::vector<SafetyAssignment>> blocked;

    Evaluator(const ScenarioConfig& cfg, const std::vector<double>& levels) : sc(prepare_scenario(cfg)) {
        for (std::size_t l = 0; l < levels.size(); ++l) {
            std::vector<SafetyAssignment> per_trial;
            for (const auto& tr : sc.trials) {
                Rng rng(Rng::derive(tr.seed, 500 + l));
                per_trial.push_back(random_blocking(sc.units(), levels[l], rng));
            }
            blocked.push_back(std::move(per_trial));
        }
    }

    double average(Strategy s, bool comm, const std::vector<std::size_t>& level_ids) {
        double sum = 0.0;
        int runs = 0;
        for (std::size_t l : level_ids)
            for (int k = 0; k < static_cast<int>(sc.trials.size()); ++k) {
                sum += run_trial(sc, k, {s, comm, false}, blocked[l][static_cast<std::size_t>(k)]).rms_pct;
                ++runs;
            }
        return sum / runs;
    }
};

std::size_t level_index(const std::vector<double>& levels, double f) {
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (std::abs(levels[i] - f) < 1e-12) return i;
    throw std::invalid_argument("tuning: no-comm level is not one of the tuning levels");
}

} // namespace

TuningResult tune_gains(const ScenarioConfig& cfg, const TuningOptions& opt) {
    const TuningGrid& g = opt.grid;
    if (g.k.empty() || g.kp.empty() || g.ti.empty()) throw std::invalid_argument("tuning: empty grid");
    if (opt.levels.empty() || opt.no_comm_levels.empty()) throw std::invalid_argument("tuning: no blocking levels");

    Evaluator ev(tuning_config(cfg, opt), opt.levels);
    ControllerTuning& tun = ev.sc.cfg.tuning;
    TuningResult res;
    res.tuning = cfg.tuning;

    std::vector<std::size_t> no_comm_ids;
    for (double f : opt.no_comm_levels) no_comm_ids.push_back(level_index(opt.levels, f));

    // Each search returns the best value over the given levels. With a
    // fallback, the best only wins if it beats the fallback's RMS by the
    // required margin.
    const double keep = 1.0 - opt.min_improvement;
    auto search_k = [&](bool comm, const std::vector<std::size_t>& ids, double level, std::optional<double> fallback) {
        double best = g.k.front(), best_rms = std::numeric_limits<double>::infinity();
        double fallback_rms = std::numeric_limits<double>::infinity();
        for (double k : g.k) {
            tun.k = k;
            tun.k_schedule = GainSchedule::constant(k);
            const double rms = ev.average(Strategy::Strategy1, comm, ids);
            res.rows.push_back({Strategy::Strategy1, comm, level, k, 0.0, 0.0, rms});
            if (fallback && k == *fallback) fallback_rms = rms;
            if (rms < best_rms) {
                best_rms = rms;
                best = k;
            }
        }
        return fallback && best_rms >= keep * fallback_rms ? *fallback : best;
    };
    auto search_pi = [&](bool comm, const std::vector<std::size_t>& ids, double level, std::optional<PiGains> fallback) {
        PiGains best{g.kp.front(), g.ti.front()};
        double best_rms = std::numeric_limits<double>::infinity();
        double fallback_rms = std::numeric_limits<double>::infinity();
        for (double kp : g.kp)
            for (double ti : g.ti) {
                tun.pi = {kp, ti};
                tun.kp_schedule = GainSchedule::constant(kp);
                tun.ti_schedule = GainSchedule::constant(ti);
                const double rms = ev.average(Strategy::Benchmark, comm, ids);
                res.rows.push_back({Strategy::Benchmark, comm, level, 0.0, kp, ti, rms});
                if (fallback && kp == fallback->kp && ti == fallback->ti) fallback_rms = rms;
                if (rms < best_rms) {
                    best_rms = rms;
                    best = {kp, ti};
                }
            }
        return fallback && best_rms >= keep * fallback_rms ? *fallback : best;
    };

    res.tuning.k = search_k(false, no_comm_ids, -1.0, std::nullopt);
    res.tuning.pi = search_pi(false, no_comm_ids, -1.0, std::nullopt);

    // The no-comm gains are the fallback at every level, so a schedule entry
    // only moves when the level-specific gain is clearly better.
    std::vector<double> k_values, kp_values, ti_values;
    for (std::size_t l = 0; l < opt.levels.size(); ++l) {
        k_values.push_back(search_k(true, {l}, opt.levels[l], res.tuning.k));
        const PiGains p = search_pi(true, {l}, opt.levels[l], res.tuning.pi);
        kp_values.push_back(p.kp);
        ti_values.push_back(p.ti);
    }
    res.tuning.k_schedule = GainSchedule(opt.levels, k_values);
    res.tuning.kp_schedule = GainSchedule(opt.levels, kp_values);
    res.tuning.ti_schedule = GainSchedule(opt.levels, ti_values);
    return res;
}

} // namespace tclsafe
