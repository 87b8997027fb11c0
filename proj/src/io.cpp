#include "tclsafe/io.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tclsafe {

namespace {

// Reads optional keys and rejects anything it was not asked about.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw std::runtime_error(where_ + ": expected an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw std::runtime_error(where_ + "." + key + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string path(const char* key) const { return where_ + "." + key; }

    void done() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw std::runtime_error(where_ + ": unknown key '" + k + "'");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void get_range(Fields& f, const char* key, Range& r) {
    std::vector<double> v{r.lo, r.hi};
    f.get(key, v);
    if (v.size() != 2) throw std::runtime_error(f.path(key) + ": expected [lo, hi]");
    r = {v[0], v[1]};
}

void get_complex(Fields& f, const char* key, Complex& z) {
    std::vector<double> v{z.real(), z.imag()};
    f.get(key, v);
    if (v.size() != 2) throw std::runtime_error(f.path(key) + ": expected [r, x]");
    z = {v[0], v[1]};
}

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

void get_schedule(Fields& f, const char* key, GainSchedule& s) {
    const json* j = f.child(key);
    if (!j) return;
    Fields g(*j, f.path(key));
    std::vector<double> levels = s.knots(), values = s.values();
    g.get("levels", levels);
    g.get("values", values);
    g.done();
    s = GainSchedule(levels, values);
}

json schedule_json(const GainSchedule& s) { return {{"levels", s.knots()}, {"values", s.values()}}; }

} // namespace

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

json feeder_to_json(const Feeder& f) {
    json nodes = json::array();
    for (const auto& nd : f.nodes)
        nodes.push_back({{"name", nd.name},
                         {"parent", nd.parent},
                         {"r_ohm", nd.r_ohm},
                         {"x_ohm", nd.x_ohm},
                         {"length_km", nd.length_km},
                         {"ampacity_a", nd.ampacity_a},
                         {"transformer_kva", nd.transformer_kva},
                         {"service", nd.service}});
    return {{"base_kv", f.base_kv}, {"substation_vpu", f.substation_vpu}, {"baseload_kw", f.baseload_kw},
            {"baseload_pf", f.baseload_pf}, {"nodes", nodes}, {"house_node", f.house_node}};
}

Feeder feeder_from_json(const json& j) {
    Feeder f;
    Fields top(j, "feeder");
    top.get("base_kv", f.base_kv);
    top.get("substation_vpu", f.substation_vpu);
    top.get("baseload_kw", f.baseload_kw);
    top.get("baseload_pf", f.baseload_pf);
    top.get("house_node", f.house_node);
    if (const json* nodes = top.child("nodes")) {
        for (std::size_t i = 0; i < nodes->size(); ++i) {
            Fields nf(nodes->at(i), "feeder.nodes[" + std::to_string(i) + "]");
            FeederNode nd;
            nf.get("name", nd.name);
            nf.get("parent", nd.parent);
            nf.get("r_ohm", nd.r_ohm);
            nf.get("x_ohm", nd.x_ohm);
            nf.get("length_km", nd.length_km);
            nf.get("ampacity_a", nd.ampacity_a);
            nf.get("transformer_kva", nd.transformer_kva);
            nf.get("service", nd.service);
            nf.done();
            f.nodes.push_back(nd);
        }
    }
    top.done();
    f.validate();
    return f;
}

Feeder read_feeder_file(const std::string& path) { return feeder_from_json(read_json_file(path)); }

json assignment_to_json(const SafetyAssignment& a) {
    json tags = json::array();
    for (const auto& t : a.tags) {
        switch (t.kind) {
        case SafetyKind::Free: tags.push_back("free"); break;
        case SafetyKind::Blocked: tags.push_back("blocked"); break;
        case SafetyKind::Group: tags.push_back(t.group); break;
        }
    }
    json groups = json::array();
    for (const auto& g : a.groups)
        groups.push_back({{"id", g.id},
                          {"members", g.members},
                          {"kind", g.kind == BoundKind::Upper ? "upper" : "lower"},
                          {"bound", g.bound}});
    return {{"units", a.size()}, {"tags", tags}, {"groups", groups}};
}

SafetyAssignment assignment_from_json(const json& j) {
    SafetyAssignment a;
    Fields top(j, "assignment");
    std::size_t units = 0;
    top.get("units", units);
    if (const json* tags = top.child("tags")) {
        for (std::size_t i = 0; i < tags->size(); ++i) {
            const json& t = tags->at(i);
            SafetyTag tag;
            if (t.is_string() && t == "free") tag.kind = SafetyKind::Free;
            else if (t.is_string() && t == "blocked") tag.kind = SafetyKind::Blocked;
            else if (t.is_number_integer()) tag = {SafetyKind::Group, t.get<int>()};
            else throw std::runtime_error("assignment.tags[" + std::to_string(i) + "]: expected \"free\", \"blocked\" or a group id");
            a.tags.push_back(tag);
        }
    }
    if (const json* groups = top.child("groups")) {
        for (std::size_t i = 0; i < groups->size(); ++i) {
            Fields gf(groups->at(i), "assignment.groups[" + std::to_string(i) + "]");
            ModeCountGroup g;
            std::string kind = "upper";
            gf.get("id", g.id);
            gf.get("members", g.members);
            gf.get("kind", kind);
            gf.get("bound", g.bound);
            gf.done();
            if (kind != "upper" && kind != "lower") throw std::runtime_error("assignment group kind must be upper or lower");
            g.kind = kind == "upper" ? BoundKind::Upper : BoundKind::Lower;
            a.groups.push_back(std::move(g));
        }
    }
    top.done();
    if (a.tags.empty() && units > 0) a.tags.resize(units);
    if (units != 0 && a.tags.size() != units) throw std::runtime_error("assignment: tag count does not match units");
    a.validate();
    return a;
}

SafetyAssignment read_assignment_file(const std::string& path) { return assignment_from_json(read_json_file(path)); }

ScenarioConfig scenario_from_json(const json& j) {
    ScenarioConfig c;
    Fields top(j, "scenario");
    if (const json* p = top.child("population")) {
        Fields f(*p, "scenario.population");
        f.get("n", c.population.n);
        f.get("seed", c.population.seed);
        f.get("tau_lock", c.population.tau_lock);
        f.get("pf", c.population.pf);
        if (const json* r = f.child("ranges")) {
            Fields rf(*r, "scenario.population.ranges");
            auto& rg = c.population.ranges;
            get_range(rf, "r", rg.r);
            get_range(rf, "c", rg.c);
            get_range(rf, "p_theta", rg.p_theta);
            get_range(rf, "theta_set", rg.theta_set);
            get_range(rf, "delta", rg.delta);
            get_range(rf, "zeta", rg.zeta);
            rf.done();
        }
        f.done();
    }
    top.get("theta_a", c.theta_a);
    top.get("h_seconds", c.h_seconds);
    top.get("n_intervals", c.bins.n_intervals);
    if (const json* fp = top.child("feeder_file")) c.feeder_path = fp->get<std::string>();
    if (const json* fj = top.child("feeder")) {
        Fields f(*fj, "scenario.feeder");
        auto& s = c.feeder;
        f.get("seed", s.seed);
        f.get("base_kv", s.base_kv);
        f.get("substation_vpu", s.substation_vpu);
        f.get("trunk_nodes", s.trunk_nodes);
        f.get("lateral_nodes", s.lateral_nodes);
        f.get("trunk_km", s.trunk_km);
        f.get("lateral_km", s.lateral_km);
        f.get("service_km", s.service_km);
        get_complex(f, "trunk_z_per_km", s.trunk_z_per_km);
        get_complex(f, "lateral_z_per_km", s.lateral_z_per_km);
        get_complex(f, "service_z", s.service_z);
        get_complex(f, "weak_service_z_unit", s.weak_service_z_unit);
        f.get("houses_min", s.houses_min);
        f.get("houses_max", s.houses_max);
        f.get("heavy_laterals", s.heavy_laterals);
        f.get("heavy_weight", s.heavy_weight);
        f.get("weak_nodes", s.weak_nodes);
        f.get("weak_houses", s.weak_houses);
        f.get("weak_duty", s.weak_duty);
        f.get("weak_margin_pu", s.weak_margin_pu);
        f.get("rating_factor", s.rating_factor);
        f.get("peak_floor_pu", s.peak_floor_pu);
        f.get("baseload_kw", s.baseload_kw);
        f.get("baseload_pf", s.baseload_pf);
        f.done();
    }
    if (const json* sj = top.child("signal")) {
        Fields f(*sj, "scenario.signal");
        if (const json* csv = f.child("csv")) c.signal.csv_path = csv->get<std::string>();
        f.get("cutoff_hz", c.signal.cutoff_hz);
        f.get("std", c.signal.target_std);
        f.get("seed", c.signal.seed);
        f.done();
    }
    top.get("amplitude", c.amplitude);
    top.get("horizon_s", c.horizon_s);
    top.get("prerun_s", c.prerun_s);
    top.get("identification_excitation", c.identification_excitation);
    top.get("estimator_warmup_s", c.estimator_warmup_s);
    top.get("trials", c.trials);
    top.get("seed", c.seed);
    if (const json* tj = top.child("tuning")) {
        Fields f(*tj, "scenario.tuning");
        if (const json* ej = f.child("estimator")) {
            Fields e(*ej, "scenario.tuning.estimator");
            e.get("q_unlocked", c.tuning.estimator.q_unlocked);
            e.get("q_locked", c.tuning.estimator.q_locked);
            e.get("r_power", c.tuning.estimator.r_power);
            e.get("project_nonnegative", c.tuning.estimator.project_nonnegative);
            e.done();
        }
        std::string units = c.tuning.pi_error == PiErrorUnits::PerKw ? "per_kw" : "normalized";
        f.get("pi_error", units);
        if (units == "normalized") c.tuning.pi_error = PiErrorUnits::Normalized;
        else if (units == "per_kw") c.tuning.pi_error = PiErrorUnits::PerKw;
        else throw std::runtime_error("scenario.tuning.pi_error: expected 'normalized' or 'per_kw'");
        f.get("k", c.tuning.k);
        f.get("kp", c.tuning.pi.kp);
        f.get("ti_s", c.tuning.pi.ti);
        get_schedule(f, "k_schedule", c.tuning.k_schedule);
        get_schedule(f, "kp_schedule", c.tuning.kp_schedule);
        get_schedule(f, "ti_schedule", c.tuning.ti_schedule);
        f.get("p_small_fraction", c.tuning.p_small_fraction);
        f.done();
    }
    if (const json* lj = top.child("limits")) {
        Fields f(*lj, "scenario.limits");
        f.get("v_min_pu", c.limits.v_min_pu);
        f.get("v_max_pu", c.limits.v_max_pu);
        f.get("line_fraction", c.limits.line_fraction);
        f.get("transformer_fraction", c.limits.transformer_fraction);
        f.get("transformer_window_hours", c.limits.transformer_window_hours);
        f.done();
    }
    top.done();
    return c;
}

json scenario_to_json(const ScenarioConfig& c) {
    const auto& rg = c.population.ranges;
    auto range = [](const Range& r) { return json::array({r.lo, r.hi}); };
    const auto& s = c.feeder;
    json j = {
        {"population",
         {{"n", c.population.n},
          {"seed", c.population.seed},
          {"tau_lock", c.population.tau_lock},
          {"pf", c.population.pf},
          {"ranges",
           {{"r", range(rg.r)},
            {"c", range(rg.c)},
            {"p_theta", range(rg.p_theta)},
            {"theta_set", range(rg.theta_set)},
            {"delta", range(rg.delta)},
            {"zeta", range(rg.zeta)}}}}},
        {"theta_a", c.theta_a},
        {"h_seconds", c.h_seconds},
        {"n_intervals", c.bins.n_intervals},
        {"feeder",
         {{"seed", s.seed},
          {"base_kv", s.base_kv},
          {"substation_vpu", s.substation_vpu},
          {"trunk_nodes", s.trunk_nodes},
          {"lateral_nodes", s.lateral_nodes},
          {"trunk_km", s.trunk_km},
          {"lateral_km", s.lateral_km},
          {"service_km", s.service_km},
          {"trunk_z_per_km", complex_json(s.trunk_z_per_km)},
          {"lateral_z_per_km", complex_json(s.lateral_z_per_km)},
          {"service_z", complex_json(s.service_z)},
          {"weak_service_z_unit", complex_json(s.weak_service_z_unit)},
          {"houses_min", s.houses_min},
          {"houses_max", s.houses_max},
          {"heavy_laterals", s.heavy_laterals},
          {"heavy_weight", s.heavy_weight},
          {"weak_nodes", s.weak_nodes},
          {"weak_houses", s.weak_houses},
          {"weak_duty", s.weak_duty},
          {"weak_margin_pu", s.weak_margin_pu},
          {"rating_factor", s.rating_factor},
          {"peak_floor_pu", s.peak_floor_pu},
          {"baseload_kw", s.baseload_kw},
          {"baseload_pf", s.baseload_pf}}},
        {"signal", {{"cutoff_hz", c.signal.cutoff_hz}, {"std", c.signal.target_std}, {"seed", c.signal.seed}}},
        {"amplitude", c.amplitude},
        {"horizon_s", c.horizon_s},
        {"prerun_s", c.prerun_s},
        {"identification_excitation", c.identification_excitation},
        {"estimator_warmup_s", c.estimator_warmup_s},
        {"trials", c.trials},
        {"seed", c.seed},
        {"tuning",
         {{"estimator",
           {{"q_unlocked", c.tuning.estimator.q_unlocked},
            {"q_locked", c.tuning.estimator.q_locked},
            {"r_power", c.tuning.estimator.r_power},
            {"project_nonnegative", c.tuning.estimator.project_nonnegative}}},
          {"pi_error", c.tuning.pi_error == PiErrorUnits::PerKw ? "per_kw" : "normalized"},
          {"k", c.tuning.k},
          {"kp", c.tuning.pi.kp},
          {"ti_s", c.tuning.pi.ti},
          {"k_schedule", schedule_json(c.tuning.k_schedule)},
          {"kp_schedule", schedule_json(c.tuning.kp_schedule)},
          {"ti_schedule", schedule_json(c.tuning.ti_schedule)},
          {"p_small_fraction", c.tuning.p_small_fraction}}},
        {"limits",
         {{"v_min_pu", c.limits.v_min_pu},
          {"v_max_pu", c.limits.v_max_pu},
          {"line_fraction", c.limits.line_fraction},
          {"transformer_fraction", c.limits.transformer_fraction},
          {"transformer_window_hours", c.limits.transformer_window_hours}}}};
    if (c.signal.csv_path) j["signal"]["csv"] = *c.signal.csv_path;
    if (c.feeder_path) j["feeder_file"] = *c.feeder_path;
    return j;
}

ScenarioConfig read_scenario_file(const std::string& path) { return scenario_from_json(read_json_file(path)); }

json metrics_to_json(const TrialMetrics& m) {
    json comps = json::array();
    for (const auto& c : m.components)
        comps.push_back({{"type", to_string(c.type)}, {"node", c.node}, {"ticks", c.ticks}, {"max_severity", c.max_severity}});
    return {{"strategy", to_string(m.strategy)},
            {"comm", m.comm},
            {"safety", m.safety},
            {"trial", m.trial},
            {"baseline_kw", m.baseline_kw},
            {"rms_pct", m.rms_pct},
            {"safety_fraction_pct", m.safety_fraction_pct},
            {"blocked", m.blocked},
            {"grouped", m.grouped},
            {"over_current", m.over_current},
            {"under_voltage", m.under_voltage},
            {"over_voltage", m.over_voltage},
            {"transformer_overload", m.transformer_overload},
            {"violation_ticks", m.violation_ticks},
            {"saturation_events", m.saturation_events},
            {"infeasible_events", m.infeasible_events},
            {"estimator_jitter", m.estimator_jitter},
            {"min_voltage_pu", m.min_voltage_pu},
            {"components", comps}};
}

TrialMetrics metrics_from_json(const json& j) {
    TrialMetrics m;
    m.strategy = parse_strategy(j.at("strategy").get<std::string>());
    m.comm = j.at("comm").get<bool>();
    m.safety = j.value("safety", true);
    m.trial = j.at("trial").get<int>();
    m.baseline_kw = j.value("baseline_kw", 0.0);
    m.rms_pct = j.at("rms_pct").get<double>();
    m.safety_fraction_pct = j.at("safety_fraction_pct").get<double>();
    m.blocked = j.value("blocked", std::size_t{0});
    m.grouped = j.value("grouped", std::size_t{0});
    m.over_current = j.value("over_current", std::size_t{0});
    m.under_voltage = j.value("under_voltage", std::size_t{0});
    m.over_voltage = j.value("over_voltage", std::size_t{0});
    m.transformer_overload = j.value("transformer_overload", std::size_t{0});
    m.violation_ticks = j.value("violation_ticks", 0);
    m.saturation_events = j.value("saturation_events", 0);
    m.infeasible_events = j.value("infeasible_events", 0);
    m.estimator_jitter = j.value("estimator_jitter", 0);
    m.min_voltage_pu = j.value("min_voltage_pu", 0.0);
    if (j.contains("components"))
        for (const auto& c : j.at("components")) {
            const std::string type = c.at("type").get<std::string>();
            ComponentViolation v{};
            bool known = false;
            for (ViolationType t : {ViolationType::OverCurrent, ViolationType::UnderVoltage, ViolationType::OverVoltage,
                                    ViolationType::TransformerOverload})
                if (type == to_string(t)) {
                    v.type = t;
                    known = true;
                }
            if (!known) throw std::runtime_error("metrics: unknown violation type '" + type + "'");
            v.node = c.at("node").get<int>();
            v.ticks = c.at("ticks").get<int>();
            v.max_severity = c.at("max_severity").get<double>();
            m.components.push_back(v);
        }
    return m;
}

void write_trace_csv(std::ostream& out, const TrialMetrics& m) {
    out << "t_s,p_kw,target_kw,command,min_voltage_pu,violations,delta_p_safety,est_hot_off,responsive_hot_off,total_hot_off\n";
    out.precision(10);
    for (const auto& t : m.trace)
        out << t.t_s << ',' << t.p_kw << ',' << t.target_kw << ',' << t.command << ',' << t.min_voltage_pu << ','
            << t.violations << ',' << t.delta_p_safety << ',' << t.est_hot_off << ',' << t.responsive_hot_off << ','
            << t.total_hot_off << '\n';
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
    out.precision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index k = 0; k < m.cols(); ++k) out << (k ? "," : "") << m(i, k);
        out << '\n';
    }
}

Eigen::MatrixXd read_matrix_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::runtime_error("matrix CSV line " + std::to_string(lineno) + ": not a number");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("matrix CSV line " + std::to_string(lineno) + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("matrix CSV: empty");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    return m;
}

void write_bin_history_csv(std::ostream& out, const BinHistory& h) {
    for (const auto& row : h) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << '\n';
    }
}

BinHistory read_bin_history_csv(std::istream& in) {
    BinHistory h;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::vector<int> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                row.push_back(std::stoi(cell, &pos));
            } catch (const std::exception&) {
                throw std::runtime_error("bin history line " + std::to_string(lineno) + ": not an integer");
            }
        }
        if (!h.empty() && row.size() != h.front().size())
            throw std::runtime_error("bin history line " + std::to_string(lineno) + ": unit count changed");
        h.push_back(std::move(row));
    }
    if (h.empty()) throw std::runtime_error("bin history: empty");
    return h;
}

} // namespace tclsafe
