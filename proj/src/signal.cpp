#include "tclsafe/signal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "tclsafe/random.hpp"

namespace tclsafe {

double RegulationSignal::at(std::size_t k) const {
    if (values.empty()) return 0.0;
    return values[std::min(k, values.size() - 1)];
}

double RegulationSignal::mean() const {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

RegulationSignal synthesize_signal(const SignalSynthesis& spec, std::size_t samples) {
    if (!(spec.dt_s > 0) || !(spec.cutoff_hz > 0) || spec.cutoff_hz >= 0.5 / spec.dt_s)
        throw std::invalid_argument("synthesize_signal: cutoff must lie below the Nyquist rate");
    RegulationSignal sig;
    sig.dt_s = spec.dt_s;
    if (samples == 0) return sig;

    // Bilinear-transform Butterworth biquad.
    const double k = std::tan(std::numbers::pi * spec.cutoff_hz * spec.dt_s);
    const double q = std::numbers::sqrt2 / 2.0;
    const double norm = 1.0 / (1.0 + k / q + k * k);
    const double b0 = k * k * norm, b1 = 2.0 * b0, b2 = b0;
    const double a1 = 2.0 * (k * k - 1.0) * norm;
    const double a2 = (1.0 - k / q + k * k) * norm;

    Rng rng(spec.seed);
    const std::size_t warmup = 500;
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    std::vector<double> y;
    y.reserve(samples);
    for (std::size_t i = 0; i < warmup + samples; ++i) {
        const double x = rng.normal();
        const double out = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x;
        y2 = y1;
        y1 = out;
        if (i >= warmup) y.push_back(out);
    }

    const double m = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double var = 0.0;
    for (double v : y) var += (v - m) * (v - m);
    const double sd = std::sqrt(var / static_cast<double>(y.size()));
    for (double& v : y) v = sd > 0 ? (v - m) * spec.target_std / sd : 0.0;

    // Clipping shifts the mean; alternate shifting and clipping until it settles.
    for (int it = 0; it < 50; ++it) {
        for (double& v : y) v = std::clamp(v, -1.0, 1.0);
        const double mu = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
        if (std::abs(mu) < 0.25 * spec.max_abs_mean) break;
        for (double& v : y) v -= mu;
    }
    for (double& v : y) v = std::clamp(v, -1.0, 1.0);
    sig.values = std::move(y);
    return sig;
}

namespace {

bool parse_double(const std::string& s, double& out) {
    std::size_t pos = 0;
    try {
        out = std::stod(s, &pos);
    } catch (const std::exception&) {
        return false;
    }
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    return pos == s.size() && std::isfinite(out);
}

} // namespace

RegulationSignal read_signal_csv(std::istream& in, double dt_s, std::vector<std::string>* warnings) {
    if (!(dt_s > 0)) throw std::invalid_argument("read_signal_csv: cadence must be positive");
    auto warn = [&](const std::string& w) {
        if (warnings) warnings->push_back(w);
    };
    std::vector<double> ts, vs;
    std::string line;
    int lineno = 0;
    bool first_data = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto nonblank = line.find_first_not_of(" \t");
        if (nonblank == std::string::npos || line[nonblank] == '#') continue;
        const auto comma = line.find(',');
        double t = 0, v = 0;
        const bool ok = comma != std::string::npos && parse_double(line.substr(0, comma), t) &&
                        parse_double(line.substr(comma + 1), v);
        if (!ok) {
            if (first_data && ts.empty()) {
                first_data = false; // header row
                continue;
            }
            throw std::runtime_error("signal CSV line " + std::to_string(lineno) + ": expected 't,value'");
        }
        first_data = false;
        if (!ts.empty() && t <= ts.back())
            throw std::runtime_error("signal CSV line " + std::to_string(lineno) + ": time not increasing");
        if (v < -1.0 || v > 1.0) {
            warn("line " + std::to_string(lineno) + ": value clipped to [-1, 1]");
            v = std::clamp(v, -1.0, 1.0);
        }
        ts.push_back(t);
        vs.push_back(v);
    }
    if (ts.empty()) throw std::runtime_error("signal CSV: no samples");

    RegulationSignal sig;
    sig.dt_s = dt_s;
    bool on_cadence = true;
    for (std::size_t i = 0; i < ts.size(); ++i)
        if (std::abs(ts[i] - ts[0] - static_cast<double>(i) * dt_s) > 1e-6 * dt_s) on_cadence = false;
    if (on_cadence) {
        sig.values = std::move(vs);
        return sig;
    }
    warn("signal CSV: samples off the " + std::to_string(dt_s) + " s cadence, resampled by linear interpolation");
    const std::size_t n = static_cast<std::size_t>(std::floor((ts.back() - ts.front()) / dt_s + 1e-9)) + 1;
    sig.values.reserve(n);
    std::size_t j = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = ts.front() + static_cast<double>(k) * dt_s;
        while (j + 1 < ts.size() && ts[j + 1] < t) ++j;
        if (j + 1 >= ts.size()) {
            sig.values.push_back(vs.back());
            continue;
        }
        const double w = (t - ts[j]) / (ts[j + 1] - ts[j]);
        sig.values.push_back(vs[j] + std::clamp(w, 0.0, 1.0) * (vs[j + 1] - vs[j]));
    }
    return sig;
}

RegulationSignal read_signal_csv_file(const std::string& path, double dt_s, std::vector<std::string>* warnings) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open signal file " + path);
    return read_signal_csv(f, dt_s, warnings);
}

void write_signal_csv(std::ostream& out, const RegulationSignal& sig) {
    out << "t_s,value\n";
    out.precision(17);
    for (std::size_t k = 0; k < sig.values.size(); ++k) out << static_cast<double>(k) * sig.dt_s << ',' << sig.values[k] << '\n';
}

} // namespace tclsafe
