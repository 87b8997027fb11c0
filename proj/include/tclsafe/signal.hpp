#pragma once

// Normalized regulation signal: synthesis and CSV ingest.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace tclsafe {

struct RegulationSignal {
    double dt_s = 2.0;
    std::vector<double> values; // in [-1, 1]

    std::size_t size() const { return values.size(); }
    /// Sample k, holding the last value past the end.
    double at(std::size_t k) const;
    double mean() const;
};

struct SignalSynthesis {
    std::uint64_t seed = 1;
    double cutoff_hz = 0.01;
    double target_std = 0.45;
    double dt_s = 2.0;
    double max_abs_mean = 0.02;
};

/// White noise through a second-order Butterworth low-pass, scaled, de-meaned
/// and clipped to [-1, 1].
RegulationSignal synthesize_signal(const SignalSynthesis& spec, std::size_t samples);

/// Parses `t,value` rows (optional header, '#' comments). A malformed row
/// throws with its line number. Rows off the `dt_s` cadence are resampled by
/// linear interpolation; each adjustment is appended to `warnings`.
RegulationSignal read_signal_csv(std::istream& in, double dt_s, std::vector<std::string>* warnings = nullptr);
RegulationSignal read_signal_csv_file(const std::string& path, double dt_s,
                                      std::vector<std::string>* warnings = nullptr);

void write_signal_csv(std::ostream& out, const RegulationSignal& sig);

} // namespace tclsafe
