#pragma once

// Population bin model with locked states.
//
// State ordering (0-based, N = n_intervals):
//   [0, N)      off, unlocked, coolest interval first
//   [N, 2N)     on, unlocked, hottest interval first (bin 2N-1 is the coolest on bin)
//   [2N, 3N)    off, locked
//   [3N, 4N)    on, locked
// Locked bins are offset by 2N from the unlocked bin of the same mode and interval.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "tclsafe/tcl.hpp"

namespace tclsafe {

struct BinConfig {
    int n_intervals = 5;

    int unlocked_bins() const { return 2 * n_intervals; }
    int total_bins() const { return 4 * n_intervals; }
    void validate() const;
};

/// Temperature interval in [1, N], 1 = coolest. Temperatures are clamped to the deadband.
int temperature_interval(double theta, const TclParams& params, const BinConfig& cfg);

int bin_index(const TclState& state, const TclParams& params, const BinConfig& cfg);

/// Bin of the unlocked state with the given mode and interval.
int unlocked_bin(bool on, int interval, const BinConfig& cfg);

/// Per-tick bin occupancy traces: history[t][unit] = bin index.
using BinHistory = std::vector<std::vector<int>>;

/// skip[t][unit] != 0 marks a unit switched externally between ticks t and t+1.
using SwitchMask = std::vector<std::vector<char>>;

/// Counts bin-to-bin transitions of uncontrolled units. Column j holds the
/// empirical distribution of the next bin given bin j; unvisited columns get a
/// self-loop. Transitions flagged in `skip` are left out, so a history with
/// random external switching still yields the internal dynamics (including
/// the locked bins that only external switches reach).
Eigen::MatrixXd identify_As(const BinHistory& history, const BinConfig& cfg, const SwitchMask* skip = nullptr);

/// External transition matrix for a command vector of length 2N.
Eigen::MatrixXd build_Au(std::span<const double> u, const BinConfig& cfg);

/// 2 x 4N output matrix: row 0 = mean on-power times population size on all on
/// bins, row 1 = ones.
Eigen::MatrixXd output_matrix(double p_on_total, const BinConfig& cfg);

/// Occupancy fractions of a population.
Eigen::VectorXd occupancy(std::span<const TclState> states, std::span<const TclParams> params,
                          const BinConfig& cfg);

struct Prediction {
    Eigen::VectorXd x_pred; // after internal transitions
    Eigen::VectorXd x_next; // after external transitions
    Eigen::Vector2d y;
};

Prediction predict(const Eigen::VectorXd& x_hat, const Eigen::MatrixXd& As,
                   std::span<const double> u, const Eigen::MatrixXd& C, const BinConfig& cfg);

/// Largest deviation of any column sum from one, and whether all entries are in [0,1].
struct StochasticCheck {
    double max_column_error = 0.0;
    bool entries_in_unit_interval = true;
    bool ok(double tol = 1e-9) const { return entries_in_unit_interval && max_column_error <= tol; }
};
StochasticCheck check_column_stochastic(const Eigen::MatrixXd& m);

/// Stationary distribution of a column-stochastic matrix by power iteration.
/// Identified matrices keep unvisited bins as self-loops, which makes the
/// chain reducible; pass a start supported on the visited bins to pick the
/// distribution over those.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& A, int iterations = 200000,
                                        double tol = 1e-13);
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& A, Eigen::VectorXd start,
                                        int iterations = 200000, double tol = 1e-13);

} // namespace tclsafe
