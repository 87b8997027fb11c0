#include "tclsafe/aggregate_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tclsafe {

void BinConfig::validate() const {
    if (n_intervals < 1) throw std::invalid_argument("BinConfig: need at least one interval");
}

int temperature_interval(double theta, const TclParams& params, const BinConfig& cfg) {
    const double phi = std::clamp((theta - params.lower()) / (2.0 * params.delta), 0.0, 1.0);
    const int k = static_cast<int>(std::ceil(phi * cfg.n_intervals));
    return std::clamp(k, 1, cfg.n_intervals);
}

int unlocked_bin(bool on, int interval, const BinConfig& cfg) {
    const int n = cfg.n_intervals;
    return on ? 2 * n - interval : interval - 1;
}

int bin_index(const TclState& state, const TclParams& params, const BinConfig& cfg) {
    const int bin = unlocked_bin(state.on, temperature_interval(state.theta, params, cfg), cfg);
    return state.locked() ? bin + cfg.unlocked_bins() : bin;
}

Eigen::MatrixXd identify_As(const BinHistory& history, const BinConfig& cfg, const SwitchMask* skip) {
    cfg.validate();
    if (history.size() < 2) throw std::invalid_argument("identify_As: need at least two ticks of history");
    if (skip && skip->size() + 1 < history.size()) throw std::invalid_argument("identify_As: switch mask shorter than history");
    const int nb = cfg.total_bins();
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(nb, nb);
    for (std::size_t t = 0; t + 1 < history.size(); ++t) {
        const auto& now = history[t];
        const auto& next = history[t + 1];
        if (now.size() != next.size()) throw std::invalid_argument("identify_As: ragged history");
        for (std::size_t i = 0; i < now.size(); ++i) {
            if (skip && i < (*skip)[t].size() && (*skip)[t][i]) continue;
            const int from = now[i];
            const int to = next[i];
            if (from < 0 || from >= nb || to < 0 || to >= nb)
                throw std::invalid_argument("identify_As: bin index out of range");
            counts(to, from) += 1.0;
        }
    }
    Eigen::MatrixXd As = Eigen::MatrixXd::Zero(nb, nb);
    for (int j = 0; j < nb; ++j) {
        const double visits = counts.col(j).sum();
        if (visits == 0.0)
            As(j, j) = 1.0;
        else
            As.col(j) = counts.col(j) / visits;
    }
    return As;
}

Eigen::MatrixXd build_Au(std::span<const double> u, const BinConfig& cfg) {
    cfg.validate();
    const int n = cfg.n_intervals;
    if (static_cast<int>(u.size()) != 2 * n) throw std::invalid_argument("build_Au: command must have 2N entries");
    for (double v : u)
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("build_Au: probability outside [0,1]");

    Eigen::MatrixXd Au = Eigen::MatrixXd::Identity(4 * n, 4 * n);
    for (int j = 0; j < 2 * n; ++j) {
        Au(j, j) = 1.0 - u[j];
        // Switching flips the mode and locks the unit in the same interval.
        int target;
        if (j < n) {
            const int interval = j + 1;
            target = unlocked_bin(true, interval, cfg) + 2 * n;
        } else {
            const int interval = 2 * n - j;
            target = unlocked_bin(false, interval, cfg) + 2 * n;
        }
        Au(target, j) = u[j];
    }
    return Au;
}

Eigen::MatrixXd output_matrix(double p_on_total, const BinConfig& cfg) {
    const int n = cfg.n_intervals;
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(2, 4 * n);
    for (int half = 0; half < 2; ++half) {
        const int base = half * 2 * n;
        for (int k = 0; k < n; ++k) C(0, base + n + k) = p_on_total;
    }
    C.row(1).setOnes();
    return C;
}

Eigen::VectorXd occupancy(std::span<const TclState> states, std::span<const TclParams> params,
                          const BinConfig& cfg) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(cfg.total_bins());
    if (states.empty()) return x;
    for (std::size_t i = 0; i < states.size(); ++i) x(bin_index(states[i], params[i], cfg)) += 1.0;
    return x / static_cast<double>(states.size());
}

Prediction predict(const Eigen::VectorXd& x_hat, const Eigen::MatrixXd& As,
                   std::span<const double> u, const Eigen::MatrixXd& C, const BinConfig& cfg) {
    Prediction out;
    out.x_pred = As * x_hat;
    out.x_next = build_Au(u, cfg) * out.x_pred;
    out.y = C * out.x_next;
    return out;
}

StochasticCheck check_column_stochastic(const Eigen::MatrixXd& m) {
    StochasticCheck out;
    for (int j = 0; j < m.cols(); ++j) {
        out.max_column_error = std::max(out.max_column_error, std::abs(m.col(j).sum() - 1.0));
        for (int i = 0; i < m.rows(); ++i)
            if (m(i, j) < 0.0 || m(i, j) > 1.0) out.entries_in_unit_interval = false;
    }
    return out;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& A, int iterations, double tol) {
    return stationary_distribution(A, Eigen::VectorXd::Constant(A.cols(), 1.0), iterations, tol);
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& A, Eigen::VectorXd start, int iterations,
                                        double tol) {
    if (start.size() != A.cols() || start.minCoeff() < 0.0 || start.sum() <= 0.0)
        throw std::invalid_argument("stationary_distribution: start must be a nonnegative vector of matching size");
    Eigen::VectorXd x = start / start.sum();
    for (int k = 0; k < iterations; ++k) {
        Eigen::VectorXd next = A * x;
        next /= next.sum();
        const double diff = (next - x).lpNorm<1>();
        x = std::move(next);
        if (diff < tol) break;
    }
    return x;
}

} // namespace tclsafe
