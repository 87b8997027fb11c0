#pragma once

#include <Eigen/Dense>

#include "tclsafe/aggregate_model.hpp"

namespace tclsafe {

struct EstimatorState {
    Eigen::VectorXd x_hat;
    Eigen::MatrixXd P;
};

struct KalmanStepInfo {
    Eigen::VectorXd innovation;
    Eigen::MatrixXd innovation_cov;
    bool jittered = false;

    /// Normalized innovation squared.
    double nis() const;
};

/// One predict + update cycle of a time-varying Kalman filter. A zero entry on
/// the diagonal of R makes the corresponding measurement an equality
/// constraint on the posterior. A near-singular innovation covariance gets a
/// small diagonal jitter (reported in `info`).
EstimatorState kalman_step(const EstimatorState& est, const Eigen::MatrixXd& A,
                           const Eigen::MatrixXd& C, const Eigen::MatrixXd& Q,
                           const Eigen::MatrixXd& R, const Eigen::VectorXd& y_meas,
                           KalmanStepInfo* info = nullptr);

struct EstimatorTuning {
    double q_unlocked = 1.0;
    double q_locked = 100.0;
    double r_power = 1.0e3; // kW^2 (1e9 W^2)
    /// Clip negative occupancies and renormalize after each update.
    bool project_nonnegative = true;
};

/// Occupancy estimator for the bin model, measuring [P_total, 1].
class AggregateEstimator {
public:
    AggregateEstimator(BinConfig cfg, Eigen::MatrixXd As, double p_on_total,
                       EstimatorTuning tuning = {});

    /// Advances with the transition matrix A = Au(u_prev) * As and corrects
    /// with the measured total power.
    void update(std::span<const double> u_prev, double p_total_meas);

    const Eigen::VectorXd& estimate() const { return state_.x_hat; }
    const Eigen::MatrixXd& covariance() const { return state_.P; }
    const Eigen::MatrixXd& As() const { return As_; }
    const Eigen::MatrixXd& C() const { return C_; }
    const BinConfig& config() const { return cfg_; }
    double p_on_total() const { return p_on_total_; }
    int jitter_count() const { return jitter_count_; }

    static Eigen::MatrixXd process_noise(const BinConfig& cfg, const EstimatorTuning& t);

private:
    BinConfig cfg_;
    Eigen::MatrixXd As_;
    Eigen::MatrixXd C_;
    Eigen::MatrixXd Q_;
    Eigen::MatrixXd R_;
    double p_on_total_;
    EstimatorTuning tuning_;
    EstimatorState state_;
    int jitter_count_ = 0;
};

} // namespace tclsafe
