#include "tclsafe/kalman.hpp"

#include <iostream>
#include <stdexcept>

namespace tclsafe {

double KalmanStepInfo::nis() const {
    return innovation.dot(innovation_cov.ldlt().solve(innovation));
}

EstimatorState kalman_step(const EstimatorState& est, const Eigen::MatrixXd& A,
                           const Eigen::MatrixXd& C, const Eigen::MatrixXd& Q,
                           const Eigen::MatrixXd& R, const Eigen::VectorXd& y_meas,
                           KalmanStepInfo* info) {
    const Eigen::Index n = est.x_hat.size();
    if (A.rows() != n || A.cols() != n || C.cols() != n || Q.rows() != n || R.rows() != C.rows() ||
        y_meas.size() != C.rows())
        throw std::invalid_argument("kalman_step: dimension mismatch");

    const Eigen::VectorXd x_minus = A * est.x_hat;
    Eigen::MatrixXd P_minus = A * est.P * A.transpose() + Q;

    const Eigen::VectorXd innovation = y_meas - C * x_minus;
    Eigen::MatrixXd S = C * P_minus * C.transpose() + R;

    bool jittered = false;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
    const double scale = std::max(1.0, S.diagonal().cwiseAbs().maxCoeff());
    if (lu.rank() < S.rows() || std::abs(lu.determinant()) < 1e-12 * std::pow(scale, S.rows())) {
        S.diagonal().array() += 1e-9 * scale;
        jittered = true;
        std::clog << "kalman_step: innovation covariance near singular, applied jitter\n";
    }
    const Eigen::MatrixXd gain = P_minus * C.transpose() * S.inverse();

    EstimatorState out;
    out.x_hat = x_minus + gain * innovation;
    // Joseph form keeps the covariance symmetric positive semidefinite.
    const Eigen::MatrixXd I_KC = Eigen::MatrixXd::Identity(n, n) - gain * C;
    out.P = I_KC * P_minus * I_KC.transpose() + gain * R * gain.transpose();
    out.P = 0.5 * (out.P + out.P.transpose());

    if (info) {
        info->innovation = innovation;
        info->innovation_cov = S;
        info->jittered = jittered;
    }
    return out;
}

Eigen::MatrixXd AggregateEstimator::process_noise(const BinConfig& cfg, const EstimatorTuning& t) {
    const int half = cfg.unlocked_bins();
    Eigen::VectorXd d(cfg.total_bins());
    d.head(half).setConstant(t.q_unlocked);
    d.tail(half).setConstant(t.q_locked);
    return d.asDiagonal();
}

AggregateEstimator::AggregateEstimator(BinConfig cfg, Eigen::MatrixXd As, double p_on_total,
                                       EstimatorTuning tuning)
    : cfg_(cfg), As_(std::move(As)), p_on_total_(p_on_total), tuning_(tuning) {
    cfg_.validate();
    const int nb = cfg_.total_bins();
    if (As_.rows() != nb || As_.cols() != nb) throw std::invalid_argument("AggregateEstimator: As has wrong shape");
    C_ = output_matrix(p_on_total_, cfg_);
    Q_ = process_noise(cfg_, tuning_);
    R_ = Eigen::Matrix2d::Zero();
    R_(0, 0) = tuning_.r_power;
    state_.x_hat = Eigen::VectorXd::Constant(nb, 1.0 / nb);
    state_.P = Eigen::MatrixXd::Identity(nb, nb);
}

void AggregateEstimator::update(std::span<const double> u_prev, double p_total_meas) {
    const Eigen::MatrixXd A = build_Au(u_prev, cfg_) * As_;
    Eigen::Vector2d y(p_total_meas, 1.0);
    KalmanStepInfo info;
    state_ = kalman_step(state_, A, C_, Q_, R_, y, &info);
    if (info.jittered) ++jitter_count_;
    if (tuning_.project_nonnegative) {
        state_.x_hat = state_.x_hat.cwiseMax(0.0);
        const double s = state_.x_hat.sum();
        if (s > 0) state_.x_hat /= s;
    }
}

} // namespace tclsafe
