#pragma once

// Central-difference gradient check of the sequence MSE, shared by the unit and acceptance tests.

#include <random>

#include "lstm_mrac/lstm.hpp"

namespace fdcheck {

using namespace lstm_mrac;

inline double sequence_loss(const LstmParams& p, const Matrix& X, const Matrix& Y) {
    const SequenceResult r = sequence_forward(p, X, LstmState::zeros(p.n_h));
    return (r.outputs - Y).squaredNorm() / double(X.cols());
}

struct Instance {
    LstmParams p;
    Matrix X, Y;
};

inline Instance random_instance(Eigen::Index n_in, Eigen::Index n_h, Eigen::Index m, Eigen::Index N,
                                std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.7);
    Instance in{LstmParams::zeros(n_in, n_h, m), Matrix(n_in, N), Matrix(m, N)};
    for (Eigen::Index i = 0; i < in.p.theta.size(); ++i) in.p.theta(i) = nd(rng);
    for (Eigen::Index i = 0; i < in.X.size(); ++i) in.X.data()[i] = nd(rng);
    for (Eigen::Index i = 0; i < in.Y.size(); ++i) in.Y.data()[i] = nd(rng);
    return in;
}

// Largest |analytic - fd| / max(|analytic|, |fd|, floor) over all parameters.
inline double max_relative_error(const Instance& in, double h = 1e-5, double floor = 1e-6) {
    const SequenceResult fwd = sequence_forward(in.p, in.X, LstmState::zeros(in.p.n_h));
    const BpttResult g = bptt(in.p, fwd.cache, in.Y);
    double worst = 0.0;
    LstmParams q = in.p;
    for (Eigen::Index i = 0; i < q.theta.size(); ++i) {
        const double keep = q.theta(i);
        q.theta(i) = keep + h;
        const double up = sequence_loss(q, in.X, in.Y);
        q.theta(i) = keep - h;
        const double dn = sequence_loss(q, in.X, in.Y);
        q.theta(i) = keep;
        const double fd = (up - dn) / (2.0 * h);
        const double a = g.grads.theta(i);
        worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor}));
    }
    return worst;
}

}  // namespace fdcheck
