#pragma once

// Two-layer adaptive neural network that estimates the matched uncertainty, and its
// continuous-time weight update laws with e-modification.

#include <random>

#include "plant.hpp"

namespace lstm_mrac {

enum class Activation { sigmoid, tanh };

struct AnnConfig {
    Eigen::Index n_h = 4;
    Matrix F;  // (n_h+1) x (n_h+1), symmetric PD
    Matrix G;  // (n_p+1) x (n_p+1), symmetric PD
    double kappa = 0.0;
    Activation activation = Activation::sigmoid;

    /// F = f_gain I, G = g_gain I.
    static AnnConfig with_scalar_rates(Eigen::Index n_p, Eigen::Index n_h, double f_gain, double g_gain,
                                       double kappa = 0.0, Activation act = Activation::sigmoid) {
        AnnConfig cfg;
        cfg.n_h = n_h;
        cfg.F = f_gain * Matrix::Identity(n_h + 1, n_h + 1);
        cfg.G = g_gain * Matrix::Identity(n_p + 1, n_p + 1);
        cfg.kappa = kappa;
        cfg.activation = act;
        return cfg;
    }

    void validate(Eigen::Index n_p) const {
        using detail::require;
        require(n_h >= 1, ErrorKind::InvalidArgument, "ANN needs at least one hidden neuron");
        require(F.rows() == n_h + 1 && F.cols() == n_h + 1, ErrorKind::DimensionMismatch,
                "F is " + detail::shape(F));
        require(G.rows() == n_p + 1 && G.cols() == n_p + 1, ErrorKind::DimensionMismatch,
                "G is " + detail::shape(G));
        require(detail::is_symmetric(F) && detail::is_positive_definite(F), ErrorKind::InvalidArgument,
                "F must be symmetric positive definite");
        require(detail::is_symmetric(G) && detail::is_positive_definite(G), ErrorKind::InvalidArgument,
                "G must be symmetric positive definite");
        require(kappa >= 0.0, ErrorKind::InvalidArgument, "kappa must be nonnegative");
    }
};

/// Bias rows are the last row of each matrix.
struct AnnWeights {
    Matrix W_hat;  // (n_h+1) x m
    Matrix V_hat;  // (n_p+1) x n_h
};

/// W_hat = 0 and V_hat ~ U[0, 1], deterministic in `seed`.
inline AnnWeights init_ann_weights(Eigen::Index n_p, Eigen::Index m, const AnnConfig& cfg,
                                   std::uint64_t seed) {
    AnnWeights w;
    w.W_hat = Matrix::Zero(cfg.n_h + 1, m);
    w.V_hat.resize(n_p + 1, cfg.n_h);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index j = 0; j < w.V_hat.cols(); ++j)
        for (Eigen::Index i = 0; i < w.V_hat.rows(); ++i) w.V_hat(i, j) = unit(rng);
    return w;
}

/// Assumption-level bound constants on the ideal weights and activations.
struct NnBounds {
    double W_M = 10.0;
    double V_M = 10.0;
    double Z_M = 0.0;
    double eps_N = 0.1;
    double C_sigma = 1.0;
    double C_sigma_prime = 0.25;

    static NnBounds make(double W_M, double V_M, double eps_N, Activation act) {
        NnBounds b;
        b.W_M = W_M;
        b.V_M = V_M;
        b.Z_M = std::sqrt(W_M * W_M + V_M * V_M);
        b.eps_N = eps_N;
        b.C_sigma = 1.0;
        b.C_sigma_prime = act == Activation::sigmoid ? 0.25 : 1.0;
        return b;
    }
};

struct AnnOutput {
    Vector f_hat;         // m
    Vector sigma;         // n_h + 1, last entry 1
    Matrix sigma_prime;   // (n_h+1) x n_h, last row 0
    Vector x_bar;         // n_p + 1, last entry 1
    Vector pre_activation;  // V_hat^T x_bar
};

namespace detail {

inline double activate(double z, Activation act) {
    return act == Activation::sigmoid ? 1.0 / (1.0 + std::exp(-z)) : std::tanh(z);
}

inline double activate_derivative(double z, Activation act) {
    const double s = activate(z, act);
    return act == Activation::sigmoid ? s * (1.0 - s) : 1.0 - s * s;
}

}  // namespace detail

inline AnnOutput ann_forward(const AnnWeights& w, const Vector& x_p, const AnnConfig& cfg) {
    const Eigen::Index n_h = cfg.n_h;
    detail::require(w.V_hat.rows() == x_p.size() + 1 && w.V_hat.cols() == n_h,
                    ErrorKind::DimensionMismatch,
                    "V_hat is " + detail::shape(w.V_hat) + " for x_p of size " + std::to_string(x_p.size()));
    detail::require(w.W_hat.rows() == n_h + 1, ErrorKind::DimensionMismatch,
                    "W_hat is " + detail::shape(w.W_hat));
    AnnOutput out;
    out.x_bar.resize(x_p.size() + 1);
    out.x_bar << x_p, 1.0;
    out.pre_activation = w.V_hat.transpose() * out.x_bar;
    out.sigma.resize(n_h + 1);
    out.sigma_prime = Matrix::Zero(n_h + 1, n_h);
    for (Eigen::Index j = 0; j < n_h; ++j) {
        const double z = out.pre_activation(j);
        out.sigma(j) = detail::activate(z, cfg.activation);
        out.sigma_prime(j, j) = detail::activate_derivative(z, cfg.activation);
    }
    out.sigma(n_h) = 1.0;
    out.f_hat = w.W_hat.transpose() * out.sigma;
    return out;
}

struct AnnDerivatives {
    Matrix dW_hat;
    Matrix dV_hat;
};

/// dW = F (sigma - sigma' V^T x) e^T P B - F kappa |e| W
/// dV = G x e^T P B W^T sigma' - G kappa |e| V
inline AnnDerivatives ann_weight_derivatives(const AnnWeights& w, const Vector& x_p, const Vector& e,
                                             const AugmentedSystem& sys, const AnnConfig& cfg) {
    detail::require(e.size() == sys.n, ErrorKind::DimensionMismatch,
                    "e has size " + std::to_string(e.size()) + ", expected " + std::to_string(sys.n));
    detail::require(x_p.size() == sys.n_p, ErrorKind::DimensionMismatch,
                    "x_p has size " + std::to_string(x_p.size()));
    const AnnOutput nn = ann_forward(w, x_p, cfg);
    const Eigen::RowVectorXd ePB = e.transpose() * sys.PB;  // 1 x m
    const double damping = cfg.kappa * e.norm();

    AnnDerivatives d;
    const Vector w_direction = nn.sigma - nn.sigma_prime * nn.pre_activation;
    d.dW_hat = cfg.F * (w_direction * ePB);
    const Eigen::RowVectorXd v_direction = ePB * w.W_hat.transpose() * nn.sigma_prime;  // 1 x n_h
    d.dV_hat = cfg.G * (nn.x_bar * v_direction);
    if (damping != 0.0) {
        d.dW_hat -= damping * (cfg.F * w.W_hat);
        d.dV_hat -= damping * (cfg.G * w.V_hat);
    }
    return d;
}

}  // namespace lstm_mrac
