#pragma once

#include "ann.hpp"

namespace lstm_mrac {

/// ||Z_hat||_F for the block-diagonal stack of the two weight estimates.
inline double stacked_weight_norm(const AnnWeights& w) {
    return std::sqrt(w.W_hat.squaredNorm() + w.V_hat.squaredNorm());
}

/// Modified robustifying term for MIMO plants:
///   v = -(B^T P e / |B^T P e|) k_z |e| (|Z_hat|_F + Z_M),  v = 0 when |B^T P e| <= 1e-12.
inline Vector robustifying_term(const Vector& e, const AugmentedSystem& sys, const AnnWeights& w, double k_z,
                                double Z_M) {
    detail::require(e.size() == sys.n, ErrorKind::DimensionMismatch,
                    "e has size " + std::to_string(e.size()));
    Vector v = Vector::Zero(sys.m);
    if (k_z == 0.0) return v;
    const Vector BtPe = sys.PB.transpose() * e;
    const double magnitude = BtPe.norm();
    if (magnitude <= 1e-12) return v;
    v = -(BtPe / magnitude) * (k_z * e.norm() * (stacked_weight_norm(w) + Z_M));
    return v;
}

}  // namespace lstm_mrac
