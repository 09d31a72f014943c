#pragma once

// Single-layer LSTM with a fully connected output layer: forward pass, full-sequence BPTT,
// Adam with global-norm clipping, Xavier initialization and the analytic output bound.

#include <array>
#include <random>
#include <string_view>

#include "core.hpp"

namespace lstm_mrac {

enum class Gate : int { forget = 0, candidate = 1, input = 2, output = 3 };

/// All parameters live in one flat vector so that optimizers and gradient checks can treat
/// them uniformly; the accessors give shaped views. Gate blocks are stacked in the order
/// forget, candidate, input, output.
struct LstmParams {
    Eigen::Index n_in = 0;
    Eigen::Index n_h = 0;
    Eigen::Index m = 0;
    Vector theta;

    static LstmParams zeros(Eigen::Index n_in, Eigen::Index n_h, Eigen::Index m) {
        detail::require(n_in >= 1 && n_h >= 1 && m >= 1, ErrorKind::InvalidArgument,
                        "LSTM dimensions must be positive");
        LstmParams p;
        p.n_in = n_in;
        p.n_h = n_h;
        p.m = m;
        p.theta = Vector::Zero(p.count());
        return p;
    }

    /// Zero tensor of the same shape, used for gradients.
    [[nodiscard]] LstmParams zeros_like() const { return zeros(n_in, n_h, m); }

    [[nodiscard]] Eigen::Index count() const { return off_b_fc() + m; }

    [[nodiscard]] Eigen::Index off_W() const { return 0; }
    [[nodiscard]] Eigen::Index off_R() const { return 4 * n_h * n_in; }
    [[nodiscard]] Eigen::Index off_b() const { return off_R() + 4 * n_h * n_h; }
    [[nodiscard]] Eigen::Index off_W_fc() const { return off_b() + 4 * n_h; }
    [[nodiscard]] Eigen::Index off_b_fc() const { return off_W_fc() + m * n_h; }

    using MatMap = Eigen::Map<Matrix>;
    using ConstMatMap = Eigen::Map<const Matrix>;
    using VecMap = Eigen::Map<Vector>;
    using ConstVecMap = Eigen::Map<const Vector>;

    // Stacked input weights, 4 n_h x n_in.
    MatMap W() { return {theta.data() + off_W(), 4 * n_h, n_in}; }
    [[nodiscard]] ConstMatMap W() const { return {theta.data() + off_W(), 4 * n_h, n_in}; }
    // Stacked recurrent weights, 4 n_h x n_h.
    MatMap R() { return {theta.data() + off_R(), 4 * n_h, n_h}; }
    [[nodiscard]] ConstMatMap R() const { return {theta.data() + off_R(), 4 * n_h, n_h}; }
    VecMap b() { return {theta.data() + off_b(), 4 * n_h}; }
    [[nodiscard]] ConstVecMap b() const { return {theta.data() + off_b(), 4 * n_h}; }
    MatMap W_fc() { return {theta.data() + off_W_fc(), m, n_h}; }
    [[nodiscard]] ConstMatMap W_fc() const { return {theta.data() + off_W_fc(), m, n_h}; }
    VecMap b_fc() { return {theta.data() + off_b_fc(), m}; }
    [[nodiscard]] ConstVecMap b_fc() const { return {theta.data() + off_b_fc(), m}; }

    auto W_gate(Gate g) { return W().middleRows(static_cast<int>(g) * n_h, n_h); }
    [[nodiscard]] auto W_gate(Gate g) const { return W().middleRows(static_cast<int>(g) * n_h, n_h); }
    auto R_gate(Gate g) { return R().middleRows(static_cast<int>(g) * n_h, n_h); }
    [[nodiscard]] auto R_gate(Gate g) const { return R().middleRows(static_cast<int>(g) * n_h, n_h); }
    auto b_gate(Gate g) { return b().segment(static_cast<int>(g) * n_h, n_h); }
    [[nodiscard]] auto b_gate(Gate g) const { return b().segment(static_cast<int>(g) * n_h, n_h); }

    /// 1 for weight entries, 0 for biases (L2 applies to weights only).
    [[nodiscard]] Vector weight_mask() const {
        Vector mask = Vector::Ones(count());
        mask.segment(off_b(), 4 * n_h).setZero();
        mask.segment(off_b_fc(), m).setZero();
        return mask;
    }

    [[nodiscard]] bool same_shape(const LstmParams& o) const {
        return n_in == o.n_in && n_h == o.n_h && m == o.m && theta.size() == o.theta.size();
    }
};

struct LstmState {
    Vector h;
    Vector c;

    static LstmState zeros(Eigen::Index n_h) { return {Vector::Zero(n_h), Vector::Zero(n_h)}; }
};

/// Xavier-uniform weights on +-sqrt(6 / (fan_in + fan_out)) per gate matrix, zero biases.
inline LstmParams lstm_init(Eigen::Index n_in, Eigen::Index n_h, Eigen::Index m, std::uint64_t seed) {
    LstmParams p = LstmParams::zeros(n_in, n_h, m);
    std::mt19937_64 rng(seed);
    auto fill = [&rng](auto&& block, double fan_in, double fan_out) {
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-a, a);
        for (Eigen::Index i = 0; i < block.rows(); ++i)
            for (Eigen::Index j = 0; j < block.cols(); ++j) block(i, j) = dist(rng);
    };
    for (int g = 0; g < 4; ++g) fill(p.W_gate(static_cast<Gate>(g)), double(n_in), double(n_h));
    for (int g = 0; g < 4; ++g) fill(p.R_gate(static_cast<Gate>(g)), double(n_h), double(n_h));
    fill(p.W_fc(), double(n_h), double(m));
    return p;
}

/// Gate activations and states of one cell evaluation, kept for BPTT.
struct CellCache {
    Vector x;
    Vector h_prev;
    Vector c_prev;
    Vector gates;  // activated [out_f; c_bar; out_i; out_o], 4 n_h
    Vector c;
    Vector tanh_c;
};

struct CellResult {
    LstmState state;
    CellCache cache;
};

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Shared cell kernel; every forward path goes through here so that in-loop and offline
// evaluations are bitwise identical.
template <class XIn, class HIn, class CIn, class GOut, class COut, class TOut, class HOut>
void cell_kernel(const LstmParams& p, const XIn& x, const HIn& h_prev, const CIn& c_prev, GOut&& gates,
                 COut&& c, TOut&& tanh_c, HOut&& h) {
    const Eigen::Index n_h = p.n_h;
    const Vector xv = x;
    const Vector hv = h_prev;
    Vector pre = p.b();
    pre.noalias() += p.W() * xv;
    pre.noalias() += p.R() * hv;
    for (Eigen::Index k = 0; k < n_h; ++k) {
        const double f = sigmoid(pre(k));
        const double g = std::tanh(pre(n_h + k));
        const double i = sigmoid(pre(2 * n_h + k));
        const double o = sigmoid(pre(3 * n_h + k));
        gates(k) = f;
        gates(n_h + k) = g;
        gates(2 * n_h + k) = i;
        gates(3 * n_h + k) = o;
        const double ck = f * c_prev(k) + i * g;
        const double tc = std::tanh(ck);
        c(k) = ck;
        tanh_c(k) = tc;
        h(k) = o * tc;
    }
}

inline void check_input(const LstmParams& p, Eigen::Index x_size, Eigen::Index h_size, Eigen::Index c_size) {
    require(x_size == p.n_in, ErrorKind::DimensionMismatch,
            "LSTM input has size " + std::to_string(x_size) + ", expected " + std::to_string(p.n_in));
    require(h_size == p.n_h && c_size == p.n_h, ErrorKind::DimensionMismatch,
            "LSTM state has size " + std::to_string(h_size) + ", expected " + std::to_string(p.n_h));
}

}  // namespace detail

inline CellResult cell_forward(const LstmParams& p, const Vector& x, const LstmState& s) {
    detail::check_input(p, x.size(), s.h.size(), s.c.size());
    CellResult r;
    r.cache.x = x;
    r.cache.h_prev = s.h;
    r.cache.c_prev = s.c;
    r.cache.gates.resize(4 * p.n_h);
    r.cache.c.resize(p.n_h);
    r.cache.tanh_c.resize(p.n_h);
    r.state.h.resize(p.n_h);
    detail::cell_kernel(p, x, s.h, s.c, r.cache.gates, r.cache.c, r.cache.tanh_c, r.state.h);
    r.state.c = r.cache.c;
    return r;
}

/// u = W_fc h + b_fc.
inline Vector fc_forward(const LstmParams& p, const Vector& h) {
    detail::require(h.size() == p.n_h, ErrorKind::DimensionMismatch,
                    "hidden state has size " + std::to_string(h.size()));
    Vector u = p.b_fc();
    u.noalias() += p.W_fc() * h;
    return u;
}

/// Column-per-step record of a sequence evaluation. H and C carry the initial state in
/// column 0, so step k reads column k and writes column k + 1.
struct SequenceCache {
    Matrix X;      // n_in x N
    Matrix H;      // n_h x (N + 1)
    Matrix C;      // n_h x (N + 1)
    Matrix Gates;  // 4 n_h x N
    Matrix TanhC;  // n_h x N

    [[nodiscard]] Eigen::Index length() const { return X.cols(); }

    void reset(const LstmParams& p, Eigen::Index capacity, const LstmState& s0) {
        X.resize(p.n_in, capacity);
        H.resize(p.n_h, capacity + 1);
        C.resize(p.n_h, capacity + 1);
        Gates.resize(4 * p.n_h, capacity);
        TanhC.resize(p.n_h, capacity);
        H.col(0) = s0.h;
        C.col(0) = s0.c;
    }

    /// Evaluates step k in place from column k of the state record.
    void step(const LstmParams& p, Eigen::Index k, const Vector& x) {
        X.col(k) = x;
        detail::cell_kernel(p, X.col(k), H.col(k), C.col(k), Gates.col(k), C.col(k + 1), TanhC.col(k),
                            H.col(k + 1));
    }

    void truncate(Eigen::Index n) {
        X.conservativeResize(Eigen::NoChange, n);
        H.conservativeResize(Eigen::NoChange, n + 1);
        C.conservativeResize(Eigen::NoChange, n + 1);
        Gates.conservativeResize(Eigen::NoChange, n);
        TanhC.conservativeResize(Eigen::NoChange, n);
    }
};

struct SequenceResult {
    Matrix outputs;  // m x N
    SequenceCache cache;
};

/// Outputs from the hidden states stored in a cache, evaluated exactly as fc_forward does.
inline Matrix outputs_from_cache(const LstmParams& p, const SequenceCache& cache) {
    const Eigen::Index N = cache.length();
    Matrix Y(p.m, N);
    Vector h(p.n_h);
    for (Eigen::Index k = 0; k < N; ++k) {
        h = cache.H.col(k + 1);
        Y.col(k) = fc_forward(p, h);
    }
    return Y;
}

/// Folds cell_forward and fc_forward over the columns of `inputs` (n_in x N).
inline SequenceResult sequence_forward(const LstmParams& p, const Matrix& inputs, const LstmState& s0) {
    detail::require(inputs.cols() >= 1, ErrorKind::LengthMismatch, "input sequence is empty");
    detail::check_input(p, inputs.rows(), s0.h.size(), s0.c.size());
    SequenceResult r;
    r.cache.reset(p, inputs.cols(), s0);
    Vector x(p.n_in);
    for (Eigen::Index k = 0; k < inputs.cols(); ++k) {
        x = inputs.col(k);
        r.cache.step(p, k, x);
    }
    r.outputs = outputs_from_cache(p, r.cache);
    return r;
}

struct BpttResult {
    LstmParams grads;
    double loss = 0.0;  // (1/N) sum_k |y_k - yhat_k|^2
};

/// Gradient of the mean squared sequence error w.r.t. every parameter, through all steps.
inline BpttResult bptt(const LstmParams& p, const SequenceCache& cache, const Matrix& targets) {
    const Eigen::Index N = cache.length();
    const Eigen::Index n_h = p.n_h;
    detail::require(N >= 1, ErrorKind::LengthMismatch, "empty sequence");
    detail::require(targets.cols() == N && targets.rows() == p.m, ErrorKind::LengthMismatch,
                    "targets are " + detail::shape(targets) + ", expected " + std::to_string(p.m) + "x" +
                        std::to_string(N));

    BpttResult out;
    out.grads = p.zeros_like();
    const Matrix Y = outputs_from_cache(p, cache);
    const Matrix residual = Y - targets;
    out.loss = residual.squaredNorm() / double(N);
    const Matrix dY = (2.0 / double(N)) * residual;  // m x N

    out.grads.W_fc().noalias() = dY * cache.H.rightCols(N).transpose();
    out.grads.b_fc() = dY.rowwise().sum();

    Matrix dA(4 * n_h, N);  // pre-activation gradients
    const Matrix dH_out = p.W_fc().transpose() * dY;  // n_h x N
    Vector dh_rec = Vector::Zero(n_h);
    Vector dc_next = Vector::Zero(n_h);
    for (Eigen::Index k = N - 1; k >= 0; --k) {
        const auto gates = cache.Gates.col(k);
        const auto tc = cache.TanhC.col(k);
        const auto c_prev = cache.C.col(k);
        for (Eigen::Index j = 0; j < n_h; ++j) {
            const double f = gates(j), g = gates(n_h + j), i = gates(2 * n_h + j), o = gates(3 * n_h + j);
            const double dh = dH_out(j, k) + dh_rec(j);
            const double d_o = dh * tc(j);
            const double dc = dc_next(j) + dh * o * (1.0 - tc(j) * tc(j));
            dA(j, k) = dc * c_prev(j) * f * (1.0 - f);
            dA(n_h + j, k) = dc * i * (1.0 - g * g);
            dA(2 * n_h + j, k) = dc * g * i * (1.0 - i);
            dA(3 * n_h + j, k) = d_o * o * (1.0 - o);
            dc_next(j) = dc * f;
        }
        dh_rec.noalias() = p.R().transpose() * dA.col(k);
    }
    out.grads.W().noalias() = dA * cache.X.transpose();
    out.grads.R().noalias() = dA * cache.H.leftCols(N).transpose();
    out.grads.b() = dA.rowwise().sum();
    return out;
}

struct AdamState {
    Vector first_moment;
    Vector second_moment;
    std::int64_t step_count = 0;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double l2 = 0.0001;
    double clip_threshold = 1.0;

    static AdamState for_params(const LstmParams& p) {
        AdamState a;
        a.first_moment = Vector::Zero(p.count());
        a.second_moment = Vector::Zero(p.count());
        return a;
    }
};

/// Scales the whole gradient by threshold / |g| when its global norm exceeds `threshold`.
/// Returns the norm before clipping.
inline double clip_gradients(LstmParams& grads, double threshold) {
    const double norm = grads.theta.norm();
    if (norm > threshold) grads.theta *= threshold / norm;
    return norm;
}

/// Global-norm clip, L2 on weights, bias-corrected Adam update. Returns the pre-clip norm.
inline double clip_and_step(LstmParams& p, LstmParams grads, AdamState& adam) {
    detail::require(p.same_shape(grads), ErrorKind::DimensionMismatch, "gradient shape mismatch");
    detail::require(adam.first_moment.size() == p.count() && adam.second_moment.size() == p.count(),
                    ErrorKind::DimensionMismatch, "optimizer state shape mismatch");
    detail::require(grads.theta.allFinite(), ErrorKind::NonFinite, "non-finite gradient");
    const double norm = clip_gradients(grads, adam.clip_threshold);
    if (adam.l2 != 0.0) grads.theta += adam.l2 * p.theta.cwiseProduct(p.weight_mask());

    adam.step_count += 1;
    const double t = double(adam.step_count);
    adam.first_moment = adam.beta1 * adam.first_moment + (1.0 - adam.beta1) * grads.theta;
    adam.second_moment = adam.beta2 * adam.second_moment + (1.0 - adam.beta2) * grads.theta.cwiseAbs2();
    const double c1 = 1.0 - std::pow(adam.beta1, t);
    const double c2 = 1.0 - std::pow(adam.beta2, t);
    p.theta.array() -= adam.lr * (adam.first_moment.array() / c1) /
                       ((adam.second_moment.array() / c2).sqrt() + adam.epsilon);
    return norm;
}

/// |u| <= |W_fc|_F sqrt(n_h) + |b_fc| for every output, since |h_i| < 1.
inline double output_bound(const LstmParams& p) {
    return p.W_fc().norm() * std::sqrt(double(p.n_h)) + p.b_fc().norm();
}

}  // namespace lstm_mrac
