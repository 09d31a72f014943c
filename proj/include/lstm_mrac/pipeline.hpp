#pragma once

// Closed-loop orchestration: normalization collection, episode simulation with the LSTM in the
// loop, the k_lstm ramp and the episode-by-episode training loop.

#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "closed_loop.hpp"
#include "lstm.hpp"
#include "robust.hpp"
#include "scenarios.hpp"

namespace lstm_mrac {

struct NormParams {
    Vector e_min;
    Vector e_max;

    void validate() const {
        detail::require(e_min.size() == e_max.size() && e_min.size() > 0, ErrorKind::DimensionMismatch,
                        "normalization bounds have inconsistent sizes");
        for (Eigen::Index i = 0; i < e_min.size(); ++i) {
            detail::require(e_max(i) - e_min(i) >= 1e-15, ErrorKind::DegenerateRange,
                            "component " + std::to_string(i) + " has an empty range");
        }
    }
};

/// (e_i - e_min_i) / (e_max_i - e_min_i); values outside [0, 1] pass through unclipped.
inline Vector normalize_error(const Vector& e, const NormParams& np) {
    np.validate();
    detail::require(e.size() == np.e_min.size(), ErrorKind::DimensionMismatch,
                    "error has size " + std::to_string(e.size()) + ", normalization has " +
                        std::to_string(np.e_min.size()));
    return ((e - np.e_min).array() / (np.e_max - np.e_min).array()).matrix();
}

struct OptimizerConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double l2 = 0.0001;
    double clip_threshold = 1.0;
};

struct TrainConfig {
    int episodes = 500;
    int ramp_episodes = 100;
    double episode_duration = 60.0;
    double dt = 0.01;
    int norm_runs = 1000;
    std::vector<double> scale_values{0.2, 2.0};
    bool rate_informed = false;
    bool saturation_in_training = false;
    std::uint64_t seed = 0;
    int lstm_stride = 1;
    Eigen::Index lstm_hidden = 128;
    bool reset_ann_each_episode = true;
    OptimizerConfig optimizer;

    void validate() const {
        using detail::require;
        require(episodes >= 0, ErrorKind::InvalidArgument, "episodes must be >= 0");
        require(ramp_episodes >= 0, ErrorKind::InvalidArgument, "ramp_episodes must be >= 0");
        require(dt > 0.0, ErrorKind::InvalidArgument, "dt must be positive");
        require(episode_duration > 0.0 && episode_duration <= 60.0 + 1e-9, ErrorKind::InvalidArgument,
                "episode_duration must lie in (0, 60]");
        require(norm_runs >= 1, ErrorKind::InvalidArgument, "norm_runs must be >= 1");
        require(!scale_values.empty(), ErrorKind::InvalidArgument, "scale_values must not be empty");
        require(lstm_stride >= 1, ErrorKind::InvalidArgument, "lstm_stride must be >= 1");
        require(lstm_hidden >= 1, ErrorKind::InvalidArgument, "lstm_hidden must be >= 1");
    }
};

/// Controller pieces shared by every episode.
struct Scenario {
    AugmentedSystem sys;
    AnnConfig ann;
    double k_z = 0.0;
    double Z_M = 0.0;
    CommandSpec command;
};

/// B-747 with LQR(Q = I, R = 1), Lyapunov Q = I, four hidden ANN neurons and F = G = 10 I.
inline Scenario b747_scenario() {
    Scenario sc;
    sc.sys = build_augmented(b747_model(), Matrix::Identity(3, 3), Matrix::Identity(1, 1),
                             Matrix::Identity(3, 3));
    sc.ann = AnnConfig::with_scalar_rates(sc.sys.n_p, 4, 10.0, 10.0);
    sc.Z_M = NnBounds::make(10.0, 10.0, 0.1, sc.ann.activation).Z_M;
    return sc;
}

struct EpisodeOptions {
    Uncertainty f;
    double duration = 60.0;
    double dt = 0.01;
    bool saturation_on = false;
    bool rate_informed = false;
    int lstm_stride = 1;
    std::uint64_t ann_seed = 0;
    std::optional<AnnWeights> initial_weights;  // overrides ann_seed when present
    bool keep_lstm_cache = false;
};

/// Per-step record on a uniform grid t_k = k dt, k = 0..N. Column k of every matrix is step k.
struct EpisodeTrace {
    double dt = 0.0;
    double k_lstm = 0.0;
    Vector t;
    Matrix x, x_m, e;        // n x (N+1)
    Matrix e_norm;           // n x (N+1); zero when no normalization was supplied
    Matrix r;                // s x (N+1)
    Matrix u_bl, u_ad, u_lstm, u_lstm_raw, v;  // m x (N+1)
    Matrix u_cmd, u_applied;  // pre- and post-saturation total command
    Matrix f_true, f_hat, y;  // y = f_hat - f_true, the LSTM target
    Matrix u_r;               // rate-flag input value in effect at t_k

    // LSTM samples (every lstm_stride steps)
    std::vector<Eigen::Index> sample_steps;
    Matrix lstm_inputs;   // n_in x K
    Matrix lstm_targets;  // m x K
    Matrix lstm_outputs;  // m x K, raw network output
    std::optional<SequenceCache> lstm_cache;

    AnnWeights final_weights;

    [[nodiscard]] Eigen::Index rows() const { return t.size(); }
};

inline Eigen::Index lstm_input_size(const AugmentedSystem& sys, bool rate_informed) {
    return sys.n + (rate_informed ? sys.m : 0);
}

inline Eigen::Index step_count(double duration, double dt) {
    return static_cast<Eigen::Index>(std::llround(duration / dt));
}

inline EpisodeTrace run_episode(const Scenario& sc, const EpisodeOptions& opt, const LstmParams* lstm,
                                double k_lstm, const NormParams* norm) {
    const AugmentedSystem& sys = sc.sys;
    detail::require(opt.dt > 0.0 && opt.duration > 0.0, ErrorKind::InvalidArgument,
                    "episode needs positive dt and duration");
    detail::require(opt.lstm_stride >= 1, ErrorKind::InvalidArgument, "lstm_stride must be >= 1");
    detail::require(static_cast<bool>(opt.f), ErrorKind::InvalidArgument, "missing uncertainty");
    const Eigen::Index n_in = lstm_input_size(sys, opt.rate_informed);
    if (lstm) {
        detail::require(norm != nullptr, ErrorKind::InvalidArgument,
                        "normalization parameters are required when the LSTM is active");
        detail::require(lstm->n_in == n_in, ErrorKind::DimensionMismatch,
                        "LSTM expects " + std::to_string(lstm->n_in) + " inputs, episode provides " +
                            std::to_string(n_in));
        detail::require(lstm->m == sys.m, ErrorKind::DimensionMismatch, "LSTM output size mismatch");
    }
    if (norm) {
        norm->validate();
        detail::require(norm->e_min.size() == sys.n, ErrorKind::DimensionMismatch,
                        "normalization has " + std::to_string(norm->e_min.size()) + " components, expected " +
                            std::to_string(sys.n));
    }

    const Eigen::Index N = step_count(opt.duration, opt.dt);
    const Eigen::Index rows = N + 1;
    const auto n = sys.n, m = sys.m, s = sys.s;

    EpisodeTrace tr;
    tr.dt = opt.dt;
    tr.k_lstm = k_lstm;
    tr.t.resize(rows);
    for (auto* mat : {&tr.x, &tr.x_m, &tr.e, &tr.e_norm}) mat->setZero(n, rows);
    tr.r.setZero(s, rows);
    for (auto* mat : {&tr.u_bl, &tr.u_ad, &tr.u_lstm, &tr.u_lstm_raw, &tr.v, &tr.u_cmd, &tr.u_applied,
                      &tr.f_true, &tr.f_hat, &tr.y, &tr.u_r})
        mat->setZero(m, rows);

    const Eigen::Index samples = lstm ? (N / opt.lstm_stride + 1) : 0;
    if (lstm) {
        tr.lstm_inputs.resize(n_in, samples);
        tr.lstm_targets.resize(m, samples);
        tr.lstm_outputs.resize(m, samples);
        tr.sample_steps.reserve(static_cast<std::size_t>(samples));
    }
    SequenceCache cache;
    if (lstm) cache.reset(*lstm, samples, LstmState::zeros(lstm->n_h));

    AnnWeights w0 = opt.initial_weights ? *opt.initial_weights
                                        : init_ann_weights(sys.n_p, m, sc.ann, opt.ann_seed);
    LoopState state = initial_loop_state(sys, std::move(w0));

    Vector raw = Vector::Zero(m);
    Vector input(n_in);
    Vector r(s);
    Eigen::Index sample = 0;
    for (Eigen::Index k = 0; k < rows; ++k) {
        const double t = double(k) * opt.dt;
        state.t = t;
        const Vector e = state.x - state.x_m;
        r.setConstant(reference_command(t, sc.command));

        Vector u_r(m);
        for (Eigen::Index j = 0; j < m; ++j)
            u_r(j) = rate_flag_value(state.actuators[static_cast<std::size_t>(j)].rate_flag);
        if (norm) tr.e_norm.col(k) = normalize_error(e, *norm);

        const Vector x_p = state.x.head(sys.n_p);
        const AnnOutput nn = ann_forward(state.w, x_p, sc.ann);
        const Vector f_true = opt.f(x_p, t);
        const Vector y = nn.f_hat - f_true;

        if (lstm && k % opt.lstm_stride == 0) {
            input.head(n) = tr.e_norm.col(k);
            if (opt.rate_informed) input.tail(m) = u_r;
            cache.step(*lstm, sample, input);
            raw = fc_forward(*lstm, cache.H.col(sample + 1));
            tr.lstm_inputs.col(sample) = input;
            tr.lstm_targets.col(sample) = y;
            tr.lstm_outputs.col(sample) = raw;
            tr.sample_steps.push_back(k);
            ++sample;
        }
        const Vector u_lstm = (k_lstm == 0.0 || !lstm) ? Vector::Zero(m) : Vector(k_lstm * raw);
        const Vector v = robustifying_term(e, sys, state.w, sc.k_z, sc.Z_M);
        const Vector u_bl = -sys.loop.gain_K * state.x;
        const Vector u_cmd = u_bl - nn.f_hat + u_lstm + v;

        tr.t(k) = t;
        tr.x.col(k) = state.x;
        tr.x_m.col(k) = state.x_m;
        tr.e.col(k) = e;
        tr.r.col(k) = r;
        tr.u_bl.col(k) = u_bl;
        tr.u_ad.col(k) = -nn.f_hat;
        tr.u_lstm.col(k) = u_lstm;
        tr.u_lstm_raw.col(k) = lstm ? raw : Vector::Zero(m);
        tr.v.col(k) = v;
        tr.u_cmd.col(k) = u_cmd;
        tr.f_true.col(k) = f_true;
        tr.f_hat.col(k) = nn.f_hat;
        tr.y.col(k) = y;
        tr.u_r.col(k) = u_r;

        if (k == N) {
            if (opt.saturation_on) {
                auto preview = state.actuators;
                tr.u_applied.col(k) = apply_actuators(sys, u_cmd, preview, opt.dt);
            } else {
                tr.u_applied.col(k) = u_cmd;
            }
            break;
        }
        state = coupled_step(sys, state, r, u_lstm, v, opt.f, sc.ann, opt.dt, opt.saturation_on);
        if (opt.saturation_on) {
            for (Eigen::Index j = 0; j < m; ++j)
                tr.u_applied(j, k) = state.actuators[static_cast<std::size_t>(j)].deflection;
        } else {
            tr.u_applied.col(k) = u_cmd;
        }
    }
    tr.final_weights = state.w;
    if (lstm && opt.keep_lstm_cache) tr.lstm_cache = std::move(cache);
    return tr;
}

/// Linear ramp min(episode / ramp_episodes, 1).
inline double k_lstm_schedule(int episode, const TrainConfig& cfg) {
    if (cfg.ramp_episodes <= 0) return 1.0;
    return std::min(double(std::max(episode, 0)) / double(cfg.ramp_episodes), 1.0);
}

namespace detail {

enum SeedStream : std::uint64_t {
    kStreamLstmInit = 0x4C53544DULL,
    kStreamNormGains = 0x4E4F524DULL,
    kStreamNormAnn = 0x1000000ULL,
    kStreamTrainAnn = 0x2000000ULL,
    kStreamEvalAnn = 0x3000000ULL,
};

}  // namespace detail

inline std::uint64_t eval_ann_seed(std::uint64_t seed) {
    return detail::mix_seed(seed, detail::kStreamEvalAnn);
}

using GainSampler = std::function<double(std::mt19937_64&)>;

/// Min/max of every error component over `norm_runs` LSTM-free episodes, each with the training
/// schedule scaled by a fresh gain (U[0, 1] unless `gain` is given).
inline NormParams collect_normalization(const TrainConfig& cfg, const Scenario& sc, const GainSampler& gain = {}) {
    cfg.validate();
    std::mt19937_64 rng(detail::mix_seed(cfg.seed, detail::kStreamNormGains));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    NormParams np;
    np.e_min = Vector::Constant(sc.sys.n, std::numeric_limits<double>::infinity());
    np.e_max = Vector::Constant(sc.sys.n, -std::numeric_limits<double>::infinity());
    for (int run = 0; run < cfg.norm_runs; ++run) {
        EpisodeOptions opt;
        opt.f = scheduled_uncertainty(ScheduleKind::train, gain ? gain(rng) : unit(rng));
        opt.duration = cfg.episode_duration;
        opt.dt = cfg.dt;
        opt.saturation_on = cfg.saturation_in_training;
        opt.ann_seed = detail::mix_seed(cfg.seed, detail::kStreamNormAnn + std::uint64_t(run));
        const EpisodeTrace tr = run_episode(sc, opt, nullptr, 0.0, nullptr);
        np.e_min = np.e_min.cwiseMin(tr.e.rowwise().minCoeff());
        np.e_max = np.e_max.cwiseMax(tr.e.rowwise().maxCoeff());
    }
    np.validate();
    return np;
}

struct LossRecord {
    int episode = 0;
    double k_lstm = 0.0;
    double scale = 0.0;
    double mse = 0.0;
};

/// Everything needed to continue training bit-identically.
struct TrainState {
    LstmParams params;
    AdamState adam;
    int episodes_done = 0;
    std::vector<LossRecord> history;
    std::optional<AnnWeights> carried_ann;  // only when ANN weights persist across episodes
};

inline TrainState initial_train_state(const TrainConfig& cfg, const Scenario& sc) {
    cfg.validate();
    TrainState st;
    st.params = lstm_init(lstm_input_size(sc.sys, cfg.rate_informed), cfg.lstm_hidden, sc.sys.m,
                          detail::mix_seed(cfg.seed, detail::kStreamLstmInit));
    st.adam = AdamState::for_params(st.params);
    st.adam.lr = cfg.optimizer.lr;
    st.adam.beta1 = cfg.optimizer.beta1;
    st.adam.beta2 = cfg.optimizer.beta2;
    st.adam.epsilon = cfg.optimizer.epsilon;
    st.adam.l2 = cfg.optimizer.l2;
    st.adam.clip_threshold = cfg.optimizer.clip_threshold;
    return st;
}

inline EpisodeOptions training_episode_options(const TrainConfig& cfg, int episode, const TrainState& st) {
    EpisodeOptions opt;
    const double scale = cfg.scale_values[static_cast<std::size_t>(episode) % cfg.scale_values.size()];
    opt.f = scheduled_uncertainty(ScheduleKind::train, scale);
    opt.duration = cfg.episode_duration;
    opt.dt = cfg.dt;
    opt.saturation_on = cfg.saturation_in_training;
    opt.rate_informed = cfg.rate_informed;
    opt.lstm_stride = cfg.lstm_stride;
    opt.keep_lstm_cache = true;
    if (cfg.reset_ann_each_episode) {
        opt.ann_seed = detail::mix_seed(cfg.seed, detail::kStreamTrainAnn + std::uint64_t(episode));
    } else {
        opt.ann_seed = detail::mix_seed(cfg.seed, detail::kStreamTrainAnn);
        opt.initial_weights = st.carried_ann;
    }
    return opt;
}

using EpisodeCallback = std::function<void(const LossRecord&)>;

/// Runs episodes st.episodes_done .. cfg.episodes - 1: simulate with the current parameters,
/// full-sequence BPTT on (output, target) pairs, one clipped Adam step per episode.
inline TrainState train(const TrainConfig& cfg, const Scenario& sc, const NormParams& norm, TrainState st,
                        const EpisodeCallback& on_episode = {}) {
    cfg.validate();
    detail::require(st.params.n_in == lstm_input_size(sc.sys, cfg.rate_informed), ErrorKind::DimensionMismatch,
                    "LSTM input size does not match the rate_informed setting");
    for (int ep = st.episodes_done; ep < cfg.episodes; ++ep) {
        const double k = k_lstm_schedule(ep, cfg);
        const EpisodeOptions opt = training_episode_options(cfg, ep, st);
        EpisodeTrace tr;
        try {
            tr = run_episode(sc, opt, &st.params, k, &norm);
        } catch (const Error& err) {
            throw Error(err.kind(), "training episode " + std::to_string(ep) + ": " + err.what());
        }
        const BpttResult grad = bptt(st.params, *tr.lstm_cache, tr.lstm_targets);
        if (!grad.grads.theta.allFinite() || !std::isfinite(grad.loss)) {
            throw Error(ErrorKind::NonFinite, "training episode " + std::to_string(ep) + ": non-finite gradient");
        }
        clip_and_step(st.params, grad.grads, st.adam);
        if (!cfg.reset_ann_each_episode) st.carried_ann = tr.final_weights;
        const double scale = cfg.scale_values[static_cast<std::size_t>(ep) % cfg.scale_values.size()];
        st.history.push_back(LossRecord{ep, k, scale, grad.loss});
        st.episodes_done = ep + 1;
        if (on_episode) on_episode(st.history.back());
    }
    return st;
}

}  // namespace lstm_mrac
