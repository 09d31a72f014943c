#pragma once

// Evaluation runs shared by the command-line tool and the acceptance suite.

#include "io.hpp"

namespace lstm_mrac {

enum class EvalScenario { train, test_small, test_large };

inline EvalScenario eval_scenario_from(const std::string& name) {
    if (name == "train") return EvalScenario::train;
    if (name == "test-small") return EvalScenario::test_small;
    if (name == "test-large") return EvalScenario::test_large;
    throw Error(ErrorKind::InvalidArgument, "unknown scenario '" + name + "' (train, test-small, test-large)");
}

inline const char* eval_scenario_name(EvalScenario s) {
    switch (s) {
    case EvalScenario::train: return "train";
    case EvalScenario::test_small: return "test-small";
    case EvalScenario::test_large: return "test-large";
    }
    return "?";
}

/// The training scenario runs f_train at unit scale for one episode length; the test scenarios
/// run f_test at the small or large scale for eval.duration.
inline EpisodeOptions eval_options(const RunConfig& cfg, EvalScenario which, bool rate_informed) {
    EpisodeOptions opt;
    opt.dt = cfg.train.dt;
    opt.saturation_on = cfg.eval.saturation;
    opt.rate_informed = rate_informed;
    opt.lstm_stride = cfg.train.lstm_stride;
    opt.ann_seed = eval_ann_seed(cfg.train.seed);
    switch (which) {
    case EvalScenario::train:
        opt.f = scheduled_uncertainty(ScheduleKind::train, 1.0);
        opt.duration = cfg.train.episode_duration;
        break;
    case EvalScenario::test_small:
        opt.f = scheduled_uncertainty(ScheduleKind::test, cfg.eval.small_scale);
        opt.duration = cfg.eval.duration;
        break;
    case EvalScenario::test_large:
        opt.f = scheduled_uncertainty(ScheduleKind::test, cfg.eval.large_scale);
        opt.duration = cfg.eval.duration;
        break;
    }
    return opt;
}

/// One evaluation episode; without a checkpoint the LSTM is absent and u_lstm is identically 0.
inline EpisodeTrace run_evaluation(const RunConfig& cfg, const Scenario& sc, EvalScenario which,
                                   const Checkpoint* ck) {
    const bool rate = ck ? ck->rate_informed : cfg.train.rate_informed;
    const EpisodeOptions opt = eval_options(cfg, which, rate);
    if (!ck) return run_episode(sc, opt, nullptr, 0.0, nullptr);
    detail::require(ck->state.params.n_in == lstm_input_size(sc.sys, rate), ErrorKind::DimensionMismatch,
                    "checkpoint has n_in = " + std::to_string(ck->state.params.n_in) + " but the run provides " +
                        std::to_string(lstm_input_size(sc.sys, rate)) + " inputs");
    return run_episode(sc, opt, &ck->state.params, 1.0, &ck->norm);
}

/// Trains from scratch (or continues `resume`) and packages the result as a checkpoint.
inline Checkpoint train_checkpoint(const RunConfig& cfg, const Scenario& sc, const NormParams& norm,
                                   std::optional<Checkpoint> resume = std::nullopt,
                                   const EpisodeCallback& on_episode = {}) {
    Checkpoint ck;
    ck.seed = cfg.train.seed;
    ck.rate_informed = cfg.train.rate_informed;
    ck.norm = norm;
    if (resume) {
        detail::require(resume->seed == cfg.train.seed && resume->rate_informed == cfg.train.rate_informed,
                        ErrorKind::InvalidArgument, "checkpoint seed or rate_informed differs from the config");
        detail::require(resume->state.episodes_done <= cfg.train.episodes, ErrorKind::InvalidArgument,
                        "checkpoint already has more episodes than the config asks for");
        ck.norm = resume->norm;
        ck.state = train(cfg.train, sc, ck.norm, resume->state, on_episode);
    } else {
        ck.state = train(cfg.train, sc, norm, initial_train_state(cfg.train, sc), on_episode);
    }
    return ck;
}

}  // namespace lstm_mrac
