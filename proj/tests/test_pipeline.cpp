#include <gtest/gtest.h>

#include "lstm_mrac/pipeline.hpp"

using namespace lstm_mrac;

namespace {

EpisodeOptions test_options(double scale, double duration) {
    EpisodeOptions opt;
    opt.f = scheduled_uncertainty(ScheduleKind::test, scale);
    opt.duration = duration;
    opt.ann_seed = 3;
    return opt;
}

NormParams unit_norm() { return NormParams{Vector::Constant(3, -0.1), Vector::Constant(3, 0.1)}; }

TrainConfig small_train(int episodes) {
    TrainConfig cfg;
    cfg.episodes = episodes;
    cfg.ramp_episodes = 2;
    cfg.episode_duration = 3.0;
    cfg.lstm_hidden = 8;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST(Normalize, Examples) {
    NormParams np{Vector::Constant(3, -1.0), Vector::Constant(3, 1.0)};
    EXPECT_EQ(normalize_error(np.e_min, np), Vector::Zero(3));
    EXPECT_EQ(normalize_error(np.e_max, np), Vector::Ones(3));
    EXPECT_EQ(normalize_error(Vector::Zero(3), np), Vector::Constant(3, 0.5));
    EXPECT_DOUBLE_EQ(normalize_error(Vector::Constant(3, 3.0), np)(0), 2.0);
    np.e_max(1) = np.e_min(1);
    try {
        normalize_error(Vector::Zero(3), np);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegenerateRange);
    }
}

TEST(KSchedule, LinearRamp) {
    TrainConfig cfg;
    cfg.ramp_episodes = 100;
    EXPECT_EQ(k_lstm_schedule(0, cfg), 0.0);
    EXPECT_EQ(k_lstm_schedule(50, cfg), 0.5);
    EXPECT_EQ(k_lstm_schedule(100, cfg), 1.0);
    EXPECT_EQ(k_lstm_schedule(400, cfg), 1.0);
}

TEST(RunEpisode, NoUncertaintyPureTracking) {
    const Scenario sc = b747_scenario();
    EpisodeOptions opt;
    opt.f = zero_uncertainty(1);
    opt.duration = 20.0;
    const EpisodeTrace tr = run_episode(sc, opt, nullptr, 0.0, nullptr);
    EXPECT_EQ(tr.rows(), 2001);
    EXPECT_LT(tr.e.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(tr.u_ad.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(tr.u_lstm, Matrix::Zero(1, 2001));
    EXPECT_GT(tr.x_m.cwiseAbs().maxCoeff(), 0.01);
}

TEST(RunEpisode, ZeroGainMatchesAbsentLstmBitwise) {
    const Scenario sc = b747_scenario();
    const EpisodeOptions opt = test_options(1.0, 10.0);
    const NormParams np = unit_norm();
    const LstmParams a = lstm_init(3, 8, 1, 1), b = lstm_init(3, 8, 1, 2);
    const EpisodeTrace none = run_episode(sc, opt, nullptr, 0.0, nullptr);
    const EpisodeTrace ta = run_episode(sc, opt, &a, 0.0, &np);
    const EpisodeTrace tb = run_episode(sc, opt, &b, 0.0, &np);
    EXPECT_EQ(ta.x, none.x);
    EXPECT_EQ(ta.u_cmd, none.u_cmd);
    EXPECT_EQ(ta.x, tb.x);
    EXPECT_EQ(ta.f_hat, tb.f_hat);
    EXPECT_NE(ta.lstm_outputs, tb.lstm_outputs);
}

TEST(RunEpisode, TruthAndInjectionIdentities) {
    const Scenario sc = b747_scenario();
    const EpisodeOptions opt = test_options(1.0, 20.0);
    const NormParams np = unit_norm();
    const LstmParams p = lstm_init(3, 8, 1, 1);
    const EpisodeTrace tr = run_episode(sc, opt, &p, 0.35, &np);
    EXPECT_LT((tr.f_hat - tr.y - tr.f_true).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(tr.u_lstm, Matrix(0.35 * tr.u_lstm_raw));
    EXPECT_LE(tr.u_lstm_raw.cwiseAbs().maxCoeff(), output_bound(p));
    EXPECT_EQ(tr.lstm_targets, tr.y);
    EXPECT_EQ(tr.lstm_outputs, tr.u_lstm_raw);
    const Matrix expect = tr.u_bl + tr.u_ad + tr.u_lstm + tr.v;
    EXPECT_LT((tr.u_cmd - expect).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(tr.u_applied, tr.u_cmd);
}

TEST(RunEpisode, OfflineReplayMatchesInLoopOutputs) {
    const Scenario sc = b747_scenario();
    EpisodeOptions opt = test_options(1.0, 5.0);
    opt.keep_lstm_cache = true;
    const NormParams np = unit_norm();
    const LstmParams p = lstm_init(3, 8, 1, 1);
    const EpisodeTrace tr = run_episode(sc, opt, &p, 1.0, &np);
    const SequenceResult replay = sequence_forward(p, tr.lstm_inputs, LstmState::zeros(8));
    EXPECT_EQ(replay.outputs, tr.lstm_outputs);
}

TEST(RunEpisode, StrideHoldsOutput) {
    const Scenario sc = b747_scenario();
    EpisodeOptions opt = test_options(1.0, 1.0);
    opt.lstm_stride = 4;
    const NormParams np = unit_norm();
    const LstmParams p = lstm_init(3, 8, 1, 1);
    const EpisodeTrace tr = run_episode(sc, opt, &p, 1.0, &np);
    EXPECT_EQ(tr.lstm_outputs.cols(), 26);
    EXPECT_EQ(tr.u_lstm(0, 5), tr.u_lstm(0, 4));
    EXPECT_EQ(tr.sample_steps[1], 4);
}

TEST(RunEpisode, RateFlagReachesLstmInput) {
    Scenario sc = b747_scenario();
    sc.command = CommandSpec::doublet(0.5, 4.0);
    EpisodeOptions opt = test_options(1.0, 8.0);
    opt.saturation_on = true;
    opt.rate_informed = true;
    const NormParams np = unit_norm();
    const LstmParams p = lstm_init(4, 8, 1, 1);
    const EpisodeTrace tr = run_episode(sc, opt, &p, 0.0, &np);
    const double step = sc.sys.plant.sat_rate * opt.dt;
    int positive = 0, negative = 0;
    for (Eigen::Index k = 1; k < tr.rows(); ++k) {
        const double moved = tr.u_applied(0, k - 1) - (k >= 2 ? tr.u_applied(0, k - 2) : 0.0);
        if (tr.u_r(0, k) == 0.1) {
            ++positive;
            EXPECT_NEAR(moved, step, 1e-12) << "step " << k;
        } else if (tr.u_r(0, k) == -0.1) {
            ++negative;
            EXPECT_NEAR(moved, -step, 1e-12) << "step " << k;
        } else {
            EXPECT_EQ(tr.u_r(0, k), 0.0);
        }
    }
    EXPECT_GT(positive, 0);
    EXPECT_GT(negative, 0);
    EXPECT_EQ(Matrix(tr.lstm_inputs.row(3)), Matrix(tr.u_r));
    // applied deflection never exceeds the limits
    EXPECT_LE(tr.u_applied.maxCoeff(), sc.sys.plant.sat_mag_hi);
    EXPECT_GE(tr.u_applied.minCoeff(), sc.sys.plant.sat_mag_lo);
}

TEST(RunEpisode, InputSizeMismatch) {
    const Scenario sc = b747_scenario();
    EpisodeOptions opt = test_options(1.0, 1.0);
    opt.rate_informed = true;
    const NormParams np = unit_norm();
    const LstmParams p = lstm_init(3, 8, 1, 1);
    try {
        run_episode(sc, opt, &p, 1.0, &np);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
    EXPECT_THROW(run_episode(sc, test_options(1.0, 1.0), &p, 1.0, nullptr), Error);
}

TEST(Normalization, ZeroGainIsDegenerate) {
    const Scenario sc = b747_scenario();
    TrainConfig cfg;
    cfg.norm_runs = 1;
    try {
        collect_normalization(cfg, sc, [](std::mt19937_64&) { return 0.0; });
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegenerateRange);
    }
}

TEST(Normalization, DeterministicAndContaining) {
    const Scenario sc = b747_scenario();
    TrainConfig cfg;
    cfg.norm_runs = 50;
    cfg.seed = 3;
    const NormParams a = collect_normalization(cfg, sc), b = collect_normalization(cfg, sc);
    EXPECT_EQ(a.e_min, b.e_min);
    EXPECT_EQ(a.e_max, b.e_max);
    EXPECT_TRUE((a.e_min.array() < 0).all());
    EXPECT_TRUE((a.e_max.array() > 0).all());
    // a single-run collection with every gain at most 1 stays inside the 50-run envelope
    cfg.norm_runs = 1;
    const NormParams one = collect_normalization(cfg, sc);
    EXPECT_TRUE((one.e_min.array() >= a.e_min.array()).all());
    EXPECT_TRUE((one.e_max.array() <= a.e_max.array()).all());
}

TEST(Train, ZeroEpisodes) {
    const Scenario sc = b747_scenario();
    const TrainConfig cfg = small_train(0);
    const TrainState init = initial_train_state(cfg, sc);
    const TrainState st = train(cfg, sc, unit_norm(), init);
    EXPECT_EQ(st.params.theta, init.params.theta);
    EXPECT_TRUE(st.history.empty());
}

TEST(Train, DeterministicAndResumable) {
    const Scenario sc = b747_scenario();
    const TrainConfig cfg = small_train(4);
    const TrainState a = train(cfg, sc, unit_norm(), initial_train_state(cfg, sc));
    const TrainState b = train(cfg, sc, unit_norm(), initial_train_state(cfg, sc));
    ASSERT_EQ(a.history.size(), 4u);
    EXPECT_EQ(a.params.theta, b.params.theta);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.history[i].mse, b.history[i].mse);
    EXPECT_EQ(a.history[0].scale, 0.2);
    EXPECT_EQ(a.history[1].scale, 2.0);
    EXPECT_EQ(a.history[1].k_lstm, 0.5);

    TrainConfig half = cfg;
    half.episodes = 2;
    TrainState resumed = train(half, sc, unit_norm(), initial_train_state(cfg, sc));
    resumed = train(cfg, sc, unit_norm(), resumed);
    EXPECT_EQ(resumed.params.theta, a.params.theta);
    EXPECT_EQ(resumed.adam.first_moment, a.adam.first_moment);
    EXPECT_EQ(resumed.adam.second_moment, a.adam.second_moment);
    EXPECT_EQ(resumed.adam.step_count, 4);
    EXPECT_NE(a.params.theta, initial_train_state(cfg, sc).params.theta);
}

TEST(Train, CarriedAnnWeights) {
    const Scenario sc = b747_scenario();
    TrainConfig cfg = small_train(2);
    cfg.reset_ann_each_episode = false;
    const TrainState st = train(cfg, sc, unit_norm(), initial_train_state(cfg, sc));
    ASSERT_TRUE(st.carried_ann.has_value());
    EXPECT_GT(st.carried_ann->W_hat.norm(), 0.0);
}

TEST(Train, DivergenceNamesEpisode) {
    const Scenario sc = b747_scenario();
    TrainConfig cfg = small_train(1);
    cfg.ramp_episodes = 0;
    TrainState st = initial_train_state(cfg, sc);
    st.params.b_fc().setConstant(1e5);
    try {
        train(cfg, sc, unit_norm(), st);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Diverged);
        EXPECT_NE(std::string(e.what()).find("training episode 0"), std::string::npos);
    }
}
