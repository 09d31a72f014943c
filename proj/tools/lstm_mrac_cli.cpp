// lstm-mrac: normalization collection, training, evaluation and trace comparison.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "lstm_mrac.hpp"

namespace fs = std::filesystem;
using namespace lstm_mrac;

namespace {

enum Exit { kOk = 0, kNotImproved = 1, kValidation = 2, kDivergence = 3, kMismatch = 4 };

int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::Diverged:
    case ErrorKind::NonFinite:
    case ErrorKind::NoConvergence: return kDivergence;
    case ErrorKind::DimensionMismatch:
    case ErrorKind::LengthMismatch:
    case ErrorKind::GridMismatch: return kMismatch;
    default: return kValidation;
    }
}

struct Common {
    std::string config;
    std::string out_dir = "out";
    std::string name;
    std::optional<std::uint64_t> seed;
    bool rate_informed = false;
};

RunConfig load_config(const Common& c) {
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
    if (c.seed) cfg.train.seed = *c.seed;
    if (c.rate_informed) {
        cfg.train.rate_informed = true;
        cfg.train.saturation_in_training = true;
        cfg.eval.saturation = true;
    }
    cfg.validate();
    return cfg;
}

void print_norm(const NormParams& np) {
    for (Eigen::Index i = 0; i < np.e_min.size(); ++i)
        std::printf("e%ld: min %.17g max %.17g\n", long(i + 1), np.e_min(i), np.e_max(i));
}

int cmd_norm_collect(const Common& c) {
    const RunConfig cfg = load_config(c);
    const NormParams np = collect_normalization(cfg.train, cfg.scenario());
    const fs::path out = fs::path(c.out_dir) / (c.name.empty() ? "norm.json" : c.name + ".json");
    save_norm(out, np);
    print_norm(np);
    std::printf("wrote %s\n", out.string().c_str());
    return kOk;
}

int cmd_train(const Common& c, const std::string& norm_path, const std::string& resume_path,
              std::optional<int> episodes, bool quiet) {
    RunConfig cfg = load_config(c);
    if (episodes) cfg.train.episodes = *episodes;
    cfg.validate();
    const fs::path np_path = norm_path.empty() ? fs::path(c.out_dir) / "norm.json" : fs::path(norm_path);
    if (!fs::exists(np_path))
        throw Error(ErrorKind::Io, "normalization file " + np_path.string() + " not found; run norm-collect first");
    const NormParams np = load_norm(np_path);
    std::optional<Checkpoint> resume;
    if (!resume_path.empty()) resume = load_checkpoint(resume_path);
    const Scenario sc = cfg.scenario();
    const Checkpoint ck = train_checkpoint(cfg, sc, np, resume, [quiet](const LossRecord& r) {
        if (!quiet) std::printf("episode %d k_lstm %.3f scale %g mse %.6g\n", r.episode, r.k_lstm, r.scale, r.mse);
    });
    const std::string stem = c.name.empty() ? (cfg.train.rate_informed ? "lstm_rate" : "lstm") : c.name;
    const fs::path ck_path = fs::path(c.out_dir) / (stem + ".ckpt.json");
    save_checkpoint(ck_path, ck);
    save_loss_csv(fs::path(c.out_dir) / (stem + "_loss.csv"), ck.state.history);
    std::printf("wrote %s (%d episodes)\n", ck_path.string().c_str(), ck.state.episodes_done);
    return kOk;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& scenario, bool no_lstm,
             bool rate_flag_given) {
    RunConfig cfg = load_config(c);
    const EvalScenario which = eval_scenario_from(scenario);
    std::optional<Checkpoint> ck;
    if (!no_lstm && !checkpoint.empty() && checkpoint != "none") {
        ck = load_checkpoint(checkpoint);
        if (rate_flag_given && !ck->rate_informed)
            throw Error(ErrorKind::DimensionMismatch,
                        "--rate-informed given but the checkpoint has n_in = " + std::to_string(ck->state.params.n_in));
        if (ck->rate_informed) cfg.eval.saturation = true;
    }
    const Scenario sc = cfg.scenario();
    const EpisodeTrace tr = run_evaluation(cfg, sc, which, ck ? &*ck : nullptr);
    const std::string stem =
        c.name.empty() ? std::string(eval_scenario_name(which)) + (ck ? "_lstm" : "_nolstm") : c.name;
    const fs::path csv = fs::path(c.out_dir) / (stem + ".csv");
    save_trace_csv(csv, tr);
    const TraceMetrics mt = trace_metrics(tr);
    Json meta = metrics_json(mt);
    detail::write_text(fs::path(c.out_dir) / (stem + "_metrics.json"), meta.dump(2) + "\n");
    std::printf("pitch-rate error rms %.6g max %.6g, rate-saturated steps %ld\nwrote %s\n", mt.pitch_rate_rms,
                mt.pitch_rate_max, long(mt.rate_saturation_steps), csv.string().c_str());
    return kOk;
}

int cmd_compare(const std::string& a_path, const std::string& b_path, const std::string& out) {
    const std::string a_text = detail::read_text(a_path);
    const std::string b_text = detail::read_text(b_path);
    const auto [n, m] = trace_csv_dims(a_text);
    const auto dims_b = trace_csv_dims(b_text);
    detail::require(dims_b.first == n && dims_b.second == m, ErrorKind::DimensionMismatch,
                    "traces have different state or input dimensions");
    const Comparison cmp = compare_traces(parse_trace_csv(a_text, n, m), parse_trace_csv(b_text, n, m));
    const std::string report = comparison_json(cmp).dump(2) + "\n";
    if (!out.empty()) detail::write_text(out, report);
    std::cout << report;
    return cmp.improved() ? kOk : kNotImproved;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LSTM-augmented adaptive flight control: normalization, training, evaluation"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "run config JSON (defaults apply when omitted)");
        sub->add_option("--out-dir", common.out_dir, "output directory")->capture_default_str();
        sub->add_option("--name", common.name, "output file stem");
        sub->add_option("--seed", common.seed, "override train.seed");
        sub->add_flag("--rate-informed", common.rate_informed,
                      "rate-limit-informed variant: u_r input, saturation in training and evaluation");
    };

    auto* norm = app.add_subcommand("norm-collect", "collect error normalization ranges");
    add_common(norm);

    std::string norm_path, resume_path;
    std::optional<int> episodes;
    bool quiet = false;
    auto* tr = app.add_subcommand("train", "train the LSTM in the closed loop");
    add_common(tr);
    tr->add_option("--norm", norm_path, "normalization file (default <out-dir>/norm.json)");
    tr->add_option("--checkpoint", resume_path, "resume from this checkpoint");
    tr->add_option("--episodes", episodes, "override train.episodes");
    tr->add_flag("--quiet", quiet, "no per-episode output");

    std::string checkpoint = "none", scenario = "test-large";
    bool no_lstm = false;
    auto* ev = app.add_subcommand("eval", "simulate one evaluation scenario and write trace and metrics");
    add_common(ev);
    ev->add_option("--checkpoint", checkpoint, "checkpoint file or 'none'")->capture_default_str();
    ev->add_option("--scenario", scenario, "train | test-small | test-large")->capture_default_str();
    ev->add_flag("--no-lstm", no_lstm, "ignore the checkpoint and run ANN only");

    std::string trace_a, trace_b, report_out;
    auto* cmp = app.add_subcommand("compare", "metric ratios b / a of two traces; exit 0 when b improves");
    cmp->add_option("trace_a", trace_a, "baseline trace CSV")->required();
    cmp->add_option("trace_b", trace_b, "candidate trace CSV")->required();
    cmp->add_option("--out", report_out, "also write the report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kValidation;
    }

    try {
        if (*norm) return cmd_norm_collect(common);
        if (*tr) return cmd_train(common, norm_path, resume_path, episodes, quiet);
        if (*ev) return cmd_eval(common, checkpoint, scenario, no_lstm, common.rate_informed);
        if (*cmp) return cmd_compare(trace_a, trace_b, report_out);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kValidation;
    }
    return kValidation;
}
