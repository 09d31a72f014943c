#pragma once

// Run configuration, normalization file, checkpoint, trace CSV and metric serialization.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "analysis.hpp"

namespace lstm_mrac {

using Json = nlohmann::ordered_json;

struct EvalConfig {
    double duration = 110.0;
    bool saturation = false;
    double small_scale = 0.1;
    double large_scale = 1.0;
};

/// Everything a CLI run needs besides the checkpoint.
struct RunConfig {
    PlantModel plant = b747_model();
    Vector Q_lqr_diag = Vector::Ones(3);
    Vector R_lqr_diag = Vector::Ones(1);
    Vector Q_lyap_diag = Vector::Ones(3);
    Eigen::Index ann_hidden = 4;
    double ann_F = 10.0;
    double ann_G = 10.0;
    double kappa = 0.0;
    Activation activation = Activation::sigmoid;
    double W_M = 10.0;
    double V_M = 10.0;
    double eps_N = 0.1;
    double k_z = 0.0;
    CommandSpec command;
    TrainConfig train;
    EvalConfig eval;

    [[nodiscard]] NnBounds bounds() const { return NnBounds::make(W_M, V_M, eps_N, activation); }

    [[nodiscard]] Scenario scenario() const {
        Scenario sc;
        sc.sys = build_augmented(plant, Q_lqr_diag.asDiagonal().toDenseMatrix(),
                                 R_lqr_diag.asDiagonal().toDenseMatrix(), Q_lyap_diag.asDiagonal().toDenseMatrix());
        sc.ann = AnnConfig::with_scalar_rates(sc.sys.n_p, ann_hidden, ann_F, ann_G, kappa, activation);
        sc.ann.validate(sc.sys.n_p);
        sc.k_z = k_z;
        sc.Z_M = bounds().Z_M;
        sc.command = command;
        return sc;
    }

    void validate() const {
        plant.validate();
        train.validate();
        detail::require(eval.duration > 0.0 && eval.duration <= 110.0 + 1e-9, ErrorKind::InvalidArgument,
                        "eval.duration must lie in (0, 110]");
        detail::require(k_z >= 0.0 && kappa >= 0.0, ErrorKind::InvalidArgument, "k_z and kappa must be >= 0");
        detail::require(ann_hidden >= 1, ErrorKind::InvalidArgument, "ann.hidden must be >= 1");
    }
};

namespace detail {

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::Io, "cannot write " + path.string());
    out << text;
    require(out.good(), ErrorKind::Io, "write failed for " + path.string());
}

inline Json parse_json(const std::string& text, const std::string& origin) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorKind::InvalidArgument, origin + ": " + ex.what());
    }
}

inline void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    require(j.is_object(), ErrorKind::InvalidArgument, where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items())
        require(ok.count(key) > 0, ErrorKind::InvalidArgument, "unknown key '" + where + "." + key + "'");
}

template <class T>
void get_if(const Json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorKind::InvalidArgument, where + "." + key + ": " + ex.what());
    }
}

inline Json to_json(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Json to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline double number(const Json& j, const std::string& where) {
    require(j.is_number(), ErrorKind::InvalidArgument, where + " must be a number");
    return j.get<double>();
}

inline Vector vector_from(const Json& j, const std::string& where) {
    require(j.is_array(), ErrorKind::InvalidArgument, where + " must be an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(Eigen::Index(i)) = number(j[i], where);
    return v;
}

// Row-major nested arrays.
inline Matrix matrix_from(const Json& j, const std::string& where) {
    require(j.is_array() && !j.empty(), ErrorKind::InvalidArgument, where + " must be a nonempty array of rows");
    const auto rows = Eigen::Index(j.size());
    require(j[0].is_array(), ErrorKind::InvalidArgument, where + " must be an array of rows");
    const auto cols = Eigen::Index(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Json& row = j[std::size_t(i)];
        require(row.is_array() && Eigen::Index(row.size()) == cols, ErrorKind::InvalidArgument,
                where + " has ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = number(row[std::size_t(c)], where);
    }
    return m;
}

inline Activation activation_from(const std::string& name) {
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    throw Error(ErrorKind::InvalidArgument, "unknown activation '" + name + "'");
}

inline const char* activation_name(Activation a) { return a == Activation::sigmoid ? "sigmoid" : "tanh"; }

}  // namespace detail

inline RunConfig parse_run_config(const Json& j) {
    using namespace detail;
    check_keys(j, "config", {"plant", "lqr", "lyapunov", "ann", "robust", "command", "train", "eval"});
    RunConfig c;
    if (j.contains("plant")) {
        const Json& p = j["plant"];
        check_keys(p, "plant", {"model", "A_p", "B_p", "C_p", "sat_mag_hi_deg", "sat_mag_lo_deg",
                                "sat_rate_deg_s", "b_x"});
        std::string model = "b747";
        get_if(p, "model", model, "plant");
        require(model == "b747", ErrorKind::InvalidArgument, "unknown plant model '" + model + "'");
        if (p.contains("A_p")) c.plant.A_p = matrix_from(p["A_p"], "plant.A_p");
        if (p.contains("B_p")) c.plant.B_p = matrix_from(p["B_p"], "plant.B_p");
        if (p.contains("C_p")) c.plant.C_p = matrix_from(p["C_p"], "plant.C_p");
        double hi = 17.0, lo = -23.0, rate = 37.0;
        get_if(p, "sat_mag_hi_deg", hi, "plant");
        get_if(p, "sat_mag_lo_deg", lo, "plant");
        get_if(p, "sat_rate_deg_s", rate, "plant");
        c.plant.sat_mag_hi = deg_to_rad(hi);
        c.plant.sat_mag_lo = deg_to_rad(lo);
        c.plant.sat_rate = deg_to_rad(rate);
        get_if(p, "b_x", c.plant.b_x, "plant");
    }
    const Eigen::Index n = c.plant.n_p() + c.plant.s();
    c.Q_lqr_diag = Vector::Ones(n);
    c.R_lqr_diag = Vector::Ones(c.plant.m());
    c.Q_lyap_diag = Vector::Ones(n);
    if (j.contains("lqr")) {
        check_keys(j["lqr"], "lqr", {"Q_diag", "R_diag"});
        if (j["lqr"].contains("Q_diag")) c.Q_lqr_diag = vector_from(j["lqr"]["Q_diag"], "lqr.Q_diag");
        if (j["lqr"].contains("R_diag")) c.R_lqr_diag = vector_from(j["lqr"]["R_diag"], "lqr.R_diag");
    }
    if (j.contains("lyapunov")) {
        check_keys(j["lyapunov"], "lyapunov", {"Q_diag"});
        if (j["lyapunov"].contains("Q_diag"))
            c.Q_lyap_diag = vector_from(j["lyapunov"]["Q_diag"], "lyapunov.Q_diag");
    }
    if (j.contains("ann")) {
        const Json& a = j["ann"];
        check_keys(a, "ann", {"hidden", "F", "G", "kappa", "activation", "W_M", "V_M", "eps_N"});
        get_if(a, "hidden", c.ann_hidden, "ann");
        get_if(a, "F", c.ann_F, "ann");
        get_if(a, "G", c.ann_G, "ann");
        get_if(a, "kappa", c.kappa, "ann");
        std::string act = activation_name(c.activation);
        get_if(a, "activation", act, "ann");
        c.activation = activation_from(act);
        get_if(a, "W_M", c.W_M, "ann");
        get_if(a, "V_M", c.V_M, "ann");
        get_if(a, "eps_N", c.eps_N, "ann");
    }
    if (j.contains("robust")) {
        check_keys(j["robust"], "robust", {"k_z"});
        get_if(j["robust"], "k_z", c.k_z, "robust");
    }
    if (j.contains("command")) {
        const Json& r = j["command"];
        check_keys(r, "command", {"kind", "amplitude", "period", "phase"});
        std::string kind = "doublet";
        get_if(r, "kind", kind, "command");
        require(kind == "doublet" || kind == "constant", ErrorKind::InvalidArgument,
                "unknown command kind '" + kind + "'");
        c.command.kind = kind == "doublet" ? CommandSpec::Kind::doublet : CommandSpec::Kind::constant;
        get_if(r, "amplitude", c.command.amplitude, "command");
        get_if(r, "period", c.command.period, "command");
        get_if(r, "phase", c.command.phase, "command");
    }
    if (j.contains("train")) {
        const Json& t = j["train"];
        check_keys(t, "train", {"episodes", "ramp_episodes", "episode_duration", "dt", "norm_runs", "scale_values",
                                "rate_informed", "saturation_in_training", "seed", "lstm_stride", "lstm_hidden",
                                "reset_ann_each_episode", "optimizer"});
        TrainConfig& tc = c.train;
        get_if(t, "episodes", tc.episodes, "train");
        get_if(t, "ramp_episodes", tc.ramp_episodes, "train");
        get_if(t, "episode_duration", tc.episode_duration, "train");
        get_if(t, "dt", tc.dt, "train");
        get_if(t, "norm_runs", tc.norm_runs, "train");
        get_if(t, "scale_values", tc.scale_values, "train");
        get_if(t, "rate_informed", tc.rate_informed, "train");
        get_if(t, "saturation_in_training", tc.saturation_in_training, "train");
        get_if(t, "seed", tc.seed, "train");
        get_if(t, "lstm_stride", tc.lstm_stride, "train");
        get_if(t, "lstm_hidden", tc.lstm_hidden, "train");
        get_if(t, "reset_ann_each_episode", tc.reset_ann_each_episode, "train");
        if (t.contains("optimizer")) {
            const Json& o = t["optimizer"];
            check_keys(o, "train.optimizer", {"lr", "beta1", "beta2", "epsilon", "l2", "clip_threshold"});
            get_if(o, "lr", tc.optimizer.lr, "train.optimizer");
            get_if(o, "beta1", tc.optimizer.beta1, "train.optimizer");
            get_if(o, "beta2", tc.optimizer.beta2, "train.optimizer");
            get_if(o, "epsilon", tc.optimizer.epsilon, "train.optimizer");
            get_if(o, "l2", tc.optimizer.l2, "train.optimizer");
            get_if(o, "clip_threshold", tc.optimizer.clip_threshold, "train.optimizer");
        }
    }
    if (j.contains("eval")) {
        const Json& e = j["eval"];
        check_keys(e, "eval", {"duration", "saturation", "small_scale", "large_scale"});
        get_if(e, "duration", c.eval.duration, "eval");
        get_if(e, "saturation", c.eval.saturation, "eval");
        get_if(e, "small_scale", c.eval.small_scale, "eval");
        get_if(e, "large_scale", c.eval.large_scale, "eval");
    }
    c.validate();
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(detail::parse_json(detail::read_text(path), path.string()));
}

inline Json run_config_json(const RunConfig& c) {
    using detail::to_json;
    Json j;
    j["plant"] = {{"model", "b747"},
                  {"A_p", to_json(c.plant.A_p)},
                  {"B_p", to_json(c.plant.B_p)},
                  {"C_p", to_json(c.plant.C_p)},
                  {"sat_mag_hi_deg", c.plant.sat_mag_hi * 180.0 / std::numbers::pi},
                  {"sat_mag_lo_deg", c.plant.sat_mag_lo * 180.0 / std::numbers::pi},
                  {"sat_rate_deg_s", c.plant.sat_rate * 180.0 / std::numbers::pi},
                  {"b_x", c.plant.b_x}};
    j["lqr"] = {{"Q_diag", to_json(c.Q_lqr_diag)}, {"R_diag", to_json(c.R_lqr_diag)}};
    j["lyapunov"] = {{"Q_diag", to_json(c.Q_lyap_diag)}};
    j["ann"] = {{"hidden", c.ann_hidden},  {"F", c.ann_F},   {"G", c.ann_G},   {"kappa", c.kappa},
                {"activation", detail::activation_name(c.activation)},
                {"W_M", c.W_M},            {"V_M", c.V_M},   {"eps_N", c.eps_N}};
    j["robust"] = {{"k_z", c.k_z}};
    j["command"] = {{"kind", c.command.kind == CommandSpec::Kind::doublet ? "doublet" : "constant"},
                    {"amplitude", c.command.amplitude},
                    {"period", c.command.period},
                    {"phase", c.command.phase}};
    const TrainConfig& t = c.train;
    j["train"] = {{"episodes", t.episodes},
                  {"ramp_episodes", t.ramp_episodes},
                  {"episode_duration", t.episode_duration},
                  {"dt", t.dt},
                  {"norm_runs", t.norm_runs},
                  {"scale_values", t.scale_values},
                  {"rate_informed", t.rate_informed},
                  {"saturation_in_training", t.saturation_in_training},
                  {"seed", t.seed},
                  {"lstm_stride", t.lstm_stride},
                  {"lstm_hidden", t.lstm_hidden},
                  {"reset_ann_each_episode", t.reset_ann_each_episode},
                  {"optimizer",
                   {{"lr", t.optimizer.lr},
                    {"beta1", t.optimizer.beta1},
                    {"beta2", t.optimizer.beta2},
                    {"epsilon", t.optimizer.epsilon},
                    {"l2", t.optimizer.l2},
                    {"clip_threshold", t.optimizer.clip_threshold}}}};
    j["eval"] = {{"duration", c.eval.duration},
                 {"saturation", c.eval.saturation},
                 {"small_scale", c.eval.small_scale},
                 {"large_scale", c.eval.large_scale}};
    return j;
}

// ---- normalization -------------------------------------------------------

inline Json norm_json(const NormParams& np) {
    return {{"e_min", detail::to_json(np.e_min)}, {"e_max", detail::to_json(np.e_max)}};
}

inline NormParams norm_from_json(const Json& j) {
    detail::check_keys(j, "normalization", {"e_min", "e_max"});
    detail::require(j.contains("e_min") && j.contains("e_max"), ErrorKind::InvalidArgument,
                    "normalization needs e_min and e_max");
    NormParams np{detail::vector_from(j["e_min"], "e_min"), detail::vector_from(j["e_max"], "e_max")};
    np.validate();
    return np;
}

inline void save_norm(const std::filesystem::path& path, const NormParams& np) {
    detail::write_text(path, norm_json(np).dump(2) + "\n");
}

inline NormParams load_norm(const std::filesystem::path& path) {
    return norm_from_json(detail::parse_json(detail::read_text(path), path.string()));
}

// ---- checkpoint ----------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    std::uint64_t seed = 0;
    bool rate_informed = false;
    TrainState state;
    NormParams norm;
};

namespace detail {

inline constexpr std::array<std::pair<Gate, const char*>, 4> kGateNames{
    {{Gate::forget, "f"}, {Gate::candidate, "g"}, {Gate::input, "i"}, {Gate::output, "o"}}};

inline Json tensors_json(const LstmParams& p) {
    Json j;
    for (auto [g, name] : kGateNames) j[std::string("W_") + name] = to_json(Matrix(p.W_gate(g)));
    for (auto [g, name] : kGateNames) j[std::string("R_") + name] = to_json(Matrix(p.R_gate(g)));
    for (auto [g, name] : kGateNames) j[std::string("b_") + name] = to_json(Vector(p.b_gate(g)));
    j["W_fc"] = to_json(Matrix(p.W_fc()));
    j["b_fc"] = to_json(Vector(p.b_fc()));
    return j;
}

inline void tensors_from(const Json& j, LstmParams& p, const std::string& where) {
    require(j.is_object(), ErrorKind::InvalidArgument, where + " must be an object");
    auto mat = [&](const std::string& key, Eigen::Index rows, Eigen::Index cols) {
        require(j.contains(key), ErrorKind::InvalidArgument, where + " lacks " + key);
        Matrix m = matrix_from(j[key], where + "." + key);
        require(m.rows() == rows && m.cols() == cols, ErrorKind::DimensionMismatch,
                where + "." + key + " has shape " + shape(m));
        return m;
    };
    auto vec = [&](const std::string& key, Eigen::Index size) {
        require(j.contains(key), ErrorKind::InvalidArgument, where + " lacks " + key);
        Vector v = vector_from(j[key], where + "." + key);
        require(v.size() == size, ErrorKind::DimensionMismatch, where + "." + key + " has wrong length");
        return v;
    };
    for (auto [g, name] : kGateNames) p.W_gate(g) = mat(std::string("W_") + name, p.n_h, p.n_in);
    for (auto [g, name] : kGateNames) p.R_gate(g) = mat(std::string("R_") + name, p.n_h, p.n_h);
    for (auto [g, name] : kGateNames) p.b_gate(g) = vec(std::string("b_") + name, p.n_h);
    p.W_fc() = mat("W_fc", p.m, p.n_h);
    p.b_fc() = vec("b_fc", p.m);
}

inline LstmParams shaped(const LstmParams& like, const Vector& flat) {
    LstmParams p = like.zeros_like();
    p.theta = flat;
    return p;
}

}  // namespace detail

inline Json checkpoint_json(const Checkpoint& ck) {
    using detail::to_json;
    const TrainState& st = ck.state;
    Json j;
    j["format_version"] = kCheckpointVersion;
    j["seed"] = ck.seed;
    j["dims"] = {{"n_in", st.params.n_in}, {"n_h", st.params.n_h}, {"m", st.params.m}};
    j["rate_informed"] = ck.rate_informed;
    j["episodes_done"] = st.episodes_done;
    j["params"] = detail::tensors_json(st.params);
    j["adam"] = {{"step_count", st.adam.step_count},
                 {"lr", st.adam.lr},
                 {"beta1", st.adam.beta1},
                 {"beta2", st.adam.beta2},
                 {"epsilon", st.adam.epsilon},
                 {"l2", st.adam.l2},
                 {"clip_threshold", st.adam.clip_threshold},
                 {"first_moment", detail::tensors_json(detail::shaped(st.params, st.adam.first_moment))},
                 {"second_moment", detail::tensors_json(detail::shaped(st.params, st.adam.second_moment))}};
    j["normalization"] = norm_json(ck.norm);
    Json hist = Json::array();
    for (const auto& r : st.history)
        hist.push_back({{"episode", r.episode}, {"k_lstm", r.k_lstm}, {"scale", r.scale}, {"mse", r.mse}});
    j["loss_history"] = std::move(hist);
    if (st.carried_ann)
        j["carried_ann"] = {{"W_hat", to_json(st.carried_ann->W_hat)}, {"V_hat", to_json(st.carried_ann->V_hat)}};
    else
        j["carried_ann"] = nullptr;
    return j;
}

inline Checkpoint checkpoint_from_json(const Json& j) {
    using namespace detail;
    check_keys(j, "checkpoint", {"format_version", "seed", "dims", "rate_informed", "episodes_done", "params",
                                 "adam", "normalization", "loss_history", "carried_ann"});
    for (const char* key : {"format_version", "seed", "dims", "rate_informed", "episodes_done", "params", "adam",
                            "normalization", "loss_history"})
        require(j.contains(key), ErrorKind::InvalidArgument, std::string("checkpoint lacks ") + key);
    require(j["format_version"] == kCheckpointVersion, ErrorKind::InvalidArgument,
            "unsupported checkpoint format_version " + j["format_version"].dump());
    Checkpoint ck;
    try {
        ck.seed = j["seed"].get<std::uint64_t>();
        ck.rate_informed = j["rate_informed"].get<bool>();
        const Json& d = j["dims"];
        check_keys(d, "dims", {"n_in", "n_h", "m"});
        TrainState& st = ck.state;
        st.params = LstmParams::zeros(d.at("n_in").get<Eigen::Index>(), d.at("n_h").get<Eigen::Index>(),
                                      d.at("m").get<Eigen::Index>());
        tensors_from(j["params"], st.params, "params");
        st.episodes_done = j["episodes_done"].get<int>();
        const Json& a = j["adam"];
        check_keys(a, "adam", {"step_count", "lr", "beta1", "beta2", "epsilon", "l2", "clip_threshold",
                               "first_moment", "second_moment"});
        st.adam.step_count = a.at("step_count").get<std::int64_t>();
        st.adam.lr = a.at("lr").get<double>();
        st.adam.beta1 = a.at("beta1").get<double>();
        st.adam.beta2 = a.at("beta2").get<double>();
        st.adam.epsilon = a.at("epsilon").get<double>();
        st.adam.l2 = a.at("l2").get<double>();
        st.adam.clip_threshold = a.at("clip_threshold").get<double>();
        LstmParams mom = st.params.zeros_like();
        tensors_from(a.at("first_moment"), mom, "adam.first_moment");
        st.adam.first_moment = mom.theta;
        tensors_from(a.at("second_moment"), mom, "adam.second_moment");
        st.adam.second_moment = mom.theta;
        for (const Json& r : j["loss_history"]) {
            check_keys(r, "loss_history[]", {"episode", "k_lstm", "scale", "mse"});
            st.history.push_back(LossRecord{r.at("episode").get<int>(), r.at("k_lstm").get<double>(),
                                            r.at("scale").get<double>(), r.at("mse").get<double>()});
        }
        if (j.contains("carried_ann") && !j["carried_ann"].is_null()) {
            const Json& w = j["carried_ann"];
            check_keys(w, "carried_ann", {"W_hat", "V_hat"});
            st.carried_ann = AnnWeights{matrix_from(w.at("W_hat"), "carried_ann.W_hat"),
                                        matrix_from(w.at("V_hat"), "carried_ann.V_hat")};
        }
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorKind::InvalidArgument, std::string("checkpoint: ") + ex.what());
    }
    require(ck.state.history.size() == std::size_t(ck.state.episodes_done), ErrorKind::InvalidArgument,
            "checkpoint loss_history length differs from episodes_done");
    ck.norm = norm_from_json(j["normalization"]);
    return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    detail::write_text(path, checkpoint_json(ck).dump(1) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return checkpoint_from_json(detail::parse_json(detail::read_text(path), path.string()));
}

// ---- loss history --------------------------------------------------------

inline void save_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& hist) {
    std::string out = "episode,k_lstm,scale,mse\n";
    char buf[128];
    for (const auto& r : hist) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.episode, r.k_lstm, r.scale, r.mse);
        out += buf;
    }
    detail::write_text(path, out);
}

// ---- trace CSV -----------------------------------------------------------

inline std::vector<std::string> trace_csv_header(Eigen::Index n, Eigen::Index m) {
    std::vector<std::string> h{"t"};
    auto series = [&](const std::string& base, Eigen::Index count) {
        for (Eigen::Index i = 1; i <= count; ++i) h.push_back(base + std::to_string(i));
    };
    // single-channel columns keep the bare name
    auto channel = [&](const std::string& base) {
        if (m == 1)
            h.push_back(base);
        else
            series(base + "_", m);
    };
    series("x", n);
    series("xm", n);
    series("e", n);
    h.push_back("r");
    for (const char* c : {"u_bl", "u_ad", "u_lstm", "v", "u_cmd", "u_applied", "f_true", "f_hat", "u_r"}) channel(c);
    return h;
}

inline std::string trace_csv(const EpisodeTrace& tr) {
    const Eigen::Index n = tr.x.rows(), m = tr.u_cmd.rows();
    detail::require(tr.r.rows() == 1, ErrorKind::DimensionMismatch, "trace CSV supports one reference channel");
    std::string out;
    const auto header = trace_csv_header(n, m);
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += '\n';
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        out += buf;
    };
    for (Eigen::Index k = 0; k < tr.rows(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", tr.t(k));
        out += buf;
        for (const Matrix* mat : {&tr.x, &tr.x_m, &tr.e, &tr.r, &tr.u_bl, &tr.u_ad, &tr.u_lstm, &tr.v, &tr.u_cmd,
                                  &tr.u_applied, &tr.f_true, &tr.f_hat, &tr.u_r})
            for (Eigen::Index i = 0; i < mat->rows(); ++i) put((*mat)(i, k));
        out += '\n';
    }
    return out;
}

inline void save_trace_csv(const std::filesystem::path& path, const EpisodeTrace& tr) {
    detail::write_text(path, trace_csv(tr));
}

/// Rebuilds the CSV-visible part of a trace; dt is taken from the first two time stamps.
inline EpisodeTrace parse_trace_csv(const std::string& text, Eigen::Index n, Eigen::Index m) {
    std::istringstream in(text);
    std::string line;
    detail::require(static_cast<bool>(std::getline(in, line)), ErrorKind::EmptyTrace, "trace CSV is empty");
    const auto header = trace_csv_header(n, m);
    std::string expected;
    for (std::size_t i = 0; i < header.size(); ++i) expected += (i ? "," : "") + header[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    detail::require(line == expected, ErrorKind::InvalidArgument, "unexpected trace CSV header: " + line);

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::vector<double> vals;
        vals.reserve(header.size());
        const char* p = line.c_str();
        while (*p) {
            char* end = nullptr;
            vals.push_back(std::strtod(p, &end));
            detail::require(end != p, ErrorKind::InvalidArgument,
                            "bad number in trace CSV row " + std::to_string(rows.size() + 1));
            p = end;
            if (*p == ',') ++p;
            else if (*p == '\r') break;
        }
        detail::require(vals.size() == header.size(), ErrorKind::InvalidArgument,
                        "trace CSV row " + std::to_string(rows.size() + 1) + " has " + std::to_string(vals.size()) +
                            " fields, expected " + std::to_string(header.size()));
        rows.push_back(std::move(vals));
    }
    detail::require(!rows.empty(), ErrorKind::EmptyTrace, "trace CSV has no data rows");
    const auto N = Eigen::Index(rows.size());
    EpisodeTrace tr;
    tr.t.resize(N);
    for (auto* mat : {&tr.x, &tr.x_m, &tr.e}) mat->resize(n, N);
    tr.r.resize(1, N);
    for (auto* mat : {&tr.u_bl, &tr.u_ad, &tr.u_lstm, &tr.v, &tr.u_cmd, &tr.u_applied, &tr.f_true, &tr.f_hat, &tr.u_r})
        mat->resize(m, N);
    for (Eigen::Index k = 0; k < N; ++k) {
        const auto& v = rows[std::size_t(k)];
        std::size_t c = 0;
        tr.t(k) = v[c++];
        for (Matrix* mat : {&tr.x, &tr.x_m, &tr.e, &tr.r, &tr.u_bl, &tr.u_ad, &tr.u_lstm, &tr.v, &tr.u_cmd,
                            &tr.u_applied, &tr.f_true, &tr.f_hat, &tr.u_r})
            for (Eigen::Index i = 0; i < mat->rows(); ++i) (*mat)(i, k) = v[c++];
    }
    tr.y = tr.f_hat - tr.f_true;
    tr.u_lstm_raw = Matrix::Zero(m, N);
    tr.e_norm = Matrix::Zero(n, N);
    tr.dt = N > 1 ? tr.t(1) - tr.t(0) : 0.0;
    return tr;
}

inline EpisodeTrace load_trace_csv(const std::filesystem::path& path, Eigen::Index n, Eigen::Index m) {
    return parse_trace_csv(detail::read_text(path), n, m);
}

/// Dimensions (n, m) inferred from a trace CSV header.
inline std::pair<Eigen::Index, Eigen::Index> trace_csv_dims(const std::string& text) {
    const std::string header = text.substr(0, text.find('\n'));
    Eigen::Index n = 0;
    while (header.find(",x" + std::to_string(n + 1) + ",") != std::string::npos) ++n;
    const Eigen::Index m = header.find(",u_bl,") != std::string::npos ? 1 : [&] {
        Eigen::Index c = 0;
        while (header.find(",u_bl_" + std::to_string(c + 1) + ",") != std::string::npos) ++c;
        return c;
    }();
    detail::require(n > 0 && m > 0, ErrorKind::InvalidArgument, "cannot read dimensions from trace header");
    return {n, m};
}

// ---- metrics -------------------------------------------------------------

inline Json metrics_json(const TraceMetrics& mt) {
    using detail::to_json;
    return {{"steps", mt.steps},
            {"e_rms", to_json(mt.e_rms)},
            {"e_max", to_json(mt.e_max)},
            {"pitch_rate_rms", mt.pitch_rate_rms},
            {"pitch_rate_max", mt.pitch_rate_max},
            {"effort_u_bl", to_json(mt.effort_u_bl)},
            {"effort_u_ad", to_json(mt.effort_u_ad)},
            {"effort_u_lstm", to_json(mt.effort_u_lstm)},
            {"effort_v", to_json(mt.effort_v)},
            {"saturation_steps", mt.saturation_steps},
            {"rate_saturation_steps", mt.rate_saturation_steps},
            {"hf_ratio_u_cmd", to_json(mt.hf_u_cmd)},
            {"hf_ratio_u_ad", to_json(mt.hf_u_ad)},
            {"hf_ratio_u_lstm", to_json(mt.hf_u_lstm)}};
}

inline Json comparison_json(const Comparison& c) {
    using detail::to_json;
    return {{"e_rms_ratio", to_json(c.e_rms_ratio)},
            {"pitch_rate_rms_ratio", c.pitch_rate_rms_ratio},
            {"pitch_rate_max_ratio", c.pitch_rate_max_ratio},
            {"effort_u_bl_ratio", to_json(c.effort_u_bl_ratio)},
            {"effort_u_ad_ratio", to_json(c.effort_u_ad_ratio)},
            {"effort_u_lstm_ratio", to_json(c.effort_u_lstm_ratio)},
            {"effort_v_ratio", to_json(c.effort_v_ratio)},
            {"saturation_ratio", c.saturation_ratio},
            {"rate_saturation_ratio", c.rate_saturation_ratio},
            {"improved", c.improved()}};
}

}  // namespace lstm_mrac
