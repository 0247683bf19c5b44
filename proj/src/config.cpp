#include "nsv/config.hpp"

#include <fstream>
#include <sstream>

#include "nsv/rng.hpp"

namespace nsv::config {

namespace {

template <typename T>
void get_if_present(const json& doc, const char* key, T& target) {
    if (doc.contains(key)) target = doc.at(key).get<T>();
}

}  // namespace

json system_params_to_json(const systems::SystemParams& params) {
    json doc{{"name", systems::system_name(params)}};
    if (const auto* p = std::get_if<systems::SpringMassParams>(&params)) {
        doc["mass"] = p->mass;
        doc["spring"] = p->spring;
    } else if (const auto* p = std::get_if<systems::PendulumParams>(&params)) {
        doc["mass"] = p->mass;
        doc["length"] = p->length;
        doc["gravity"] = p->gravity;
    } else if (const auto* p = std::get_if<systems::DoublePendulumParams>(&params)) {
        doc["m1"] = p->m1;
        doc["m2"] = p->m2;
        doc["L1"] = p->L1;
        doc["L2"] = p->L2;
        doc["W1"] = p->W1;
        doc["W2"] = p->W2;
        doc["gravity"] = p->gravity;
    } else if (const auto* p = std::get_if<systems::HopfParams>(&params)) {
        doc["mu"] = p->mu;
        doc["omega"] = p->omega;
        doc["radial"] = p->radial;
    }
    return doc;
}

systems::SystemParams system_params_from_json(const json& doc) {
    systems::SystemParams params = systems::params_from_name(doc.at("name").get<std::string>());
    if (auto* p = std::get_if<systems::SpringMassParams>(&params)) {
        get_if_present(doc, "mass", p->mass);
        get_if_present(doc, "spring", p->spring);
    } else if (auto* p = std::get_if<systems::PendulumParams>(&params)) {
        get_if_present(doc, "mass", p->mass);
        get_if_present(doc, "length", p->length);
        get_if_present(doc, "gravity", p->gravity);
    } else if (auto* p = std::get_if<systems::DoublePendulumParams>(&params)) {
        get_if_present(doc, "m1", p->m1);
        get_if_present(doc, "m2", p->m2);
        get_if_present(doc, "L1", p->L1);
        get_if_present(doc, "L2", p->L2);
        get_if_present(doc, "W1", p->W1);
        get_if_present(doc, "W2", p->W2);
        get_if_present(doc, "gravity", p->gravity);
    } else if (auto* p = std::get_if<systems::HopfParams>(&params)) {
        get_if_present(doc, "mu", p->mu);
        get_if_present(doc, "omega", p->omega);
        get_if_present(doc, "radial", p->radial);
    }
    return params;
}

namespace {

json range_to_json(const systems::AmplitudeRange& range) {
    return json{{"lo", range.lo}, {"hi", range.hi}};
}

systems::AmplitudeRange range_from_json(const json& doc) {
    return {doc.at("lo").get<Vec>(), doc.at("hi").get<Vec>()};
}

}  // namespace

json dataset_config_to_json(const lift::DatasetConfig& cfg) {
    return json{{"system", system_params_to_json(cfg.params)},
                {"range", range_to_json(cfg.range)},
                {"observation_dim", cfg.observation_dim},
                {"angle_wrap", cfg.angle_wrap},
                {"input_scale", cfg.input_scale},
                {"dt", cfg.dt},
                {"seq_len", cfg.seq_len},
                {"substeps", cfg.substeps},
                {"n_train", cfg.n_train},
                {"n_val", cfg.n_val},
                {"n_test", cfg.n_test},
                {"seed", cfg.seed}};
}

lift::DatasetConfig dataset_config_from_json(const json& doc) {
    lift::DatasetConfig cfg;
    cfg.params = system_params_from_json(doc.at("system"));
    cfg.range = range_from_json(doc.at("range"));
    get_if_present(doc, "observation_dim", cfg.observation_dim);
    get_if_present(doc, "angle_wrap", cfg.angle_wrap);
    get_if_present(doc, "input_scale", cfg.input_scale);
    get_if_present(doc, "dt", cfg.dt);
    get_if_present(doc, "seq_len", cfg.seq_len);
    get_if_present(doc, "substeps", cfg.substeps);
    get_if_present(doc, "n_train", cfg.n_train);
    get_if_present(doc, "n_val", cfg.n_val);
    get_if_present(doc, "n_test", cfg.n_test);
    get_if_present(doc, "seed", cfg.seed);
    return cfg;
}

namespace {

json sinkhorn_to_json(const transport::SinkhornConfig& cfg) {
    return json{{"blur", cfg.blur},
                {"max_iters", cfg.max_iters},
                {"tol", cfg.tol},
                {"debiased", cfg.debiased}};
}

transport::SinkhornConfig sinkhorn_from_json(const json& doc) {
    transport::SinkhornConfig cfg;
    get_if_present(doc, "blur", cfg.blur);
    get_if_present(doc, "max_iters", cfg.max_iters);
    get_if_present(doc, "tol", cfg.tol);
    get_if_present(doc, "debiased", cfg.debiased);
    return cfg;
}

json embed_to_json(const embed::EmbedConfig& cfg) {
    return json{{"d", cfg.d},
                {"w_reconstruct", cfg.w_reconstruct},
                {"w_smooth", cfg.w_smooth},
                {"w_space", cfg.w_space},
                {"L0", cfg.L0},
                {"eta", cfg.eta},
                {"distance_mode", embed::distance_mode_name(cfg.mode)},
                {"beta",
                 {{"cycle", cfg.beta.cycle},
                  {"zero_frac", cfg.beta.zero_frac},
                  {"ramp_frac", cfg.beta.ramp_frac},
                  {"hold_frac", cfg.beta.hold_frac}}},
                {"sinkhorn", sinkhorn_to_json(cfg.sinkhorn)},
                {"space_points", cfg.space_points},
                {"batch", cfg.batch},
                {"steps", cfg.steps},
                {"val_interval", cfg.val_interval},
                {"lr", cfg.adam.lr},
                {"omega0", cfg.omega0},
                {"sine_scale", cfg.sine_scale}};
}

embed::EmbedConfig embed_from_json(const json& doc) {
    embed::EmbedConfig cfg;
    get_if_present(doc, "d", cfg.d);
    get_if_present(doc, "w_reconstruct", cfg.w_reconstruct);
    get_if_present(doc, "w_smooth", cfg.w_smooth);
    get_if_present(doc, "w_space", cfg.w_space);
    get_if_present(doc, "L0", cfg.L0);
    get_if_present(doc, "eta", cfg.eta);
    if (doc.contains("distance_mode"))
        cfg.mode = embed::distance_mode_from_name(doc.at("distance_mode").get<std::string>());
    if (doc.contains("beta")) {
        const json& b = doc.at("beta");
        get_if_present(b, "cycle", cfg.beta.cycle);
        get_if_present(b, "zero_frac", cfg.beta.zero_frac);
        get_if_present(b, "ramp_frac", cfg.beta.ramp_frac);
        get_if_present(b, "hold_frac", cfg.beta.hold_frac);
    }
    if (doc.contains("sinkhorn")) cfg.sinkhorn = sinkhorn_from_json(doc.at("sinkhorn"));
    get_if_present(doc, "space_points", cfg.space_points);
    get_if_present(doc, "batch", cfg.batch);
    get_if_present(doc, "steps", cfg.steps);
    get_if_present(doc, "val_interval", cfg.val_interval);
    get_if_present(doc, "lr", cfg.adam.lr);
    get_if_present(doc, "omega0", cfg.omega0);
    get_if_present(doc, "sine_scale", cfg.sine_scale);
    return cfg;
}

json field_to_json(const field::FieldTrainConfig& cfg) {
    return json{{"rho", {{"cycle", cfg.rho.cycle}, {"lo", cfg.rho.lo}, {"hi", cfg.rho.hi}}},
                {"substeps", cfg.substeps},
                {"percentile", cfg.percentile},
                {"batch", cfg.batch},
                {"steps", cfg.steps},
                {"max_horizon", cfg.max_horizon},
                {"val_interval", cfg.val_interval},
                {"val_horizon", cfg.val_horizon},
                {"lr", cfg.adam.lr},
                {"mode", field::train_mode_name(cfg.mode)}};
}

field::FieldTrainConfig field_from_json(const json& doc) {
    field::FieldTrainConfig cfg;
    if (doc.contains("rho")) {
        const json& r = doc.at("rho");
        get_if_present(r, "cycle", cfg.rho.cycle);
        get_if_present(r, "lo", cfg.rho.lo);
        get_if_present(r, "hi", cfg.rho.hi);
    }
    get_if_present(doc, "substeps", cfg.substeps);
    get_if_present(doc, "percentile", cfg.percentile);
    get_if_present(doc, "batch", cfg.batch);
    get_if_present(doc, "steps", cfg.steps);
    get_if_present(doc, "max_horizon", cfg.max_horizon);
    get_if_present(doc, "val_interval", cfg.val_interval);
    get_if_present(doc, "val_horizon", cfg.val_horizon);
    get_if_present(doc, "lr", cfg.adam.lr);
    if (doc.contains("mode"))
        cfg.mode = field::train_mode_from_name(doc.at("mode").get<std::string>());
    return cfg;
}

json analysis_to_json(const AnalysisConfig& cfg) {
    const auto& eq = cfg.equilibria;
    const auto& st = eq.stability;
    return json{
        {"equilibria",
         {{"n_candidates", eq.n_candidates},
          {"grid_per_dim", eq.grid_per_dim},
          {"grid_budget", eq.grid_budget},
          {"newton_tol", eq.newton_tol},
          {"newton_max_iters", eq.newton_max_iters},
          {"residual_accept", eq.residual_accept},
          {"merge_radius", eq.merge_radius},
          {"stability",
           {{"n_directions", st.n_directions},
            {"n_radii", st.n_radii},
            {"horizon", st.horizon},
            {"epsilons", st.epsilons},
            {"dt", st.dt},
            {"substeps", st.substeps},
            {"strict_radius", st.strict_radius}}}}},
        {"chaos",
         {{"n_sequences", cfg.chaos.n_sequences},
          {"seq_len", cfg.chaos.seq_len},
          {"low_range", range_to_json(cfg.chaos.low_range)},
          {"high_range", range_to_json(cfg.chaos.high_range)},
          {"pair_perturbation", cfg.chaos.pair_perturbation},
          {"n_bins", cfg.chaos.metrics.n_bins},
          {"near_pair_fraction", cfg.chaos.metrics.near_pair_fraction},
          {"histogram_bins", cfg.chaos.metrics.histogram_bins}}},
        {"cycles",
         {{"probe_time", cfg.cycles.probe_time},
          {"probes", cfg.cycles.probes},
          {"substeps", cfg.cycles.substeps},
          {"transient_fraction", cfg.cycles.detector.transient_fraction},
          {"annulus_ratio", cfg.cycles.detector.annulus_ratio},
          {"recurrence_fraction", cfg.cycles.detector.recurrence_fraction},
          {"recurrence_tol", cfg.cycles.detector.recurrence_tol},
          {"min_period_samples", cfg.cycles.detector.min_period_samples}}},
        {"synthesis",
         {{"gammas", cfg.synthesis.gammas},
          {"horizon_time", cfg.synthesis.horizon_time},
          {"substeps", cfg.synthesis.substeps},
          {"probes", cfg.synthesis.probes}}}};
}

AnalysisConfig analysis_from_json(const json& doc, AnalysisConfig cfg) {
    if (doc.contains("equilibria")) {
        const json& e = doc.at("equilibria");
        auto& eq = cfg.equilibria;
        get_if_present(e, "n_candidates", eq.n_candidates);
        get_if_present(e, "grid_per_dim", eq.grid_per_dim);
        get_if_present(e, "grid_budget", eq.grid_budget);
        get_if_present(e, "newton_tol", eq.newton_tol);
        get_if_present(e, "newton_max_iters", eq.newton_max_iters);
        get_if_present(e, "residual_accept", eq.residual_accept);
        get_if_present(e, "merge_radius", eq.merge_radius);
        if (e.contains("stability")) {
            const json& s = e.at("stability");
            auto& st = eq.stability;
            get_if_present(s, "n_directions", st.n_directions);
            get_if_present(s, "n_radii", st.n_radii);
            get_if_present(s, "horizon", st.horizon);
            get_if_present(s, "epsilons", st.epsilons);
            get_if_present(s, "dt", st.dt);
            get_if_present(s, "substeps", st.substeps);
            get_if_present(s, "strict_radius", st.strict_radius);
        }
    }
    if (doc.contains("chaos")) {
        const json& c = doc.at("chaos");
        get_if_present(c, "n_sequences", cfg.chaos.n_sequences);
        get_if_present(c, "seq_len", cfg.chaos.seq_len);
        if (c.contains("low_range")) cfg.chaos.low_range = range_from_json(c.at("low_range"));
        if (c.contains("high_range")) cfg.chaos.high_range = range_from_json(c.at("high_range"));
        get_if_present(c, "pair_perturbation", cfg.chaos.pair_perturbation);
        get_if_present(c, "n_bins", cfg.chaos.metrics.n_bins);
        get_if_present(c, "near_pair_fraction", cfg.chaos.metrics.near_pair_fraction);
        get_if_present(c, "histogram_bins", cfg.chaos.metrics.histogram_bins);
    }
    if (doc.contains("cycles")) {
        const json& c = doc.at("cycles");
        get_if_present(c, "probe_time", cfg.cycles.probe_time);
        get_if_present(c, "probes", cfg.cycles.probes);
        get_if_present(c, "substeps", cfg.cycles.substeps);
        get_if_present(c, "transient_fraction", cfg.cycles.detector.transient_fraction);
        get_if_present(c, "annulus_ratio", cfg.cycles.detector.annulus_ratio);
        get_if_present(c, "recurrence_fraction", cfg.cycles.detector.recurrence_fraction);
        get_if_present(c, "recurrence_tol", cfg.cycles.detector.recurrence_tol);
        get_if_present(c, "min_period_samples", cfg.cycles.detector.min_period_samples);
    }
    if (doc.contains("synthesis")) {
        const json& s = doc.at("synthesis");
        get_if_present(s, "gammas", cfg.synthesis.gammas);
        get_if_present(s, "horizon_time", cfg.synthesis.horizon_time);
        get_if_present(s, "substeps", cfg.synthesis.substeps);
        get_if_present(s, "probes", cfg.synthesis.probes);
    }
    return cfg;
}

}  // namespace

PipelineConfig default_config(const std::string& system_name) {
    PipelineConfig cfg;
    cfg.dataset.params = systems::params_from_name(system_name);
    cfg.dataset.dt = 1.0 / 60.0;
    cfg.dataset.seq_len = 60;
    cfg.dataset.n_train = 96;
    cfg.dataset.n_val = 12;
    cfg.dataset.n_test = 12;

    if (system_name == "spring_mass") {
        cfg.dataset.range = {{-0.3, -2.7}, {0.3, 2.7}};
        cfg.dataset.angle_wrap = false;
        cfg.dataset.input_scale = {0.45, 4.0};
        cfg.embed.d = 2;
        cfg.analysis.chaos.low_range = {{-0.05, -0.4}, {0.05, 0.4}};
        cfg.analysis.chaos.high_range = {{-0.3, -2.7}, {0.3, 2.7}};
    } else if (system_name == "single_pendulum") {
        cfg.dataset.range = {{-1.2, -3.0}, {1.2, 3.0}};
        cfg.dataset.angle_wrap = true;
        cfg.dataset.input_scale = {1.0, 1.0, 7.0};
        cfg.embed.d = 2;
        cfg.analysis.chaos.low_range = {{-0.2, -0.5}, {0.2, 0.5}};
        cfg.analysis.chaos.high_range = {{-1.2, -3.0}, {1.2, 3.0}};
    } else if (system_name == "double_pendulum") {
        cfg.dataset.range = {{-2.6, -2.6, -3.0, -3.0}, {2.6, 2.6, 3.0, 3.0}};
        cfg.dataset.angle_wrap = true;
        cfg.dataset.input_scale = {1.0, 1.0, 1.0, 1.0, 14.0, 20.0};
        cfg.embed.d = 4;
        cfg.field.steps = 3000;
        cfg.analysis.chaos.low_range = {{-0.35, -0.35, -0.3, -0.3}, {0.35, 0.35, 0.3, 0.3}};
        cfg.analysis.chaos.high_range = {{-2.9, -2.9, -3.0, -3.0}, {2.9, 2.9, 3.0, 3.0}};
    } else if (system_name == "hopf") {
        cfg.dataset.range = {{-0.8, -0.8, -0.8}, {0.8, 0.8, 0.8}};
        cfg.dataset.angle_wrap = false;
        cfg.dataset.input_scale = {1.0, 1.0, 1.0};
        cfg.embed.d = 3;
        cfg.analysis.chaos.low_range = cfg.dataset.range;
        cfg.analysis.chaos.high_range = cfg.dataset.range;
    } else {
        throw ValidationError("unknown system '" + system_name + "'");
    }
    resolve_seeds(cfg);
    return cfg;
}

void resolve_seeds(PipelineConfig& cfg) {
    cfg.dataset.seed = derive_seed(cfg.seed, "pipeline.dataset");
    cfg.embed.seed = derive_seed(cfg.seed, "pipeline.embed");
    cfg.field.seed = derive_seed(cfg.seed, "pipeline.field");
    cfg.analysis.equilibria.stability.seed = derive_seed(cfg.seed, "pipeline.stability");
    cfg.analysis.chaos.metrics.seed = derive_seed(cfg.seed, "pipeline.chaos");
}

void validate(const PipelineConfig& cfg) {
    if (cfg.format_version != 1)
        throw ValidationError("unsupported config format_version " +
                              std::to_string(cfg.format_version));
    if (cfg.out_dir.empty()) throw ValidationError("out_dir must not be empty");
    cfg.dataset.validate();
    if (cfg.dimension.k_min < 3) throw ValidationError("dimension k_min must be >= 3");
    if (cfg.dimension.k_max < cfg.dimension.k_min)
        throw ValidationError("dimension k_max must be >= k_min");
    cfg.embed.validate();
    cfg.field.validate();
    cfg.analysis.equilibria.validate();
    cfg.analysis.chaos.metrics.validate();
    cfg.analysis.cycles.detector.validate();
    cfg.analysis.chaos.low_range.validate(systems::state_dim(cfg.dataset.params));
    cfg.analysis.chaos.high_range.validate(systems::state_dim(cfg.dataset.params));
    for (double g : cfg.analysis.synthesis.gammas)
        if (g < 0.0) throw ValidationError("synthesis gammas must be nonnegative");
}

json to_json(const PipelineConfig& cfg) {
    return json{{"format_version", cfg.format_version},
                {"seed", cfg.seed},
                {"out_dir", cfg.out_dir},
                {"dataset", dataset_config_to_json(cfg.dataset)},
                {"dimension",
                 {{"k_min", cfg.dimension.k_min},
                  {"k_max", cfg.dimension.k_max},
                  {"subsample_cap", cfg.dimension.subsample_cap}}},
                {"embed", embed_to_json(cfg.embed)},
                {"embed_auto_dim", cfg.embed_auto_dim},
                {"field", field_to_json(cfg.field)},
                {"analysis", analysis_to_json(cfg.analysis)}};
}

PipelineConfig from_json(const json& doc) {
    std::string system = "spring_mass";
    if (doc.contains("dataset") && doc.at("dataset").contains("system"))
        system = doc.at("dataset").at("system").value("name", "spring_mass");
    PipelineConfig cfg = default_config(system);
    get_if_present(doc, "format_version", cfg.format_version);
    get_if_present(doc, "seed", cfg.seed);
    get_if_present(doc, "out_dir", cfg.out_dir);
    if (doc.contains("dataset")) cfg.dataset = dataset_config_from_json(doc.at("dataset"));
    if (doc.contains("dimension")) {
        const json& d = doc.at("dimension");
        get_if_present(d, "k_min", cfg.dimension.k_min);
        get_if_present(d, "k_max", cfg.dimension.k_max);
        get_if_present(d, "subsample_cap", cfg.dimension.subsample_cap);
    }
    if (doc.contains("embed")) cfg.embed = embed_from_json(doc.at("embed"));
    get_if_present(doc, "embed_auto_dim", cfg.embed_auto_dim);
    if (doc.contains("field")) cfg.field = field_from_json(doc.at("field"));
    if (doc.contains("analysis")) cfg.analysis = analysis_from_json(doc.at("analysis"), cfg.analysis);
    resolve_seeds(cfg);
    return cfg;
}

PipelineConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("malformed config " + path + ": " + e.what());
    }
    PipelineConfig cfg = from_json(doc);
    validate(cfg);
    return cfg;
}

void save(const PipelineConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ComputeError("cannot write config file " + path);
    out << to_json(cfg).dump(2) << "\n";
}

}  // namespace nsv::config
