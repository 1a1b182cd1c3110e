#include "cvs/run_config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cvs {

using nlohmann::json;

namespace {

json dist_to_json(const Distribution& d) {
    switch (d.kind) {
    case Distribution::Kind::normal: return {{"normal", {d.p1, d.p2}}};
    case Distribution::Kind::uniform: return {{"uniform", {d.p1, d.p2}}};
    case Distribution::Kind::beta: return {{"beta", {d.p1, d.p2}}};
    }
    return {};
}

Distribution dist_from_json(const json& j, const std::string& key) {
    if (!j.is_object() || j.size() != 1) throw std::invalid_argument(key + ": expected one of {normal|uniform|beta|beta_moments: [p1, p2]}");
    const auto& [kind, v] = *j.items().begin();
    if (!v.is_array() || v.size() != 2) throw std::invalid_argument(key + ": distribution needs two parameters");
    const double a = v[0].get<double>(), b = v[1].get<double>();
    Distribution d;
    if (kind == "normal") d = Distribution::normal(a, b);
    else if (kind == "uniform") d = Distribution::uniform(a, b);
    else if (kind == "beta") d = Distribution::beta(a, b);
    else if (kind == "beta_moments") d = Distribution::beta_from_moments(a, b);
    else throw std::invalid_argument(key + ": unknown distribution '" + std::string(kind) + "'");
    d.validate();
    return d;
}

json arch_to_json(const ArchitectureParams& a) {
    json conv = json::array();
    for (const ConvStage& s : a.conv) {
        conv.push_back({{"channels", s.channels},
                        {"kernel", {s.kernel_h, s.kernel_w}},
                        {"stride", {s.stride_h, s.stride_w}},
                        {"padding", {s.pad_h, s.pad_w}}});
    }
    return {{"name", a.name},         {"in_channels", a.in_channels}, {"rows", a.rows},
            {"cols", a.cols},         {"conv", conv},                 {"dense", a.dense},
            {"latent_dim", a.latent_dim}, {"condition_dim", a.condition_dim}, {"leaky_slope", a.leaky_slope}};
}

ArchitectureParams arch_from_json(const json& j) {
    ArchitectureParams a;
    if (j.contains("preset")) a = preset_architecture(j.at("preset").get<std::string>());
    a.name = j.value("name", a.name);
    a.in_channels = j.value("in_channels", a.in_channels);
    a.rows = j.value("rows", a.rows);
    a.cols = j.value("cols", a.cols);
    if (j.contains("conv")) {
        a.conv.clear();
        for (const json& s : j.at("conv")) {
            ConvStage c;
            c.channels = s.at("channels").get<std::size_t>();
            c.kernel_h = s.at("kernel").at(0).get<std::size_t>();
            c.kernel_w = s.at("kernel").at(1).get<std::size_t>();
            c.stride_h = s.at("stride").at(0).get<std::size_t>();
            c.stride_w = s.at("stride").at(1).get<std::size_t>();
            c.pad_h = s.at("padding").at(0).get<std::size_t>();
            c.pad_w = s.at("padding").at(1).get<std::size_t>();
            a.conv.push_back(c);
        }
    }
    if (j.contains("dense")) a.dense = j.at("dense").get<std::vector<std::size_t>>();
    a.latent_dim = j.value("latent_dim", a.latent_dim);
    a.condition_dim = j.value("condition_dim", a.condition_dim);
    a.leaky_slope = j.value("leaky_slope", a.leaky_slope);
    return a;
}

json to_json(const RunConfig& c) {
    const Experiment& e = c.model;
    json regions = json::array();
    for (const Region& r : e.plate.regions) {
        regions.push_back({{"x0_m", r.x0}, {"x1_m", r.x1}, {"y0_m", r.y0}, {"y1_m", r.y1}, {"base_thickness_mm", r.base_thickness_mm}});
    }
    json load;
    if (e.load.kind == LoadModel::Kind::gaussian) {
        load = {{"kind", "gaussian"}, {"q0_pa", dist_to_json(e.load.q0_pa)}, {"x0_m", dist_to_json(e.load.x0_m)},
                {"y0_m", dist_to_json(e.load.y0_m)}, {"s_m", e.load.s_m}};
    } else {
        load = {{"kind", "fill"}, {"p_nominal_pa", e.load.p_nominal_pa}, {"bays", e.load.bays}, {"fill_rate", dist_to_json(e.load.fill_rate)}};
    }
    json probes = json::array();
    for (const ProbeLocation& p : c.eval.probes) probes.push_back({p.x, p.y});
    return {
        {"experiment", c.experiment},
        {"seed", c.seed},
        {"output_root", c.output_root},
        {"plate",
         {{"length_x_m", e.plate.length_x},
          {"length_y_m", e.plate.length_y},
          {"grid_nx", e.plate.grid_nx},
          {"grid_ny", e.plate.grid_ny},
          {"youngs_modulus_pa", e.plate.material.youngs_modulus},
          {"poisson_ratio", e.plate.material.poisson_ratio},
          {"yield_stress_pa", e.plate.material.yield_stress},
          {"regions", regions}}},
        {"load", load},
        {"thickness",
         {{"mode", e.thickness.mode == ThicknessModel::Mode::absolute ? "absolute" : "loss"},
          {"distribution_mm", dist_to_json(e.thickness.distribution_mm)}}},
        {"generate", {{"realizations", c.realizations}}},
        {"split", {{"train_fraction", c.train_fraction}, {"seed", c.split_seed}}},
        {"architecture", arch_to_json(c.cvae.arch)},
        {"train",
         {{"epochs", c.train.epochs},
          {"batch_size", c.train.batch_size},
          {"learning_rate", c.train.learning_rate},
          {"kl_weight", c.cvae.kl_weight},
          {"seed", c.train.seed},
          {"checkpoint_every", c.train.checkpoint_every}}},
        {"evaluate", {{"n_mc", c.eval.n_mc}, {"probes_m", probes}, {"kde_bandwidth", c.eval.kde_bandwidth}}},
    };
}

RunConfig from_json(const json& j) {
    RunConfig c;
    c.experiment = j.at("experiment").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output_root = j.at("output_root").get<std::string>();

    const json& p = j.at("plate");
    PlateSpec& plate = c.model.plate;
    plate.length_x = p.at("length_x_m").get<double>();
    plate.length_y = p.at("length_y_m").get<double>();
    plate.grid_nx = p.at("grid_nx").get<int>();
    plate.grid_ny = p.at("grid_ny").get<int>();
    plate.material.youngs_modulus = p.at("youngs_modulus_pa").get<double>();
    plate.material.poisson_ratio = p.at("poisson_ratio").get<double>();
    plate.material.yield_stress = p.at("yield_stress_pa").get<double>();
    plate.regions.clear();
    for (const json& r : p.at("regions")) {
        plate.regions.push_back(Region{r.at("x0_m").get<double>(), r.at("x1_m").get<double>(), r.at("y0_m").get<double>(),
                                       r.at("y1_m").get<double>(), r.at("base_thickness_mm").get<double>()});
    }

    const json& l = j.at("load");
    const std::string kind = l.at("kind").get<std::string>();
    LoadModel& load = c.model.load;
    if (kind == "gaussian") {
        load.kind = LoadModel::Kind::gaussian;
        load.q0_pa = dist_from_json(l.at("q0_pa"), "load.q0_pa");
        load.x0_m = dist_from_json(l.at("x0_m"), "load.x0_m");
        load.y0_m = dist_from_json(l.at("y0_m"), "load.y0_m");
        load.s_m = l.at("s_m").get<double>();
    } else if (kind == "fill") {
        load.kind = LoadModel::Kind::fill;
        load.p_nominal_pa = l.at("p_nominal_pa").get<double>();
        load.bays = l.at("bays").get<std::size_t>();
        load.fill_rate = dist_from_json(l.at("fill_rate"), "load.fill_rate");
    } else {
        throw std::invalid_argument("load.kind must be 'gaussian' or 'fill'");
    }

    const json& t = j.at("thickness");
    const std::string mode = t.at("mode").get<std::string>();
    if (mode != "absolute" && mode != "loss") throw std::invalid_argument("thickness.mode must be 'absolute' or 'loss'");
    c.model.thickness.mode = mode == "absolute" ? ThicknessModel::Mode::absolute : ThicknessModel::Mode::loss;
    c.model.thickness.distribution_mm = dist_from_json(t.at("distribution_mm"), "thickness.distribution_mm");

    c.realizations = j.at("generate").at("realizations").get<std::size_t>();
    c.train_fraction = j.at("split").at("train_fraction").get<double>();
    c.split_seed = j.at("split").at("seed").get<std::uint64_t>();
    c.cvae.arch = arch_from_json(j.at("architecture"));

    const json& tr = j.at("train");
    c.train.epochs = tr.at("epochs").get<std::uint32_t>();
    c.train.batch_size = tr.at("batch_size").get<std::uint32_t>();
    c.train.learning_rate = tr.at("learning_rate").get<double>();
    c.cvae.kl_weight = tr.at("kl_weight").get<double>();
    c.train.seed = tr.at("seed").get<std::uint64_t>();
    c.train.checkpoint_every = tr.at("checkpoint_every").get<std::uint32_t>();

    const json& ev = j.at("evaluate");
    c.eval.n_mc = ev.at("n_mc").get<std::size_t>();
    c.eval.kde_bandwidth = ev.at("kde_bandwidth").get<double>();
    for (const json& q : ev.at("probes_m")) c.eval.probes.push_back({q.at(0).get<double>(), q.at(1).get<double>()});
    c.validate();
    return c;
}

RunConfig base_plate(int grid, double lo, double hi) {
    RunConfig c;
    c.experiment = "plate_A";
    c.model = plate_experiment(grid, lo, hi);
    c.cvae.arch = table1_params();
    c.eval.probes = {{0.0, 0.0}, {0.25, 0.0}, {0.25, 0.25}, {-0.4, 0.0}};
    return c;
}

RunConfig base_multi_region() {
    RunConfig c;
    c.experiment = "multi_region_B";
    c.model = multi_region_experiment();
    c.realizations = 1000;
    c.train_fraction = 0.70;
    c.cvae.arch = table2_params();
    c.train.epochs = 1000;
    c.train.learning_rate = 5e-4;
    c.eval.probes = {{0.0, 0.0}, {1.0, 0.25}, {-1.25, -0.375}};
    return c;
}

}  // namespace

void RunConfig::validate() const {
    if (experiment != "plate_A" && experiment != "multi_region_B" && experiment != "custom") {
        throw std::invalid_argument("experiment must be plate_A, multi_region_B or custom");
    }
    model.validate();
    if (realizations == 0) throw std::invalid_argument("generate.realizations must be positive");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("split.train_fraction must lie in (0, 1)");
    train.validate();
    if (cvae.arch.rows != static_cast<std::size_t>(model.plate.grid_ny) || cvae.arch.cols != static_cast<std::size_t>(model.plate.grid_nx)) {
        throw std::invalid_argument("architecture input does not match the plate grid");
    }
    if (cvae.arch.condition_dim != model.condition_dim()) throw std::invalid_argument("architecture condition_dim does not match the experiment");
    if (eval.n_mc == 0) throw std::invalid_argument("evaluate.n_mc must be positive");
    build_architecture(cvae.arch);
}

std::string RunConfig::root() const {
    if (const char* env = std::getenv("CVS_OUTPUT_ROOT"); env && *env) return env;
    return output_root;
}

std::string RunConfig::dataset_path() const { return (std::filesystem::path(root()) / "dataset.cvsd").string(); }
std::string RunConfig::checkpoint_path(StrainComponent c) const {
    return (std::filesystem::path(root()) / ("model_" + std::string(component_name(c)) + ".cvck")).string();
}
std::string RunConfig::loss_csv_path(StrainComponent c) const {
    return (std::filesystem::path(root()) / ("loss_" + std::string(component_name(c)) + ".csv")).string();
}
std::string RunConfig::eval_dir(StrainComponent c) const {
    return (std::filesystem::path(root()) / ("eval_" + std::string(component_name(c)))).string();
}
std::string RunConfig::samples_path() const { return (std::filesystem::path(root()) / "samples.cvsd").string(); }

std::vector<std::string> preset_names() { return {"plate_A", "plate_A_t8_10", "multi_region_B", "desk_A", "desk_B", "smoke"}; }

RunConfig preset_config(const std::string& name) {
    RunConfig c;
    if (name == "plate_A") {
        c = base_plate(50, 7.0, 10.0);
    } else if (name == "plate_A_t8_10") {
        c = base_plate(50, 8.0, 10.0);
    } else if (name == "multi_region_B") {
        c = base_multi_region();
    } else if (name == "desk_A") {
        c = base_plate(25, 7.0, 10.0);
        c.realizations = 600;
        c.cvae.arch = reduced_plate_params(25, 25, 8);
        c.cvae.kl_weight = 0.1;
        c.eval.n_mc = 200;
    } else if (name == "desk_B") {
        c = base_multi_region();
        c.realizations = 500;
        c.train.epochs = 500;
        c.cvae.kl_weight = 0.03;
        c.eval.n_mc = 200;
    } else if (name == "smoke") {
        c = base_plate(8, 7.0, 10.0);
        c.realizations = 40;
        c.cvae.arch = tiny_params();
        c.train.epochs = 3;
        c.eval.n_mc = 5;
    } else {
        throw std::invalid_argument("unknown preset '" + name + "'");
    }
    c.output_root = "runs/" + name;
    c.validate();
    return c;
}

namespace {

bool is_distribution(const json& j) {
    if (!j.is_object() || j.size() != 1) return false;
    const std::string k = j.begin().key();
    return k == "normal" || k == "uniform" || k == "beta" || k == "beta_moments";
}

void reject_unknown_keys(const json& user, const json& schema, const std::string& path) {
    for (const auto& [key, value] : user.items()) {
        if (!schema.contains(key)) throw std::invalid_argument("unknown config key '" + path + key + "'");
        const json& s = schema.at(key);
        if (value.is_object() && s.is_object() && !is_distribution(s)) reject_unknown_keys(value, s, path + key + ".");
    }
}

// A distribution in the patch replaces the preset's wholesale.
void clear_replaced_distributions(json& base, const json& user) {
    for (const auto& [key, value] : user.items()) {
        if (!base.contains(key) || !value.is_object()) continue;
        if (is_distribution(base[key])) base.erase(key);
        else if (base[key].is_object()) clear_replaced_distributions(base[key], value);
    }
}

// Every key a config file may carry, for both load kinds.
json config_schema() {
    json schema = to_json(base_plate(50, 7.0, 10.0));
    const json fill = to_json(base_multi_region()).at("load");
    for (const auto& [key, value] : fill.items()) schema["load"][key] = value;
    schema["architecture"]["preset"] = "";
    schema["preset"] = "";
    return schema;
}

}  // namespace

std::string dump_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

RunConfig parse_run_config(const std::string& text) {
    json user;
    try {
        user = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!user.is_object()) throw std::invalid_argument("config must be a JSON object");
    reject_unknown_keys(user, config_schema(), "");
    json base = to_json(preset_config(user.value("preset", std::string("plate_A"))));
    user.erase("preset");
    if (user.contains("architecture") && user["architecture"].contains("preset")) base.erase("architecture");
    if (user.contains("plate") && user["plate"].contains("regions")) base["plate"].erase("regions");
    if (user.contains("load") && user["load"].contains("kind")) base.erase("load");
    clear_replaced_distributions(base, user);
    base.merge_patch(user);
    try {
        return from_json(base);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

}  // namespace cvs
