#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include "sharplab/error.hpp"
#include "sharplab/harness.hpp"
#include "sharplab/random.hpp"

namespace sharplab {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(where + ": missing key '" + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + " key '" + key + "': " + e.what());
    }
}

constexpr std::uint64_t kInitStream = 211;

ObjectiveSpec parse_objective(const json& j, const std::optional<DatasetSpec>& dataset) {
    const auto kind = parse_objective_kind(require<std::string>(j, "kind", "objective"));
    const double decay = get_or(j, "weight_decay", 0.0);
    switch (kind) {
        case ObjectiveKind::quadratic: {
            check_keys(j, {"kind", "weight_decay", "a", "b"}, "objective");
            const auto rows = require<std::vector<std::vector<double>>>(j, "a", "objective");
            Matrix a(rows.size(), rows.empty() ? 0 : rows.front().size());
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows[r].size() != a.cols()) throw ConfigError("objective: ragged matrix 'a'");
                for (std::size_t c = 0; c < a.cols(); ++c) a(r, c) = rows[r][c];
            }
            auto b = get_or(j, "b", std::vector<double>(a.rows(), 0.0));
            return make_quadratic(std::move(a), std::move(b), decay);
        }
        case ObjectiveKind::rosenbrock:
            check_keys(j, {"kind", "weight_decay", "dim", "a", "b"}, "objective");
            return make_rosenbrock(get_or<std::size_t>(j, "dim", 2), get_or(j, "a", 1.0), get_or(j, "b", 100.0), decay);
        case ObjectiveKind::sharp_flat: {
            check_keys(j, {"kind", "weight_decay", "width_sharp", "width_flat", "depth_gap", "separation"}, "objective");
            auto spec = make_sharp_flat(get_or(j, "width_sharp", 0.15), get_or(j, "width_flat", 1.0),
                                        get_or(j, "depth_gap", 0.1), get_or(j, "separation", 1.5));
            spec.weight_decay = decay;
            return spec;
        }
        case ObjectiveKind::mlp_classifier: {
            check_keys(j, {"kind", "weight_decay", "hidden", "activation"}, "objective");
            if (!dataset) throw ConfigError("objective: mlp_classifier needs a dataset");
            std::vector<std::size_t> widths{2};
            for (auto h : get_or(j, "hidden", std::vector<std::size_t>{16})) widths.push_back(h);
            widths.push_back(2);
            return make_mlp(std::move(widths), parse_activation(get_or<std::string>(j, "activation", "tanh")), decay);
        }
    }
    throw ConfigError("objective: unsupported kind");
}

json objective_to_json(const ObjectiveSpec& spec) {
    json j{{"kind", to_string(spec.kind())}, {"weight_decay", spec.weight_decay}};
    if (const auto* q = std::get_if<QuadraticModel>(&spec.model)) {
        std::vector<std::vector<double>> rows(q->a.rows(), std::vector<double>(q->a.cols()));
        for (std::size_t r = 0; r < q->a.rows(); ++r)
            for (std::size_t c = 0; c < q->a.cols(); ++c) rows[r][c] = q->a(r, c);
        j["a"] = rows;
        j["b"] = q->b;
    } else if (const auto* rb = std::get_if<RosenbrockModel>(&spec.model)) {
        j["dim"] = rb->dim;
        j["a"] = rb->a;
        j["b"] = rb->b;
    } else if (const auto* sf = std::get_if<SharpFlatModel>(&spec.model)) {
        j["width_sharp"] = sf->width_sharp;
        j["width_flat"] = sf->width_flat;
        j["depth_gap"] = sf->depth_gap;
        j["separation"] = sf->separation;
    } else if (const auto* m = std::get_if<MlpModel>(&spec.model)) {
        j["hidden"] = std::vector<std::size_t>(m->widths.begin() + 1, m->widths.end() - 1);
        j["activation"] = to_string(m->activation);
    }
    return j;
}

}  // namespace

void ExperimentConfig::validate() const {
    objective.validate();
    optimizer.validate();
    if (method == Method::vsam) {
        sampler.validate();
        if (sampler.warmup < 1) throw ConfigError("sampler: warmup must be >= 1 for vsam");
    }
    if (method == Method::sam_k && k < 1) throw ConfigError("optimizer: k must be >= 1");
    if (seeds.empty()) throw ConfigError("config: at least one seed is required");
    if (iterations.has_value() == epochs.has_value()) throw ConfigError("config: give exactly one of iterations, epochs");
    if (iterations && *iterations < 1) throw ConfigError("config: iterations must be >= 1");
    if (epochs && *epochs < 1) throw ConfigError("config: epochs must be >= 1");
    if (epochs && !dataset) throw ConfigError("config: epochs need a dataset");
    if (objective.uses_data() && !dataset) throw ConfigError("config: objective needs a dataset");
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (dataset) {
        if (dataset->n < 2) throw ConfigError("dataset: n must be >= 2");
        if (!(dataset->noise >= 0.0)) throw ConfigError("dataset: noise must be >= 0");
        if (!(dataset->train_fraction > 0.0 && dataset->train_fraction < 1.0))
            throw ConfigError("dataset: train_fraction must lie in (0, 1)");
        const auto n_train = static_cast<std::size_t>(
            std::llround(dataset->train_fraction * static_cast<double>(dataset->n)));
        if (objective.uses_data() && batch_size > n_train)
            throw ConfigError("config: batch_size exceeds the training split");
    }
    if (init.kind == InitSpec::Kind::point && init.values.size() != objective.parameter_count())
        throw ConfigError("init: point has the wrong length");
    if (init.kind == InitSpec::Kind::disc) {
        if (objective.parameter_count() != 2 || init.values.size() != 2)
            throw ConfigError("init: disc needs a 2-D objective and a 2-D centre");
        if (!(init.radius > 0.0)) throw ConfigError("init: disc radius must be > 0");
    }
}

std::string ExperimentConfig::label() const {
    switch (method) {
        case Method::sam_k: return "sam_k(" + std::to_string(k) + ")";
        case Method::vsam:
            return sampler.mode == SamplingMode::adaptive ? "vsam" : "vsam[" + to_string(sampler.mode) + "]";
        default: return to_string(method);
    }
}

ExperimentConfig parse_config(const json& j) {
    check_keys(j, {"name", "objective", "dataset", "optimizer", "sampler", "iterations", "epochs", "batch_size",
                   "seeds", "init", "output_dir"},
               "config");
    ExperimentConfig c;
    c.name = get_or<std::string>(j, "name", c.name);

    if (auto it = j.find("dataset"); it != j.end()) {
        check_keys(*it, {"kind", "n", "noise", "seed", "train_fraction"}, "dataset");
        DatasetSpec d;
        d.kind = parse_dataset_kind(get_or<std::string>(*it, "kind", "moons"));
        d.n = get_or(*it, "n", d.n);
        d.noise = get_or(*it, "noise", d.noise);
        d.seed = get_or(*it, "seed", d.seed);
        d.train_fraction = get_or(*it, "train_fraction", d.train_fraction);
        c.dataset = d;
    }
    c.objective = parse_objective(require<json>(j, "objective", "config"), c.dataset);

    const json opt = get_or(j, "optimizer", json::object());
    check_keys(opt, {"method", "eta0", "rho", "gamma", "momentum", "lr_schedule", "grad_eval_budget", "k"}, "optimizer");
    c.method = parse_method(get_or<std::string>(opt, "method", "vsam"));
    c.optimizer.eta0 = get_or(opt, "eta0", c.optimizer.eta0);
    c.optimizer.rho = get_or(opt, "rho", c.optimizer.rho);
    c.optimizer.gamma = get_or(opt, "gamma", c.optimizer.gamma);
    c.optimizer.momentum = get_or(opt, "momentum", c.optimizer.momentum);
    c.optimizer.lr_schedule = parse_lr_schedule(get_or<std::string>(opt, "lr_schedule", "cosine"));
    if (auto it = opt.find("grad_eval_budget"); it != opt.end() && !it->is_null())
        c.optimizer.grad_eval_budget = it->get<std::int64_t>();
    c.k = get_or(opt, "k", c.k);

    const json smp = get_or(j, "sampler", json::object());
    check_keys(smp, {"window", "slices", "alpha", "initial_budget", "warmup", "max_rate", "subset_segments", "eps", "mode"},
               "sampler");
    c.sampler.window = get_or(smp, "window", c.sampler.window);
    c.sampler.slices = get_or(smp, "slices", c.sampler.slices);
    c.sampler.alpha = get_or(smp, "alpha", c.sampler.alpha);
    c.sampler.initial_budget = get_or(smp, "initial_budget", c.sampler.initial_budget);
    c.sampler.warmup = get_or(smp, "warmup", static_cast<std::int64_t>(5 * c.sampler.window));
    c.sampler.max_rate = get_or(smp, "max_rate", c.sampler.max_rate);
    c.sampler.subset_segments = get_or(smp, "subset_segments", c.sampler.subset_segments);
    c.sampler.eps = get_or(smp, "eps", c.sampler.eps);
    c.sampler.mode = parse_sampling_mode(get_or<std::string>(smp, "mode", "adaptive"));

    if (auto it = j.find("iterations"); it != j.end()) c.iterations = it->get<std::int64_t>();
    if (auto it = j.find("epochs"); it != j.end()) c.epochs = it->get<std::int64_t>();
    c.batch_size = get_or(j, "batch_size", c.batch_size);
    c.seeds = get_or(j, "seeds", c.seeds);

    if (auto it = j.find("init"); it != j.end()) {
        check_keys(*it, {"kind", "values", "radius"}, "init");
        const auto kind = get_or<std::string>(*it, "kind", "seeded");
        if (kind == "seeded")
            c.init.kind = InitSpec::Kind::seeded;
        else if (kind == "point")
            c.init.kind = InitSpec::Kind::point;
        else if (kind == "disc")
            c.init.kind = InitSpec::Kind::disc;
        else
            throw ConfigError("init: unknown kind '" + kind + "'");
        c.init.values = get_or(*it, "values", std::vector<double>{});
        c.init.radius = get_or(*it, "radius", 0.0);
    }
    c.output_dir = get_or<std::string>(j, "output_dir", "runs/" + c.name);
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return parse_config(j);
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["objective"] = objective_to_json(c.objective);
    if (c.dataset)
        j["dataset"] = {{"kind", to_string(c.dataset->kind)}, {"n", c.dataset->n}, {"noise", c.dataset->noise},
                        {"seed", c.dataset->seed}, {"train_fraction", c.dataset->train_fraction}};
    j["optimizer"] = {{"method", to_string(c.method)},   {"eta0", c.optimizer.eta0},
                      {"rho", c.optimizer.rho},          {"gamma", c.optimizer.gamma},
                      {"momentum", c.optimizer.momentum}, {"lr_schedule", to_string(c.optimizer.lr_schedule)},
                      {"k", c.k}};
    j["optimizer"]["grad_eval_budget"] =
        c.optimizer.grad_eval_budget ? json(*c.optimizer.grad_eval_budget) : json(nullptr);
    j["sampler"] = {{"window", c.sampler.window},
                    {"slices", c.sampler.slices},
                    {"alpha", c.sampler.alpha},
                    {"initial_budget", c.sampler.initial_budget},
                    {"warmup", c.sampler.warmup},
                    {"max_rate", c.sampler.max_rate},
                    {"subset_segments", c.sampler.subset_segments},
                    {"eps", c.sampler.eps},
                    {"mode", to_string(c.sampler.mode)}};
    if (c.iterations) j["iterations"] = *c.iterations;
    if (c.epochs) j["epochs"] = *c.epochs;
    j["batch_size"] = c.batch_size;
    j["seeds"] = c.seeds;
    const char* kinds[] = {"seeded", "point", "disc"};
    j["init"] = {{"kind", kinds[static_cast<int>(c.init.kind)]}, {"values", c.init.values}, {"radius", c.init.radius}};
    j["output_dir"] = c.output_dir.string();
    return j;
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& config) {
    if (config.output_dir.is_absolute()) return config.output_dir;
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) return std::filesystem::path(root) / config.output_dir;
    return config.output_dir;
}

PreparedData prepare_data(const ExperimentConfig& config) {
    PreparedData out;
    if (!config.dataset) return out;
    const auto& d = *config.dataset;
    auto full = generate_dataset(d.kind, d.n, d.noise, d.seed);
    auto [train, test] = split_dataset(full, d.train_fraction, d.seed);
    out.train = std::move(train);
    out.test = std::move(test);
    return out;
}

ParamVector initial_params(const ExperimentConfig& config, std::uint64_t seed) {
    const std::uint64_t stream = derive_seed(seed, kInitStream);
    switch (config.init.kind) {
        case InitSpec::Kind::seeded: return init_params(config.objective, stream);
        case InitSpec::Kind::point: return ParamVector(config.init.values, config.objective.layout());
        case InitSpec::Kind::disc: {
            Rng rng(stream);
            const double r = config.init.radius * std::sqrt(rng.uniform());
            const double theta = 2.0 * 3.141592653589793 * rng.uniform();
            return ParamVector({config.init.values[0] + r * std::cos(theta), config.init.values[1] + r * std::sin(theta)},
                               config.objective.layout());
        }
    }
    throw ConfigError("init: unsupported kind");
}

std::int64_t horizon(const ExperimentConfig& config, const PreparedData& data) {
    if (config.iterations) return *config.iterations;
    const auto n = static_cast<std::int64_t>(data.train->size());
    const auto b = static_cast<std::int64_t>(config.batch_size);
    return *config.epochs * ((n + b - 1) / b);
}

RunResult run_single(const ExperimentConfig& config, const PreparedData& data, std::uint64_t seed, RunOptions options) {
    TrainingProblem problem{config.objective, initial_params(config, seed), data.train ? &*data.train : nullptr,
                            data.test ? &*data.test : nullptr};
    options.iterations = horizon(config, data);
    options.batch_size = config.batch_size;
    options.seed = seed;
    switch (config.method) {
        case Method::sgd: return run_sgd(problem, config.optimizer, options);
        case Method::sam: return run_sam(problem, config.optimizer, options);
        case Method::sam_k: return run_sam_k(problem, config.optimizer, config.k, options);
        case Method::vsam: return run_vsam(problem, config.optimizer, config.sampler, options);
    }
    throw ConfigError("unsupported method");
}

}  // namespace sharplab
