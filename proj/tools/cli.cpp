#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "sdebnn/toys.hpp"
#include "sdebnn/train.hpp"

namespace sdebnn::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool is_latent(const std::string& task) { return task == "cauchy2" || task == "expbrownian"; }

constexpr std::uint64_t kEvalSalt = 0x6576616c;
constexpr std::uint64_t kTestSalt = 0x74657374;
constexpr std::uint64_t kProbeSalt = 0x70726f6265;

}  // namespace

json default_config(std::string_view task) {
  if (task == "toy1d") {
    return {{"task", "toy1d"},         {"seed", 0},          {"lr", 1e-3},           {"batch_size", 40},
            {"epochs", 800},           {"estimator", "standard"}, {"steps", 10},     {"eval_every", 0},
            {"kl_scale", 1.0},         {"train_samples", 1}, {"eval_samples", 20},   {"gradient", "backprop"},
            {"max_lr_halvings", 3},    {"augment", 2},       {"hidden_width", 32},   {"activation", "swish"},
            {"drift_hidden", {32}},    {"drift_activation", "tanh"}, {"sigma", 0.2}, {"likelihood_scale", 0.1},
            {"n_train", 400},          {"noise", 0.1},       {"val_fraction", 0.1},  {"n_test", 200}};
  }
  if (task == "twomoons") {
    return {{"task", "twomoons"},      {"seed", 0},          {"lr", 1e-3},           {"batch_size", 128},
            {"epochs", 100},           {"estimator", "standard"}, {"steps", 20},     {"eval_every", 0},
            {"kl_scale", 1.0},         {"train_samples", 1}, {"eval_samples", 20},   {"gradient", "backprop"},
            {"max_lr_halvings", 3},    {"augment", 2},       {"hidden_width", 32},   {"activation", "tanh"},
            {"drift_hidden", {32}},    {"drift_activation", "tanh"}, {"sigma", 0.1}, {"n_train", 1000},
            {"noise", 0.1},            {"val_fraction", 0.1}, {"n_test", 500}};
  }
  if (task == "mnist") {
    return {{"task", "mnist"},         {"seed", 0},          {"lr", 1e-3},           {"batch_size", 128},
            {"epochs", 5},             {"estimator", "standard"}, {"steps", 20},     {"eval_every", 1},
            {"kl_scale", 1.0},         {"train_samples", 1}, {"eval_samples", 20},   {"gradient", "backprop"},
            {"max_lr_halvings", 3},    {"augment", 0},       {"hidden_width", 32},   {"activation", "tanh"},
            {"drift_hidden", {64}},    {"drift_activation", "tanh"}, {"sigma", 0.1},
            {"images", "train-images-idx3-ubyte"}, {"labels", "train-labels-idx1-ubyte"},
            {"test_images", "t10k-images-idx3-ubyte"}, {"test_labels", "t10k-labels-idx1-ubyte"},
            {"pool", 4},               {"limit", 0},         {"test_limit", 0},      {"val_fraction", 0.1}};
  }
  if (task == "cauchy2") {
    return {{"task", "cauchy2"},   {"seed", 0},          {"lr", 1e-2},           {"estimator", "stl"},
            {"steps", 20},         {"sigma", 1.0},       {"w0", 0.0},            {"drift_hidden", {32, 32}},
            {"iterations", 1500},  {"paths_per_sample", 64}, {"train_samples", 1}, {"eval_samples", 64},
            {"eval_time", 0.5},    {"eval_paths", 10000}, {"probe_every", 250},  {"probe_draws", 200}};
  }
  if (task == "expbrownian") {
    return {{"task", "expbrownian"}, {"seed", 0},        {"lr", 1e-2},           {"estimator", "stl"},
            {"steps", 20},           {"sigma", 0.2},     {"w0", 1.0},            {"drift_hidden", {32}},
            {"iterations", 5000},    {"paths_per_sample", 16}, {"train_samples", 1}, {"eval_samples", 64},
            {"probe_every", 500},    {"probe_draws", 200}};
  }
  throw ConfigError("unknown task '" + std::string(task) +
                    "' (expected toy1d, twomoons, mnist, cauchy2 or expbrownian)");
}

namespace {

bool same_kind(const json& def, const json& v) {
  if (def.is_number_float()) return v.is_number();
  if (def.is_number_integer()) return v.is_number_integer() && v.get<long long>() >= 0;
  if (def.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<long long>() <= 0) return false;
    }
    return v.is_array();
  }
  return def.type() == v.type();
}

void set_key(json& cfg, const std::string& key, const json& value) {
  if (!cfg.contains(key)) {
    throw ConfigError("unknown config key '" + key + "' for task '" + cfg["task"].get<std::string>() + "'");
  }
  if (!same_kind(cfg[key], value)) {
    throw ConfigError("config key '" + key + "' expects a value like " + cfg[key].dump() + ", got " + value.dump());
  }
  cfg[key] = cfg[key].is_number_float() ? json(value.get<double>()) : value;
}

}  // namespace

json resolve_config(const json& user, const std::vector<std::string>& overrides) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  std::string task = "toy1d";
  if (user.contains("task")) {
    if (!user["task"].is_string()) throw ConfigError("config key 'task' must be a string");
    task = user["task"].get<std::string>();
  }
  std::vector<std::pair<std::string, json>> parsed;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    const std::string key = o.substr(0, eq), text = o.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    if (key == "task") {
      if (!value.is_string()) throw ConfigError("config key 'task' must be a string");
      task = value.get<std::string>();
    } else {
      parsed.emplace_back(key, std::move(value));
    }
  }
  json cfg = default_config(task);
  for (const auto& [k, v] : user.items()) {
    if (k != "task") set_key(cfg, k, v);
  }
  for (const auto& [k, v] : parsed) set_key(cfg, k, v);
  return cfg;
}

namespace {

// ---- config accessors -------------------------------------------------------

std::size_t size_of(const json& cfg, const char* key) { return cfg.at(key).get<std::size_t>(); }
double real_of(const json& cfg, const char* key) { return cfg.at(key).get<double>(); }
std::string str_of(const json& cfg, const char* key) { return cfg.at(key).get<std::string>(); }

vi::GradientMethod parse_gradient(const std::string& s) {
  if (s == "backprop") return vi::GradientMethod::backprop;
  if (s == "adjoint") return vi::GradientMethod::adjoint;
  throw ConfigError("unknown gradient method '" + s + "' (expected backprop or adjoint)");
}

train::TrainConfig train_config(const json& cfg, int workers) {
  train::TrainConfig t;
  t.lr = real_of(cfg, "lr");
  t.batch_size = size_of(cfg, "batch_size");
  t.epochs = size_of(cfg, "epochs");
  t.estimator = vi::parse_estimator(str_of(cfg, "estimator"));
  t.solver.steps = static_cast<int>(size_of(cfg, "steps"));
  t.seed = cfg.at("seed").get<std::uint64_t>();
  t.eval_every = size_of(cfg, "eval_every");
  t.kl_scale = real_of(cfg, "kl_scale");
  t.train_samples = size_of(cfg, "train_samples");
  t.eval_samples = size_of(cfg, "eval_samples");
  t.gradient = parse_gradient(str_of(cfg, "gradient"));
  t.max_lr_halvings = static_cast<int>(size_of(cfg, "max_lr_halvings"));
  t.workers = workers;
  t.validate();
  return t;
}

train::ArchConfig arch_config(const json& cfg) {
  train::ArchConfig a;
  a.augment = size_of(cfg, "augment");
  a.hidden_width = size_of(cfg, "hidden_width");
  a.activation = nets::parse_activation(str_of(cfg, "activation"));
  a.drift_hidden = cfg.at("drift_hidden").get<std::vector<std::size_t>>();
  a.drift_activation = nets::parse_activation(str_of(cfg, "drift_activation"));
  a.sigma = real_of(cfg, "sigma");
  if (cfg.contains("likelihood_scale")) {
    a.likelihood = lik::Likelihood::Kind::gaussian;
    a.likelihood_scale = real_of(cfg, "likelihood_scale");
  } else {
    a.likelihood = lik::Likelihood::Kind::categorical;
  }
  return a;
}

struct TaskData {
  data::Dataset trainval;
  data::Dataset test;
  data::Standardizer standardizer;
  std::size_t output_dim = 1;
};

fs::path data_path(const std::string& name) {
  const fs::path p(name);
  if (p.is_absolute()) return p;
  const char* dir = std::getenv("SDEBNN_DATA_DIR");
  return fs::path(dir != nullptr && *dir != '\0' ? dir : "data") / p;
}

TaskData load_task_data(const json& cfg) {
  const std::string task = str_of(cfg, "task");
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  const std::uint64_t test_seed = rng::mix64(seed ^ kTestSalt);
  TaskData d;
  if (task == "toy1d") {
    d.trainval = data::gen_toy1d(size_of(cfg, "n_train"), real_of(cfg, "noise"), seed);
    d.test = data::gen_toy1d(size_of(cfg, "n_test"), real_of(cfg, "noise"), test_seed);
  } else if (task == "twomoons") {
    d.trainval = data::gen_two_moons(size_of(cfg, "n_train"), real_of(cfg, "noise"), seed);
    d.test = data::gen_two_moons(size_of(cfg, "n_test"), real_of(cfg, "noise"), test_seed);
    d.output_dim = 2;
  } else if (task == "mnist") {
    const std::size_t pool = size_of(cfg, "pool");
    d.trainval = data::load_idx(data_path(str_of(cfg, "images")), data_path(str_of(cfg, "labels")), pool,
                                size_of(cfg, "limit"));
    d.test = data::load_idx(data_path(str_of(cfg, "test_images")), data_path(str_of(cfg, "test_labels")), pool,
                            size_of(cfg, "test_limit"));
    d.output_dim = 10;
  } else {
    throw UsageError("task '" + task + "' has no supervised dataset");
  }
  data::split_validation(d.trainval, real_of(cfg, "val_fraction"), seed);
  d.standardizer = data::standardize(d.trainval);
  d.test.inputs = d.standardizer.apply(d.test.inputs);
  d.test.split.assign(d.test.size(), data::Split::test);
  return d;
}

SdeBnnModel latent_model(const json& cfg) {
  const auto hidden = cfg.at("drift_hidden").get<std::vector<std::size_t>>();
  return toys::latent_toy_model(real_of(cfg, "sigma"), real_of(cfg, "w0"), hidden, cfg.at("seed").get<std::uint64_t>());
}

vi::ElboProblem latent_problem(const json& cfg, int steps, int workers) {
  const std::size_t paths = size_of(cfg, "paths_per_sample");
  vi::ElboProblem p;
  if (str_of(cfg, "task") == "cauchy2") {
    p = toys::cauchy_problem(data::gen_cauchy_two_obs(), paths, steps);
  } else {
    const auto obs = toys::exp_brownian_observations(cfg.at("seed").get<std::uint64_t>());
    p = toys::observation_problem(lik::Likelihood::gaussian(toys::kExpBrownianScale), obs.times, obs.values, paths,
                                  steps);
  }
  p.workers = workers;
  return p;
}

// ---- output helpers ---------------------------------------------------------

json meta(const std::string& command, const json& cfg) {
  return {{"sdebnn_version", SDEBNN_VERSION}, {"command", command}, {"seed", cfg.at("seed")}, {"config", cfg}};
}

void csv_preamble(std::ostream& os, const std::string& command, const json& cfg) {
  os << "# sdebnn_version: " << SDEBNN_VERSION << "\n# command: " << command << "\n# seed: " << cfg.at("seed")
     << "\n# config: " << cfg.dump() << '\n';
}

/// Output stream for a path, "-" meaning `fallback`.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      os_ = &fallback;
    } else {
      if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw std::runtime_error("cannot write " + path);
      os_ = file_.get();
    }
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_ = nullptr;
};

json read_json_file(const std::string& path, const char* what) {
  std::ifstream is(path);
  if (!is) throw ConfigError(std::string("cannot open ") + what + " '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + " '" + path + "' is not valid JSON: " + e.what());
  }
}

std::vector<int> parse_int_list(const std::vector<std::string>& items) {
  std::vector<int> out;
  for (const auto& s : items) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || v <= 0) throw UsageError("expected a positive integer, got '" + s + "'");
    out.push_back(v);
  }
  return out;
}

// ---- commands ---------------------------------------------------------------

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  int workers = 1;
};

json load_config(const Common& c) {
  json user = c.config_path.empty() ? json::object() : read_json_file(c.config_path, "config");
  auto overrides = c.overrides;
  if (c.seed) overrides.push_back("seed=" + std::to_string(*c.seed));
  return resolve_config(user, overrides);
}

int cmd_train(const Common& c, const std::string& out_dir, std::ostream& out) {
  const json cfg = load_config(c);
  const std::string task = str_of(cfg, "task");
  fs::create_directories(out_dir);
  std::ofstream metrics(fs::path(out_dir) / "metrics.jsonl");
  if (!metrics) throw std::runtime_error("cannot write metrics in " + out_dir);
  json header = meta("train", cfg);
  header["type"] = "header";
  metrics << header.dump() << '\n';
  const auto sink = [&](const json& j) { metrics << j.dump() << '\n' << std::flush; };

  json summary = meta("train", cfg);
  if (is_latent(task)) {
    auto model = latent_model(cfg);
    train::LatentFitConfig lcfg;
    lcfg.iterations = size_of(cfg, "iterations");
    lcfg.lr = real_of(cfg, "lr");
    lcfg.estimator = vi::parse_estimator(str_of(cfg, "estimator"));
    lcfg.samples = size_of(cfg, "train_samples");
    lcfg.seed = cfg.at("seed").get<std::uint64_t>();
    const int steps = static_cast<int>(size_of(cfg, "steps"));
    (void)train::fit_latent(model, latent_problem(cfg, steps, c.workers), lcfg, sink);
    std::ofstream ck(fs::path(out_dir) / "checkpoint.json");
    ck << train::latent_checkpoint_json(model, cfg).dump(1) << '\n';
    auto p = latent_problem(cfg, steps, c.workers);
    p.model = &model;
    const auto elbo = vi::elbo_estimate(p, vi::Estimator::fullmc, size_of(cfg, "eval_samples"),
                                        rng::mix64(lcfg.seed ^ kEvalSalt));
    summary["final"] = {{"elbo", elbo.value}, {"loglik", elbo.loglik}, {"kl", elbo.kl}};
  } else {
    const auto tcfg = train_config(cfg, c.workers);
    const auto d = load_task_data(cfg);
    auto state = train::init_state(train::build_model(arch_config(cfg), d.trainval.input_dim(), d.output_dim,
                                                      tcfg.seed),
                                   tcfg);
    json last;
    train::fit(state, d.trainval, tcfg, [&](const json& j) {
      sink(j);
      if (!j.contains("event")) last = j;
    });
    train::save_checkpoint(fs::path(out_dir) / "checkpoint.json", state, cfg);
    summary["final"] = last;
    summary["test"] = train::evaluate(state.model, d.test, tcfg.eval_samples, rng::mix64(tcfg.seed ^ kEvalSalt),
                                      tcfg.solver, c.workers);
  }
  std::ofstream(fs::path(out_dir) / "summary.json") << summary.dump(1) << '\n';
  out << summary.dump() << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& split, std::size_t samples,
             const std::vector<std::string>& steps_arg, const std::vector<double>& tolerances, int workers,
             const std::string& out_path, std::ostream& out) {
  const json ck = train::load_checkpoint_json(ckpt_path);
  if (!ck.contains("config")) throw ConfigError("checkpoint has no config echo");
  const json cfg = resolve_config(ck.at("config"), {});
  const std::string task = str_of(cfg, "task");
  auto steps = parse_int_list(steps_arg);
  if (steps.empty() && tolerances.empty()) steps.push_back(static_cast<int>(size_of(cfg, "steps")));
  const auto seed = rng::mix64(cfg.at("seed").get<std::uint64_t>() ^ kEvalSalt);
  if (samples == 0) samples = size_of(cfg, "eval_samples");

  std::vector<std::pair<json, SolverConfig>> solvers;
  for (int n : steps) {
    SolverConfig s;
    s.steps = n;
    solvers.push_back({{{"solver", "fixed"}, {"steps", n}}, s});
  }
  for (double tol : tolerances) {
    if (!(tol > 0.0)) throw UsageError("tolerances must be positive");
    SolverConfig s;
    s.mode = SolverConfig::Mode::adaptive;
    s.rtol = tol;
    s.atol = tol;
    solvers.push_back({{{"solver", "adaptive"}, {"rtol", tol}, {"atol", tol}}, s});
  }

  json result = meta("eval", cfg);
  result["checkpoint"] = ckpt_path;
  result["samples"] = samples;
  json rows = json::array();
  if (is_latent(task)) {
    const auto model = train::latent_from_checkpoint(ck);
    result["split"] = "train";
    for (auto& [row, s] : solvers) {
      if (s.mode != SolverConfig::Mode::fixed) throw UsageError("latent tasks evaluate with fixed steps only");
      auto p = latent_problem(cfg, s.steps, workers);
      p.model = &model;
      const auto e = vi::elbo_estimate(p, vi::Estimator::fullmc, samples, seed);
      row["metrics"] = {{"elbo", e.value}, {"loglik", e.loglik}, {"kl", e.kl}, {"mart", e.mart}};
      if (task == "cauchy2") {
        const double t = real_of(cfg, "eval_time");
        const auto xs = toys::marginal_samples(model, t, size_of(cfg, "eval_paths"), seed, s);
        row["metrics"]["eval_time"] = t;
        row["metrics"]["kde_modes"] = toys::kde_mode_count(xs);
      }
      rows.push_back(row);
    }
  } else {
    const auto state = train::state_from_checkpoint(ck);
    const auto d = load_task_data(cfg);
    const auto which = data::parse_split(split);
    const auto ds = which == data::Split::test ? d.test : d.trainval.subset(which);
    if (ds.size() == 0) throw UsageError("split '" + split + "' is empty");
    result["split"] = split;
    for (auto& [row, s] : solvers) {
      row["metrics"] = train::evaluate(state.model, ds, samples, seed, s, workers);
      rows.push_back(row);
    }
  }
  result["rows"] = rows;
  Sink sink(out_path, out);
  *sink << result.dump(1) << '\n';
  return kExitOk;
}

int cmd_gradvar(const Common& c, const std::string& out_path, std::ostream& out) {
  const json cfg = load_config(c);
  const std::string task = str_of(cfg, "task");
  if (!is_latent(task)) throw UsageError("gradvar runs on the latent tasks (expbrownian, cauchy2)");
  auto model = latent_model(cfg);
  const int steps = static_cast<int>(size_of(cfg, "steps"));
  const std::size_t every = std::max<std::size_t>(1, size_of(cfg, "probe_every"));
  const std::size_t draws = size_of(cfg, "probe_draws");
  train::LatentFitConfig lcfg;
  lcfg.iterations = size_of(cfg, "iterations");
  lcfg.lr = real_of(cfg, "lr");
  lcfg.estimator = vi::parse_estimator(str_of(cfg, "estimator"));
  lcfg.samples = size_of(cfg, "train_samples");
  lcfg.seed = cfg.at("seed").get<std::uint64_t>();

  std::vector<vi::VarianceRow> rows;
  const auto probe_seed = rng::mix64(lcfg.seed ^ kProbeSalt);
  const auto observe = [&](std::size_t it, const SdeBnnModel& m) {
    if (it % every != 0 && it != lcfg.iterations) return;
    auto p = latent_problem(cfg, steps, c.workers);
    p.model = &m;
    p.paths_per_sample = 1;
    for (auto e : vi::kAllEstimators) {
      const auto v = vi::grad_variance_probe(p, e, draws, probe_seed);
      rows.push_back({e, it, v.mean_grad_norm, v.var_grad, v.var_grad_norm});
    }
  };
  (void)train::fit_latent(model, latent_problem(cfg, steps, c.workers), lcfg, {}, observe);
  Sink sink(out_path, out);
  csv_preamble(*sink, "gradvar", cfg);
  vi::write_variance_csv(*sink, rows);
  return kExitOk;
}

void trajectory_rows(std::ostream& os, const char* series, std::size_t sample, const Trajectory& traj,
                     const std::vector<double>& xs, std::size_t w_components) {
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const auto& st = traj.states[k];
    const double t = traj.times[k];
    for (std::size_t c = 0; c < std::min(w_components, st.w.cols()); ++c) {
      os << "w," << sample << ",,," << t << ',' << c << ',' << st.w.at(0, c) << '\n';
    }
    if (st.h.rank() == 2) {
      for (std::size_t i = 0; i < st.h.rows(); ++i) {
        for (std::size_t c = 0; c < st.h.cols(); ++c) {
          os << series << ',' << sample << ',' << i << ',' << xs[i] << ',' << t << ',' << c << ',' << st.h.at(i, c)
             << '\n';
        }
      }
    }
  }
}

int cmd_sample(const std::string& ckpt_path, std::size_t n_paths, std::size_t n_inputs, std::size_t grid_points,
               std::size_t w_components, int workers, const std::string& out_path, std::ostream& out) {
  const json ck = train::load_checkpoint_json(ckpt_path);
  if (!ck.contains("config")) throw ConfigError("checkpoint has no config echo");
  const json cfg = resolve_config(ck.at("config"), {});
  const std::string task = str_of(cfg, "task");
  const auto seed = rng::mix64(cfg.at("seed").get<std::uint64_t>() ^ kEvalSalt);
  SolverConfig solver;
  solver.steps = static_cast<int>(size_of(cfg, "steps"));

  Sink sink(out_path, out);
  auto& os = *sink;
  csv_preamble(os, "sample", cfg);
  os.precision(17);
  os << "series,sample,input,x,t,component,value\n";
  if (is_latent(task)) {
    const auto model = train::latent_from_checkpoint(ck);
    for (std::size_t s = 0; s < n_paths; ++s) {
      const BrownianPath path(SeedKey{seed, s}, model.weight_dim());
      const auto traj = solve(model, Tensor(ad::Shape{0}), std::span<const BrownianPath>(&path, 1), solver, true);
      trajectory_rows(os, "h", s, traj, {}, w_components);
    }
    return kExitOk;
  }

  const auto state = train::state_from_checkpoint(ck);
  const auto& model = state.model;
  const auto d = load_task_data(cfg);
  // Trajectory inputs: an even grid over the raw range for 1D inputs, the
  // first test rows otherwise.
  Tensor raw;
  if (model.input_dim == 1) {
    raw = Tensor(ad::Shape{n_inputs, 1});
    for (std::size_t i = 0; i < n_inputs; ++i) {
      raw[i] = n_inputs == 1 ? 0.0 : -3.0 + 6.0 * static_cast<double>(i) / static_cast<double>(n_inputs - 1);
    }
  }
  Tensor x = model.input_dim == 1 ? d.standardizer.apply(raw) : d.test.rows([&] {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < std::min(n_inputs, d.test.size()); ++i) idx.push_back(i);
    return idx;
  }()).inputs;
  std::vector<double> first_coord(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) first_coord[i] = model.input_dim == 1 ? raw[i] : x.at(i, 0);
  const Tensor h0 = model.embed(x);
  for (std::size_t s = 0; s < n_paths; ++s) {
    const BrownianPath path(SeedKey{seed, s}, model.sde.weight_dim());
    const auto traj = solve(model.sde, h0, std::span<const BrownianPath>(&path, 1), solver, true);
    trajectory_rows(os, "h", s, traj, first_coord, w_components);
  }
  if (model.input_dim == 1 && grid_points > 0) {
    Tensor grid(ad::Shape{grid_points, 1});
    for (std::size_t i = 0; i < grid_points; ++i) {
      grid[i] = grid_points == 1 ? 0.0 : -3.0 + 6.0 * static_cast<double>(i) / static_cast<double>(grid_points - 1);
    }
    const auto curves = train::sample_outputs(model, d.standardizer.apply(grid), n_paths, seed, solver, workers);
    for (std::size_t s = 0; s < curves.size(); ++s) {
      for (std::size_t i = 0; i < grid_points; ++i) {
        for (std::size_t c = 0; c < curves[s].cols(); ++c) {
          os << "predictive," << s << ',' << i << ',' << grid[i] << ",1," << c << ',' << curves[s].at(i, c) << '\n';
        }
      }
    }
  }
  return kExitOk;
}

int cmd_bench(const Common& c, const std::vector<std::string>& steps_arg, std::size_t repeats,
              const std::string& out_path, std::ostream& out) {
  const json cfg = load_config(c);
  if (is_latent(str_of(cfg, "task"))) throw UsageError("bench runs on the supervised tasks");
  auto steps = parse_int_list(steps_arg);
  if (steps.empty()) steps = {8, 16, 32, 64, 128};
  if (repeats == 0) throw UsageError("repeats must be positive");
  const auto tcfg = train_config(cfg, c.workers);
  const auto d = load_task_data(cfg);
  const auto model = train::build_model(arch_config(cfg), d.trainval.input_dim(), d.output_dim, tcfg.seed);
  const auto train_rows = d.trainval.subset(data::Split::train);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < std::min(tcfg.batch_size, train_rows.size()); ++i) idx.push_back(i);
  const auto problem = train::batch_problem(model, train_rows.rows(idx), train_rows.size(), tcfg);
  const auto mode = tcfg.estimator == vi::Estimator::stl ? MartingaleMode::blocked_phi : MartingaleMode::full;
  const TerminalLoss loss = [&](ad::Tape& tape, const AugmentedState<Var>& fin, std::span<const Var> ex) {
    const TapedTrajectory traj{{1.0}, {fin}};
    Var penalty = fin.kl;
    if (tcfg.estimator != vi::Estimator::standard) penalty = penalty + fin.mart;
    return -(problem.loglik(tape, traj, ex) * problem.data_scale - penalty * problem.kl_scale);
  };

  Sink sink(out_path, out);
  auto& os = *sink;
  csv_preamble(os, "bench", cfg);
  os << "method,steps,wall_ms,peak_states,replayed_steps,max_rel_err\n";
  const BrownianPath path(SeedKey{tcfg.seed, 0}, model.sde.weight_dim());
  const std::span<const BrownianPath> paths(&path, 1);
  for (int n : steps) {
    SolverConfig s;
    s.steps = n;
    GradientResult results[2];
    double best[2] = {1e300, 1e300};
    for (int m = 0; m < 2; ++m) {
      for (std::size_t r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        results[m] = m == 0 ? grad_backprop(loss, model.sde, problem.h0, paths, s, problem.extras, mode)
                            : grad_adjoint(loss, model.sde, problem.h0, paths, s, problem.extras, mode);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        best[m] = std::min(best[m], ms);
      }
    }
    const auto rel = [](const Tensor& a, const Tensor& b) {
      double diff = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
      return diff / std::max(b.max_abs(), 1e-300);
    };
    double err = std::max(rel(results[1].d_phi, results[0].d_phi), rel(results[1].d_w0, results[0].d_w0));
    for (std::size_t k = 0; k < results[0].d_extras.size(); ++k) {
      err = std::max(err, rel(results[1].d_extras[k], results[0].d_extras[k]));
    }
    os << "backprop," << n << ',' << best[0] << ',' << results[0].peak_retained_states << ",0,0\n";
    os << "adjoint," << n << ',' << best[1] << ',' << results[1].peak_retained_states << ','
       << results[1].replayed_steps << ',' << err << '\n';
  }
  return kExitOk;
}

void report(std::ostream& err, int code, const std::string& message, const std::string& command,
            const std::string& type) {
  err << json{{"code", code}, {"message", message}, {"context", {{"command", command}, {"error", type}}}}.dump()
      << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SDE-BNN toolkit: training, evaluation and diagnostics", "sdebnn"};
  app.set_version_flag("--version", std::string(SDEBNN_VERSION));
  app.require_subcommand(1);

  Common train_c, gradvar_c, bench_c;
  auto add_common = [](CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config_path, "JSON config file (keys must match the task defaults)");
    sub->add_option("--set", c.overrides, "Override a config key: key=value (repeatable)");
    sub->add_option("--seed", c.seed, "Override the config seed");
    sub->add_option("--workers", c.workers, "Worker threads for Monte Carlo samples")->check(CLI::PositiveNumber);
  };

  std::string train_out = "run";
  auto* train_cmd = app.add_subcommand("train", "Train a model; writes metrics.jsonl, checkpoint.json, summary.json");
  add_common(train_cmd, train_c);
  train_cmd->add_option("--out", train_out, "Output directory");

  std::string eval_ckpt, eval_split = "test", eval_out = "-";
  std::size_t eval_samples = 0;
  std::vector<std::string> eval_steps;
  std::vector<double> eval_tols;
  int eval_workers = 1;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint, optionally over a solver sweep");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--split", eval_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--samples", eval_samples, "Posterior samples (default: config eval_samples)");
  eval_cmd->add_option("--steps", eval_steps, "Fixed step counts to sweep")->delimiter(',');
  eval_cmd->add_option("--tolerances", eval_tols, "Adaptive tolerances to sweep")->delimiter(',');
  eval_cmd->add_option("--workers", eval_workers, "Worker threads")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", eval_out, "Output JSON file, - for stdout");

  std::string gradvar_out = "-";
  auto* gradvar_cmd = app.add_subcommand("gradvar", "Gradient variance of the three estimators during training (CSV)");
  add_common(gradvar_cmd, gradvar_c);
  gradvar_cmd->add_option("--out", gradvar_out, "Output CSV file, - for stdout");

  std::string sample_ckpt, sample_out = "-";
  std::size_t sample_paths = 20, sample_inputs = 9, sample_grid = 201, sample_w = 8;
  int sample_workers = 1;
  auto* sample_cmd = app.add_subcommand("sample", "Posterior trajectories of w and h plus predictive curves (CSV)");
  sample_cmd->add_option("--checkpoint", sample_ckpt, "Checkpoint file")->required();
  sample_cmd->add_option("--paths", sample_paths, "Posterior sample paths");
  sample_cmd->add_option("--inputs", sample_inputs, "Inputs whose hidden trajectories are written");
  sample_cmd->add_option("--grid", sample_grid, "Predictive curve grid points (1D inputs)");
  sample_cmd->add_option("--w-components", sample_w, "Weight components written per time");
  sample_cmd->add_option("--workers", sample_workers, "Worker threads")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--out", sample_out, "Output CSV file, - for stdout");

  std::string bench_out = "-";
  std::vector<std::string> bench_steps;
  std::size_t bench_repeats = 3;
  auto* bench_cmd = app.add_subcommand("bench", "Backprop vs adjoint gradients: time, memory, agreement (CSV)");
  add_common(bench_cmd, bench_c);
  bench_cmd->add_option("--steps", bench_steps, "Step counts")->delimiter(',');
  bench_cmd->add_option("--repeats", bench_repeats, "Timing repeats (minimum is reported)");
  bench_cmd->add_option("--out", bench_out, "Output CSV file, - for stdout");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::string command = "sdebnn";
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << SDEBNN_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report(err, kExitUsage, e.what(), command, "usage");
    return kExitUsage;
  }

  const auto subs = app.get_subcommands();
  command = subs.front()->get_name();
  try {
    if (command == "train") return cmd_train(train_c, train_out, out);
    if (command == "eval") {
      return cmd_eval(eval_ckpt, eval_split, eval_samples, eval_steps, eval_tols, eval_workers, eval_out, out);
    }
    if (command == "gradvar") return cmd_gradvar(gradvar_c, gradvar_out, out);
    if (command == "sample") {
      return cmd_sample(sample_ckpt, sample_paths, sample_inputs, sample_grid, sample_w, sample_workers, sample_out,
                        out);
    }
    return cmd_bench(bench_c, bench_steps, bench_repeats, bench_out, out);
  } catch (const ConfigError& e) {
    report(err, kExitUsage, e.what(), command, "config");
    return kExitUsage;
  } catch (const UsageError& e) {
    report(err, kExitUsage, e.what(), command, "usage");
    return kExitUsage;
  } catch (const train::TrainingDiverged& e) {
    report(err, kExitRuntime, e.what(), command, "divergence");
    return kExitRuntime;
  } catch (const DivergenceError& e) {
    report(err, kExitRuntime, e.what(), command, "divergence");
    return kExitRuntime;
  } catch (const FormatError& e) {
    report(err, kExitRuntime, e.what(), command, "format");
    return kExitRuntime;
  } catch (const std::exception& e) {
    report(err, kExitRuntime, e.what(), command, "runtime");
    return kExitRuntime;
  }
}

}  // namespace sdebnn::cli
