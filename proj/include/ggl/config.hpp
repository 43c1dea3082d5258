#pragma once

// JSON experiment configuration. Parsing is strict: unknown keys are
// rejected and every range violation names the offending field.

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ggl/adversary.hpp"
#include "ggl/defense.hpp"
#include "ggl/generator.hpp"
#include "ggl/metrics.hpp"

namespace ggl {

struct ModelSpec {
  std::string preset = "mlp-small";
  Shape input_shape{1, 8, 8};
  std::size_t classes = 10;
  std::optional<std::uint64_t> seed;
  std::string weights;  // GGLW file; overrides the preset when set
  std::string id;       // expected model_id, checked when set
};

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::linear_decoder;
  std::size_t latent_dim = 16;
  Shape output_shape{1, 8, 8};
  std::optional<std::uint64_t> seed;
  std::string path;  // GGLW file; overrides the procedural settings when set
};

struct ClientSpec {
  std::string image;
  std::optional<std::size_t> label;
};

struct LandscapeSpec {
  LandscapeOptions options;
  bool two_d = false;
  std::optional<std::uint64_t> seed;
};

struct ExperimentConfig {
  ModelSpec model;
  GeneratorSpec generator;
  ClientSpec client;
  DefenseConfig defense;
  std::optional<std::uint64_t> defense_seed;
  AttackConfig attack;
  std::optional<std::uint64_t> attack_seed;
  LandscapeSpec landscape;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string output_dir = "out";

  // Named seeds fall back to streams split from the global seed.
  std::uint64_t model_seed() const { return model.seed.value_or(split_seed(seed, 1)); }
  std::uint64_t generator_seed() const { return generator.seed.value_or(split_seed(seed, 2)); }
  std::uint64_t resolved_defense_seed() const { return defense_seed.value_or(split_seed(seed, 3)); }
  std::uint64_t resolved_attack_seed() const { return attack_seed.value_or(split_seed(seed, 4)); }
  std::uint64_t landscape_seed() const { return landscape.seed.value_or(split_seed(seed, 5)); }

  void set_threads(unsigned n) {
    threads = n;
    std::visit([n](auto& o) { o.threads = n; }, attack.optimizer);
  }
};

namespace detail {

using nlohmann::json;

class Fields {
 public:
  Fields(const json& j, std::string path, std::vector<std::string>& unknown)
      : j_(j), path_(std::move(path)), unknown_(unknown) {
    require(j.is_object(), ErrorCode::config, label() + " must be an object");
  }

  ~Fields() {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) unknown_.push_back(prefix() + it.key());
  }

  Fields(const Fields&) = delete;
  Fields& operator=(const Fields&) = delete;

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string field(const std::string& key) const { return prefix() + key; }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    require(v.is_number(), ErrorCode::config, field(key) + " must be a number");
    return v.get<double>();
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    require(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0),
            ErrorCode::config, field(key) + " must be a non-negative integer");
    return v.get<std::size_t>();
  }

  std::optional<std::uint64_t> seed(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const json& v = j_.at(key);
    require(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0),
            ErrorCode::config, field(key) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    require(v.is_string(), ErrorCode::config, field(key) + " must be a string");
    return v.get<std::string>();
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    require(v.is_boolean(), ErrorCode::config, field(key) + " must be a boolean");
    return v.get<bool>();
  }

  Shape shape(const std::string& key, const Shape& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    require(v.is_array() && !v.empty(), ErrorCode::config, field(key) + " must be a non-empty array");
    Shape s;
    for (const auto& e : v) {
      require(e.is_number_unsigned() && e.get<std::size_t>() > 0, ErrorCode::config,
              field(key) + " entries must be positive integers");
      s.push_back(e.get<std::size_t>());
    }
    return s;
  }

  std::vector<std::string> strings(const std::string& key) {
    if (!has(key)) return {};
    const json& v = j_.at(key);
    require(v.is_array(), ErrorCode::config, field(key) + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      require(e.is_string(), ErrorCode::config, field(key) + " must be an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  std::pair<double, double> range(const std::string& key, std::pair<double, double> fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    require(v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number(),
            ErrorCode::config, field(key) + " must be [min, max]");
    const double lo = v[0].get<double>(), hi = v[1].get<double>();
    require(lo < hi, ErrorCode::config, field(key) + " must satisfy min < max");
    return {lo, hi};
  }

  std::string label() const { return path_.empty() ? "config" : path_; }
  std::string prefix() const { return path_.empty() ? "" : path_ + "."; }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& unknown_;
  std::set<std::string> seen_;
};

inline void check(bool ok, const std::string& message) { require(ok, ErrorCode::config, message); }

inline EstimationMode parse_mode(const std::string& s, const std::string& field) {
  if (s == "auto") return EstimationMode::automatic;
  if (s == "on") return EstimationMode::on;
  if (s == "off") return EstimationMode::off;
  fail(ErrorCode::config, field + " must be one of auto, on, off");
}

inline DefenseStep parse_step(const json& j, std::size_t index, std::vector<std::string>& unknown) {
  check(j.is_object() && j.contains("kind") && j.at("kind").is_string(),
        "defense.steps[" + std::to_string(index) + "] needs a string 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  Fields f(j, "defense." + kind, unknown);
  f.has("kind");
  if (kind == "clip") {
    Clip c{f.number("bound", 0.0), f.strings("layers")};
    check(f.has("bound"), "defense.clip.bound is required");
    check(std::isfinite(c.bound) && c.bound > 0.0, "defense.clip.bound must be > 0");
    return c;
  }
  if (kind == "noise") {
    Noise n{f.number("sigma", 0.0), f.strings("layers")};
    check(f.has("sigma"), "defense.noise.sigma is required");
    check(std::isfinite(n.sigma) && n.sigma >= 0.0, "defense.noise.sigma must be ≥ 0");
    return n;
  }
  if (kind == "sparsify") {
    Sparsify s{f.number("p", 0.0), f.strings("layers")};
    check(f.has("p"), "defense.sparsify.p is required");
    check(s.rate > 0.0 && s.rate < 1.0, "defense.sparsify.p must be in (0, 1)");
    return s;
  }
  if (kind == "soteria") {
    Soteria s{f.number("p", 0.0), f.text("layer", "")};
    check(f.has("p"), "defense.soteria.p is required");
    check(s.rate > 0.0 && s.rate < 1.0, "defense.soteria.p must be in (0, 1)");
    return s;
  }
  fail(ErrorCode::config, "defense.steps[" + std::to_string(index) + "].kind '" + kind +
                              "' is not one of clip, noise, sparsify, soteria");
}

inline OptimizerConfig parse_optimizer(const json& j, std::vector<std::string>& unknown) {
  Fields f(j, "attack.optimizer", unknown);
  const std::string kind = f.text("kind", "cmaes");
  if (kind == "cmaes") {
    optim::CmaesConfig c;
    c.population = f.count("population", c.population);
    c.max_generations = f.count("generations", c.max_generations);
    c.initial_step = f.number("initial_step", c.initial_step);
    c.max_evaluations = f.count("max_evaluations", c.max_evaluations);
    check(c.population >= 4, "attack.optimizer.population must be ≥ 4");
    check(c.initial_step > 0.0, "attack.optimizer.initial_step must be > 0");
    return c;
  }
  if (kind == "turbo") {
    optim::TurboConfig t;
    t.n_init = f.count("n_init", t.n_init);
    t.batch = f.count("batch", t.batch);
    t.budget = f.count("budget", t.budget);
    t.candidates = f.count("candidates", t.candidates);
    check(t.n_init >= 2, "attack.optimizer.n_init must be ≥ 2");
    check(t.batch >= 1, "attack.optimizer.batch must be ≥ 1");
    check(t.budget > t.n_init, "attack.optimizer.budget must exceed n_init");
    return t;
  }
  if (kind == "adam") {
    optim::AdamConfig a;
    a.lr = f.number("lr", a.lr);
    a.steps = f.count("steps", a.steps);
    a.fd_step = f.number("fd_step", a.fd_step);
    a.max_evaluations = f.count("max_evaluations", a.max_evaluations);
    check(a.lr >= 0.0, "attack.optimizer.lr must be ≥ 0");
    check(a.fd_step > 0.0, "attack.optimizer.fd_step must be > 0");
    return a;
  }
  fail(ErrorCode::config, "attack.optimizer.kind '" + kind + "' is not one of cmaes, turbo, adam");
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
  using detail::check;
  using detail::Fields;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::config, std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  std::vector<std::string> unknown;
  {
    Fields root(j, "", unknown);
    cfg.seed = root.seed("seed").value_or(0);
    cfg.threads = static_cast<unsigned>(root.count("threads", 1));
    check(cfg.threads >= 1, "threads must be ≥ 1");
    cfg.output_dir = root.text("output_dir", cfg.output_dir);

    check(root.has("model"), "model is required");
    {
      Fields m(root.at("model"), "model", unknown);
      cfg.model.preset = m.text("preset", cfg.model.preset);
      cfg.model.weights = m.text("weights", "");
      cfg.model.id = m.text("id", "");
      cfg.model.input_shape = m.shape("input_shape", cfg.model.input_shape);
      cfg.model.classes = m.count("classes", cfg.model.classes);
      cfg.model.seed = m.seed("seed");
      check(cfg.model.preset == "mlp-small" || cfg.model.preset == "cnn-small",
            "model.preset must be mlp-small or cnn-small");
      check(cfg.model.classes >= 2, "model.classes must be ≥ 2");
      check(cfg.model.input_shape.size() == 3, "model.input_shape must be [channels, height, width]");
    }

    check(root.has("generator"), "generator is required");
    {
      Fields g(root.at("generator"), "generator", unknown);
      const std::string kind = g.text("kind", "linear");
      check(kind == "linear" || kind == "deconv", "generator.kind must be linear or deconv");
      cfg.generator.kind = generator_kind_from_string(kind);
      cfg.generator.latent_dim = g.count("latent_dim", cfg.generator.latent_dim);
      cfg.generator.output_shape = g.shape("output_shape", cfg.model.input_shape);
      cfg.generator.seed = g.seed("seed");
      cfg.generator.path = g.text("path", "");
      check(cfg.generator.latent_dim >= 1, "generator.latent_dim must be ≥ 1");
      check(cfg.generator.output_shape.size() == 3,
            "generator.output_shape must be [channels, height, width]");
    }

    if (root.has("client")) {
      Fields c(root.at("client"), "client", unknown);
      cfg.client.image = c.text("image", "");
      if (c.has("label")) cfg.client.label = c.count("label", 0);
    }

    if (root.has("defense")) {
      Fields d(root.at("defense"), "defense", unknown);
      cfg.defense_seed = d.seed("seed");
      if (d.has("steps")) {
        const auto& steps = d.at("steps");
        check(steps.is_array(), "defense.steps must be an array");
        std::size_t soteria = 0;
        for (std::size_t i = 0; i < steps.size(); ++i) {
          cfg.defense.steps.push_back(detail::parse_step(steps[i], i, unknown));
          if (std::holds_alternative<Soteria>(cfg.defense.steps.back())) {
            ++soteria;
            check(soteria <= 1, "at most one soteria step");
            check(i == 0, "defense.soteria must be the first step");
          }
        }
      }
    }

    if (root.has("attack")) {
      Fields a(root.at("attack"), "attack", unknown);
      const std::string loss = a.text("loss", "l2");
      check(loss == "l2" || loss == "D1" || loss == "cosine" || loss == "D2",
            "attack.loss must be l2 (D1) or cosine (D2)");
      cfg.attack.loss = (loss == "l2" || loss == "D1") ? LossKind::l2 : LossKind::cosine;
      const std::string reg = a.text("regularizer", "kl");
      check(reg == "kl" || reg == "R1" || reg == "norm" || reg == "R2",
            "attack.regularizer must be kl (R1) or norm (R2)");
      cfg.attack.regularizer = (reg == "kl" || reg == "R1") ? RegularizerKind::kl : RegularizerKind::norm;
      cfg.attack.lambda = a.number("lambda", cfg.attack.lambda);
      check(std::isfinite(cfg.attack.lambda) && cfg.attack.lambda >= 0.0, "attack.lambda must be ≥ 0");
      cfg.attack.bound = a.number("bound", cfg.attack.bound);
      check(std::isfinite(cfg.attack.bound) && cfg.attack.bound > 0.0, "attack.bound must be > 0");
      cfg.attack_seed = a.seed("seed");
      if (a.has("optimizer")) cfg.attack.optimizer = detail::parse_optimizer(a.at("optimizer"), unknown);
      if (a.has("estimation")) {
        Fields e(a.at("estimation"), "attack.estimation", unknown);
        cfg.attack.estimation.clip = detail::parse_mode(e.text("clip", "auto"), e.field("clip"));
        cfg.attack.estimation.sparsify =
            detail::parse_mode(e.text("sparsify", "auto"), e.field("sparsify"));
        cfg.attack.estimation.soteria =
            detail::parse_mode(e.text("soteria", "auto"), e.field("soteria"));
      }
    }

    if (root.has("landscape")) {
      Fields l(root.at("landscape"), "landscape", unknown);
      auto& o = cfg.landscape.options;
      std::tie(o.alpha_min, o.alpha_max) = l.range("alpha", {o.alpha_min, o.alpha_max});
      std::tie(o.beta_min, o.beta_max) = l.range("beta", {o.beta_min, o.beta_max});
      o.alpha_points = l.count("alpha_points", o.alpha_points);
      o.beta_points = l.count("beta_points", o.beta_points);
      check(o.alpha_points >= 2, "landscape.alpha_points must be ≥ 2");
      check(o.beta_points >= 2, "landscape.beta_points must be ≥ 2");
      cfg.landscape.two_d = l.flag("two_d", false);
      cfg.landscape.seed = l.seed("seed");
    }
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    fail(ErrorCode::config, "unknown keys: " + list);
  }
  cfg.set_threads(cfg.threads);
  return cfg;
}

}  // namespace ggl
