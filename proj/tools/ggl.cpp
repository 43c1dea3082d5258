// Command-line runner: client, attack, eval, landscape, gen, selftest.
//
// Exit codes: 0 success, 1 validation error (bad flags, config, shapes,
// model mismatch), 2 runtime error (I/O, corrupt files, numerical failure).

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ggl/ggl.hpp"

namespace fs = std::filesystem;
using namespace ggl;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 0;
};

struct Loaded {
  ExperimentConfig cfg;
  fs::path base;
  fs::path out;
};

Loaded load(const Common& c) {
  Loaded l;
  if (!c.config.empty()) {
    l.cfg = parse_config(read_text(c.config));
    l.base = fs::path(c.config).parent_path();
  } else {
    l.cfg = parse_config(R"({"model": {}, "generator": {}})");
  }
  if (c.seed) l.cfg.seed = *c.seed;
  if (c.threads > 0) l.cfg.set_threads(c.threads);
  l.out = c.out.empty() ? resolve_path(l.base, l.cfg.output_dir) : fs::path(c.out);
  return l;
}

void add_common(CLI::App* app, Common& c, bool need_config) {
  auto* opt = app->add_option("--config", c.config, "experiment config (JSON)");
  if (need_config) opt->required();
  app->add_option("--seed", c.seed, "global seed (overrides config)");
  app->add_option("--out", c.out, "output directory (overrides config)");
  app->add_option("--threads", c.threads, "worker threads for batch evaluation");
}

int run_client(const Common& c, const std::string& image_path, std::optional<std::size_t> label_flag) {
  const Loaded l = load(c);
  const Network net = build_network(l.cfg, l.base);
  Tensor x;
  const std::string img = !image_path.empty() ? image_path : l.cfg.client.image;
  if (!img.empty()) {
    x = load_image(image_path.empty() ? resolve_path(l.base, img) : fs::path(img), net.input_shape());
  } else {
    // No private image given: draw an in-range target from the generator.
    const Generator gen = build_generator(l.cfg, l.base);
    RandomSource zr(split_seed(l.cfg.seed, 6));
    std::vector<double> z(gen.latent_dim);
    for (double& v : z) v = zr.normal();
    x = generate(gen, z).reshaped(net.input_shape());
    write_atomic(l.out / "target_latent.json", dump(Json{{"latent", z}}));
  }
  const std::size_t label = label_flag ? *label_flag
                            : l.cfg.client.label
                                ? *l.cfg.client.label
                                : RandomSource(split_seed(l.cfg.seed, 7)).uniform_index(net.class_count());
  require(label < net.class_count(), ErrorCode::invalid_argument,
          "client.label must be < " + std::to_string(net.class_count()));
  const SharedGradients share = produce_share(net, x, label, resolved_defense(l.cfg));
  write_atomic(l.out / "share.gglg", encode_share(share));
  write_atomic(l.out / "target.pgm", encode_image(x.shape().size() == 3 ? x : x.reshaped({1, x.size(), 1})));
  std::cout << "share written to " << (l.out / "share.gglg").string() << " (label " << label
            << ", model " << share.model_id << ")\n";
  return 0;
}

int run_attack(const Common& c, const std::string& share_path, const std::string& target_path,
               bool timing) {
  const Loaded l = load(c);
  const Network net = build_network(l.cfg, l.base);
  const Generator gen = build_generator(l.cfg, l.base);
  const SharedGradients share = decode_share(read_file(share_path));
  RandomSource rng(l.cfg.resolved_attack_seed());
  AttackReport report = attack(share, gen, net, l.cfg.attack, rng);
  const Tensor recon = report.image.reshaped(net.input_shape());
  if (!target_path.empty()) {
    const Tensor target = load_image(target_path, net.input_shape());
    report.metrics = ReconstructionMetrics{mse_image(target, recon), psnr(target, recon),
                                           mse_representation(net, target, recon)};
  }
  write_atomic(l.out / "report.json", dump(report_json(report, timing)));
  write_atomic(l.out / "reconstruction.pgm", encode_image(recon));
  write_atomic(l.out / "trace.csv", trace_csv(report.history));
  std::cout << "objective " << format_g17(report.objective) << " after " << report.evaluations
            << " evaluations (" << report.termination << ")";
  if (report.metrics) std::cout << ", PSNR " << report.metrics->psnr << " dB";
  std::cout << "\n";
  return 0;
}

int run_eval(const Common& c, const std::string& a_path, const std::string& b_path) {
  const Tensor a = decode_image(read_file(a_path));
  const Tensor b = decode_image(read_file(b_path));
  require(a.shape() == b.shape(), ErrorCode::shape_mismatch,
          "shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Json j{{"mse_image", mse_image(a, b)}, {"psnr", psnr(a, b)}};
  fs::path out = c.out.empty() ? fs::path("out") : fs::path(c.out);
  if (!c.config.empty()) {
    const Loaded l = load(c);
    out = l.out;
    const Network net = build_network(l.cfg, l.base);
    j["mse_representation"] =
        mse_representation(net, a.reshaped(net.input_shape()), b.reshaped(net.input_shape()));
  }
  write_atomic(out / "metrics.json", dump(j));
  std::cout << j.dump() << "\n";
  return 0;
}

int run_landscape(const Common& c, const std::string& share_path, const std::string& z1_path,
                  const std::string& z2_path, bool two_d_flag, const std::string& target_path) {
  const Loaded l = load(c);
  const Network net = build_network(l.cfg, l.base);
  const Generator gen = build_generator(l.cfg, l.base);
  const SharedGradients share = decode_share(read_file(share_path));
  require(share.model_id == model_id(net), ErrorCode::model_mismatch,
          "model mismatch: share was produced by " + share.model_id);
  const std::vector<double> z1 = parse_latent(read_text(z1_path));
  const std::vector<double> z2 = parse_latent(read_text(z2_path));
  require(z1.size() == gen.latent_dim && z2.size() == gen.latent_dim, ErrorCode::shape_mismatch,
          "dimension mismatch: latents must have " + std::to_string(gen.latent_dim) + " entries");
  const AttackObjective objective(share, net, gen, infer_label(share),
                                  estimate_transform(share, l.cfg.attack.estimation), l.cfg.attack);
  const LatentFn f = [&](std::span<const double> z) { return objective(z); };
  LatentFn aux;
  Tensor target;
  if (!target_path.empty()) {
    target = load_image(target_path, net.input_shape());
    aux = [&](std::span<const double> z) { return psnr(target, generate(gen, z).reshaped(net.input_shape())); };
  }
  const bool two_d = two_d_flag || l.cfg.landscape.two_d;
  std::vector<LandscapeSample> samples;
  if (two_d) {
    RandomSource rng(l.cfg.landscape_seed());
    std::vector<double> eta(gen.latent_dim);
    for (double& v : eta) v = rng.normal();
    samples = landscape_2d(f, z1, z2, eta, l.cfg.landscape.options, aux);
  } else {
    samples = landscape_1d(f, z1, z2, l.cfg.landscape.options, aux);
  }
  write_atomic(l.out / "landscape.csv", landscape_csv(samples, two_d));
  std::cout << samples.size() << " landscape samples written\n";
  return 0;
}

int run_gen(const Common& c, const std::string& latent_path) {
  const Loaded l = load(c);
  const Generator gen = build_generator(l.cfg, l.base);
  std::vector<double> z;
  if (!latent_path.empty()) {
    z = parse_latent(read_text(latent_path));
  } else {
    RandomSource rng(split_seed(l.cfg.seed, 6));
    z.resize(gen.latent_dim);
    for (double& v : z) v = rng.normal();
  }
  const Tensor image = generate(gen, z);
  write_atomic(l.out / "generated.pgm", encode_image(image));
  write_atomic(l.out / "latent.json", dump(Json{{"latent", z}}));
  write_atomic(l.out / "generator.gglw", save_generator(gen));
  std::cout << "image written to " << (l.out / "generated.pgm").string() << "\n";
  return 0;
}

int selftest_command(const Common& c) {
  const std::uint64_t seed = c.seed.value_or(0);
  const auto checks = run_selftest(seed);
  Json j = Json::array();
  bool all = true;
  for (const auto& ch : checks) {
    all = all && ch.passed;
    j.push_back(Json{{"name", ch.name}, {"passed", ch.passed}, {"detail", ch.detail}});
    std::cout << (ch.passed ? "PASS " : "FAIL ") << ch.name << ": " << ch.detail << "\n";
  }
  if (!c.out.empty()) write_atomic(fs::path(c.out) / "selftest.json", dump(Json{{"checks", j}}));
  return all ? 0 : 2;
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::config:
    case ErrorCode::invalid_argument:
    case ErrorCode::shape_mismatch:
    case ErrorCode::model_mismatch:
      return 1;
    default:
      return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient leakage auditing toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string image, share, target, a, b, z1, z2, latent;
  std::optional<std::size_t> label;
  bool timing = false, two_d = false;

  auto* client = app.add_subcommand("client", "compute a defended gradient share");
  add_common(client, common, true);
  client->add_option("--image", image, "private image (PGM/PPM)");
  client->add_option("--label", label, "class label");

  auto* att = app.add_subcommand("attack", "reconstruct the input behind a share");
  add_common(att, common, true);
  att->add_option("--share", share, "gradient share (GGLG)")->required();
  att->add_option("--target", target, "ground-truth image for metrics");
  att->add_flag("--timing", timing, "include wall-clock seconds in the report");

  auto* ev = app.add_subcommand("eval", "compare two images");
  add_common(ev, common, false);
  ev->add_option("a", a, "first image")->required();
  ev->add_option("b", b, "second image")->required();

  auto* land = app.add_subcommand("landscape", "sample the attack loss between two latents");
  add_common(land, common, true);
  land->add_option("--share", share, "gradient share (GGLG)")->required();
  land->add_option("--z1", z1, "first latent (JSON)")->required();
  land->add_option("--z2", z2, "second latent (JSON)")->required();
  land->add_option("--target", target, "ground-truth image; adds a PSNR column");
  land->add_flag("--two-d", two_d, "sample a 2-D grid");

  auto* gen = app.add_subcommand("gen", "render a generator output");
  add_common(gen, common, false);
  gen->add_option("--latent", latent, "latent (JSON); drawn from the seed when omitted");

  auto* self = app.add_subcommand("selftest", "run built-in numerical checks");
  add_common(self, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (client->parsed()) return run_client(common, image, label);
    if (att->parsed()) return run_attack(common, share, target, timing);
    if (ev->parsed()) return run_eval(common, a, b);
    if (land->parsed()) return run_landscape(common, share, z1, z2, two_d, target);
    if (gen->parsed()) return run_gen(common, latent);
    if (self->parsed()) return selftest_command(common);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
