#pragma once

// On-disk artifacts: JSON reports, CSV traces and landscapes, atomic writes.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ggl/adversary.hpp"
#include "ggl/container.hpp"
#include "ggl/metrics.hpp"

namespace ggl {

using Json = nlohmann::json;

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open " + path.string());
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline std::string read_text(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return std::string(b.begin(), b.end());
}

// Writes to a sibling temporary file and renames it over the target.
inline void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    require(static_cast<bool>(out), ErrorCode::io, "cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorCode::io, "cannot rename " + tmp.string() + ": " + ec.message());
}

inline void write_atomic(const std::filesystem::path& path, const std::string& text) {
  write_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                   text.size()));
}

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Json metrics_json(const ReconstructionMetrics& m) {
  return {{"mse_image", m.mse_image}, {"psnr", m.psnr}, {"mse_representation", m.mse_representation}};
}

inline Json estimate_json(const EstimatedTransform& e) {
  Json j;
  j["clip_detected"] = e.clip_detected;
  j["clip_active"] = e.clip_active;
  j["sparsify_detected"] = e.sparsify_detected;
  j["soteria_detected"] = e.soteria_detected;
  j["defended_layer"] = e.defended_layer;
  j["clip_bounds"] = e.clip_bounds;
  j["sparsity"] = e.sparsity;
  std::vector<bool> active(e.mask_active.begin(), e.mask_active.end());
  j["mask_active"] = active;
  return j;
}

// Wall-clock time is left out unless asked for, keeping reports
// byte-identical across runs.
inline Json report_json(const AttackReport& r, bool include_timing = false) {
  Json j;
  j["best_latent"] = r.best_latent;
  j["label"] = r.label;
  j["objective"] = r.objective;
  j["matching"] = r.matching;
  j["regularization"] = r.regularization;
  j["evaluations"] = r.evaluations;
  j["optimizer"] = r.optimizer;
  j["termination"] = r.termination;
  j["warnings"] = r.warnings;
  j["estimate"] = estimate_json(r.estimate);
  Json history = Json::array();
  for (const auto& t : r.history)
    history.push_back({{"generation", t.generation}, {"evaluations", t.evaluations},
                       {"best_value", t.best_value}, {"step", t.step}});
  j["history"] = history;
  if (r.metrics) j["metrics"] = metrics_json(*r.metrics);
  if (include_timing) j["seconds"] = r.seconds;
  return j;
}

inline std::string trace_csv(const std::vector<optim::TracePoint>& trace) {
  std::string out = "generation,evaluations,best_value,step\n";
  for (const auto& t : trace)
    out += std::to_string(t.generation) + "," + std::to_string(t.evaluations) + "," +
           format_g17(t.best_value) + "," + format_g17(t.step) + "\n";
  return out;
}

inline std::string landscape_csv(const std::vector<LandscapeSample>& samples, bool two_d) {
  const bool aux = !samples.empty() && samples.front().aux.has_value();
  std::string out = two_d ? "alpha,beta,loss" : "alpha,loss";
  if (aux) out += ",aux";
  out += "\n";
  for (const auto& s : samples) {
    out += format_g17(s.alpha);
    if (two_d) out += "," + format_g17(s.beta);
    out += "," + format_g17(s.loss);
    if (aux) out += "," + format_g17(s.aux.value_or(0.0));
    out += "\n";
  }
  return out;
}

// A latent file is either a JSON array or an object with a "best_latent"
// (attack report) or "latent" member.
inline std::vector<double> parse_latent(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::invalid_argument, std::string("latent file is not valid JSON: ") + e.what());
  }
  if (j.is_object()) {
    if (j.contains("best_latent")) j = j.at("best_latent");
    else if (j.contains("latent")) j = j.at("latent");
  }
  require(j.is_array() && !j.empty(), ErrorCode::invalid_argument,
          "latent file must hold a non-empty array of numbers");
  std::vector<double> z;
  for (const auto& v : j) {
    require(v.is_number(), ErrorCode::invalid_argument, "latent entries must be numbers");
    z.push_back(v.get<double>());
  }
  return z;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace ggl
