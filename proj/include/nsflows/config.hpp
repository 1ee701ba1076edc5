#pragma once

// JSON configuration: strict parsing (unknown keys are errors), defaults for
// every omitted key, and a serialiser whose output parses back to the same
// configuration.

#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "nsflows/eval.hpp"

namespace nsflows {

using Json = nlohmann::ordered_json;

/// Everything a subcommand needs. `data` and `init` are only read by `run`.
struct Config {
  ExperimentConfig experiment;
  std::optional<Matrix> data;
  std::optional<ParticleMeasure> init;
};

namespace config_detail {

class Reader {
 public:
  Reader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  void check_unknown(const std::set<std::string>& known) const {
    for (const auto& [key, value] : obj_.items()) {
      (void)value;
      if (!known.contains(key)) throw ConfigError(field(key), "unknown field");
    }
  }

  [[nodiscard]] bool has(const std::string& key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }

  [[nodiscard]] Reader child(const std::string& key) const { return Reader(obj_.at(key), field(key)); }

  [[nodiscard]] const Json& raw(const std::string& key) const { return obj_.at(key); }

  void number(const std::string& key, double& out) const {
    if (!has(key)) return;
    const Json& v = obj_.at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    out = v.get<double>();
  }

  template <typename T>
  void count(const std::string& key, T& out) const {
    if (!has(key)) return;
    const Json& v = obj_.at(key);
    if (v.is_number_unsigned()) {
      out = static_cast<T>(v.get<std::uint64_t>());
      return;
    }
    if (v.is_number_integer()) throw ConfigError(field(key), "must be non-negative");
    throw ConfigError(field(key), "expected a non-negative integer");
  }

  void flag(const std::string& key, bool& out) const {
    if (!has(key)) return;
    const Json& v = obj_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    out = v.get<bool>();
  }

  void text(const std::string& key, std::string& out) const {
    if (!has(key)) return;
    const Json& v = obj_.at(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    out = v.get<std::string>();
  }

  [[nodiscard]] std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const Json& obj_;
  std::string path_;
};

inline Vector read_vector(const Json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) throw ConfigError(field, "expected a non-empty array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(field, "expected a non-empty array of numbers");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

/// Array of rows -> matrix with one row per entry.
inline Matrix read_rows(const Json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) throw ConfigError(field, "expected a non-empty array of rows");
  const Vector first = read_vector(v[0], field);
  Matrix out(static_cast<Eigen::Index>(v.size()), first.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vector row = read_vector(v[i], field);
    if (row.size() != first.size()) throw ConfigError(field, "rows have different lengths");
    out.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return out;
}

inline Json write_vector(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Json write_rows(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(write_vector(m.row(r).transpose()));
  return out;
}

inline void read_flow(const Reader& r, FlowConfig& f) {
  r.check_unknown({"mode", "alpha_schedule", "dt", "tau", "lambda", "lambda_schedule", "prior_drift_weight", "M", "N",
                   "resample", "diffusion", "warm_start", "freeze_prior_draws", "reaction_cap", "drift_taming"});
  if (r.has("mode")) {
    std::string m;
    r.text("mode", m);
    f.mode = flow_mode_from_string(m);
  }
  if (r.has("alpha_schedule")) {
    const Reader a = r.child("alpha_schedule");
    a.check_unknown({"kind", "gamma"});
    std::string kind = f.alpha_schedule.kind == AlphaSchedule::Kind::harmonic ? "harmonic" : "power";
    a.text("kind", kind);
    if (kind == "harmonic") {
      f.alpha_schedule = AlphaSchedule::harmonic();
    } else if (kind == "power") {
      double g = f.alpha_schedule.gamma;
      a.number("gamma", g);
      f.alpha_schedule = AlphaSchedule::power(g);
    } else {
      throw ConfigError(a.field("kind"), "expected harmonic or power");
    }
    if (kind == "harmonic" && a.has("gamma")) throw ConfigError(a.field("gamma"), "only valid for the power schedule");
  }
  if (r.has("dt")) {
    double dt = 0.0;
    r.number("dt", dt);
    f.dt = dt;
  }
  r.number("tau", f.tau);
  r.number("lambda", f.lambda0);
  if (r.has("lambda_schedule")) {
    const Reader l = r.child("lambda_schedule");
    l.check_unknown({"kind", "c"});
    std::string kind = f.lambda_schedule.kind == LambdaSchedule::Kind::constant ? "constant" : "log_anneal";
    l.text("kind", kind);
    if (kind == "constant") {
      f.lambda_schedule = LambdaSchedule::constant();
      if (l.has("c")) throw ConfigError(l.field("c"), "only valid for the log_anneal schedule");
    } else if (kind == "log_anneal") {
      double c = f.lambda_schedule.c;
      l.number("c", c);
      f.lambda_schedule = LambdaSchedule::log_anneal(c);
    } else {
      throw ConfigError(l.field("kind"), "expected constant or log_anneal");
    }
  }
  r.number("prior_drift_weight", f.prior_drift_weight);
  r.count("M", f.prior_draws);
  r.count("N", f.particles);
  r.flag("resample", f.resample);
  r.flag("diffusion", f.diffusion);
  r.flag("warm_start", f.warm_start);
  r.flag("freeze_prior_draws", f.freeze_prior_draws);
  r.number("reaction_cap", f.reaction_cap);
  r.flag("drift_taming", f.drift_taming);
}

inline Json write_flow(const FlowConfig& f) {
  Json j;
  j["mode"] = to_string(f.mode);
  if (f.alpha_schedule.kind == AlphaSchedule::Kind::harmonic) {
    j["alpha_schedule"] = {{"kind", "harmonic"}};
  } else {
    j["alpha_schedule"] = {{"kind", "power"}, {"gamma", f.alpha_schedule.gamma}};
  }
  j["dt"] = f.dt ? Json(*f.dt) : Json(nullptr);
  j["tau"] = f.tau;
  j["lambda"] = f.lambda0;
  if (f.lambda_schedule.kind == LambdaSchedule::Kind::constant) {
    j["lambda_schedule"] = {{"kind", "constant"}};
  } else {
    j["lambda_schedule"] = {{"kind", "log_anneal"}, {"c", f.lambda_schedule.c}};
  }
  j["prior_drift_weight"] = f.prior_drift_weight;
  j["M"] = f.prior_draws;
  j["N"] = f.particles;
  j["resample"] = f.resample;
  j["diffusion"] = f.diffusion;
  j["warm_start"] = f.warm_start;
  j["freeze_prior_draws"] = f.freeze_prior_draws;
  j["reaction_cap"] = f.reaction_cap;
  j["drift_taming"] = f.drift_taming;
  return j;
}

}  // namespace config_detail

/// Parses a configuration object on top of `base`. Omitted keys keep the
/// base value; the result is validated.
[[nodiscard]] inline Config parse_config(const Json& j, const ExperimentConfig& base = ExperimentConfig::flow_compare_defaults()) {
  using config_detail::Reader;
  Config cfg;
  cfg.experiment = base;
  ExperimentConfig& e = cfg.experiment;
  const Reader r(j, "");
  r.check_unknown({"seed", "target", "n", "n_grid", "replicates", "n_ref", "support_cap", "band_level", "kernel", "prior",
                   "flow", "sinkhorn", "data", "init"});
  r.count("seed", e.seed);
  r.text("target", e.target);
  r.count("n", e.n);
  if (r.has("n_grid")) {
    const Json& g = r.raw("n_grid");
    if (!g.is_array() || g.empty()) throw ConfigError("n_grid", "expected a non-empty array of counts");
    e.n_grid.clear();
    for (const auto& v : g) {
      if (!v.is_number_unsigned()) throw ConfigError("n_grid", "expected a non-empty array of counts");
      e.n_grid.push_back(v.get<std::size_t>());
    }
  }
  r.count("replicates", e.replicates);
  r.count("n_ref", e.n_ref);
  r.count("support_cap", e.support_cap);
  r.number("band_level", e.band_level);
  if (r.has("kernel")) {
    const Reader k = r.child("kernel");
    k.check_unknown({"bandwidth"});
    k.number("bandwidth", e.bandwidth);
  }
  if (r.has("prior")) {
    const Reader p = r.child("prior");
    p.check_unknown({"discount", "concentration", "base_mean", "base_cov", "truncation"});
    p.number("discount", e.prior.discount);
    p.number("concentration", e.prior.concentration);
    if (p.has("base_mean")) e.prior.base_mean = config_detail::read_vector(p.raw("base_mean"), "prior.base_mean");
    if (p.has("base_cov")) e.prior.base_cov = config_detail::read_rows(p.raw("base_cov"), "prior.base_cov");
    p.count("truncation", e.prior.truncation);
  }
  if (r.has("flow")) config_detail::read_flow(r.child("flow"), e.flow);
  if (r.has("sinkhorn")) {
    const Reader s = r.child("sinkhorn");
    s.check_unknown({"epsilon", "max_iters", "tol"});
    s.number("epsilon", e.flow.sinkhorn.epsilon);
    s.count("max_iters", e.flow.sinkhorn.max_iters);
    s.number("tol", e.flow.sinkhorn.tol);
  }
  if (r.has("data")) cfg.data = config_detail::read_rows(r.raw("data"), "data").transpose();
  if (r.has("init")) {
    const Reader in = r.child("init");
    in.check_unknown({"atoms", "weights"});
    if (!in.has("atoms")) throw ConfigError("init.atoms", "required when init is given");
    Matrix atoms = config_detail::read_rows(in.raw("atoms"), "init.atoms").transpose();
    Vector w = in.has("weights") ? config_detail::read_vector(in.raw("weights"), "init.weights")
                                 : Vector::Constant(atoms.cols(), 1.0 / static_cast<double>(atoms.cols()));
    if (w.size() != atoms.cols()) throw ConfigError("init.weights", "length does not match init.atoms");
    try {
      cfg.init = ParticleMeasure(std::move(atoms), std::move(w));
    } catch (const Error& ex) {
      throw ConfigError("init", ex.what());
    }
  }
  e.validate();
  if (cfg.data && cfg.data->rows() != e.prior.dim()) throw ConfigError("data", "rows must match the prior dimension");
  if (cfg.init && cfg.init->dim() != e.prior.dim()) throw ConfigError("init.atoms", "must match the prior dimension");
  return cfg;
}

/// Full configuration with every key spelled out.
[[nodiscard]] inline Json serialise_config(const Config& cfg) {
  const ExperimentConfig& e = cfg.experiment;
  Json j;
  j["seed"] = e.seed;
  j["target"] = e.target;
  j["n"] = e.n;
  j["n_grid"] = e.n_grid;
  j["replicates"] = e.replicates;
  j["n_ref"] = e.n_ref;
  j["support_cap"] = e.support_cap;
  j["band_level"] = e.band_level;
  j["kernel"] = {{"bandwidth", e.bandwidth}};
  j["prior"] = {{"discount", e.prior.discount},
                {"concentration", e.prior.concentration},
                {"base_mean", config_detail::write_vector(e.prior.base_mean)},
                {"base_cov", config_detail::write_rows(e.prior.base_cov)},
                {"truncation", e.prior.truncation}};
  j["flow"] = config_detail::write_flow(e.flow);
  j["sinkhorn"] = {{"epsilon", e.flow.sinkhorn.epsilon}, {"max_iters", e.flow.sinkhorn.max_iters}, {"tol", e.flow.sinkhorn.tol}};
  if (cfg.data) j["data"] = config_detail::write_rows(cfg.data->transpose());
  if (cfg.init) {
    j["init"] = {{"atoms", config_detail::write_rows(cfg.init->atoms().transpose())},
                 {"weights", config_detail::write_vector(cfg.init->weights())}};
  }
  return j;
}

[[nodiscard]] inline Json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& ex) {
    throw ConfigError(origin, std::string("invalid JSON: ") + ex.what());
  }
}

/// Reads and parses a JSON file.
[[nodiscard]] inline Config load_config(const std::string& path,
                                        const ExperimentConfig& base = ExperimentConfig::flow_compare_defaults()) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open configuration file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(parse_json_text(ss.str(), path), base);
}

}  // namespace nsflows
