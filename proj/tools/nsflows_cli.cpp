// nsflows command-line entry point.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "nsflows/config.hpp"
#include "nsflows/io.hpp"
#include "nsflows/nsflows.hpp"

namespace fs = std::filesystem;
using namespace nsflows;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  bool desk_scale = false;
  std::optional<std::size_t> jobs;
};

std::size_t resolve_jobs(const Options& o) {
  if (o.jobs) return std::max<std::size_t>(1, *o.jobs);
  if (const char* env = std::getenv("NS_FLOWS_JOBS")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    throw ConfigError("NS_FLOWS_JOBS", "expected a positive integer");
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

enum class Study { flow_compare, bootstrap, ablation, run };

Config build_config(const Options& o, Study study) {
  const ExperimentConfig base =
      study == Study::bootstrap || study == Study::ablation ? ExperimentConfig::bootstrap_defaults()
                                                            : ExperimentConfig::flow_compare_defaults();
  Config cfg = o.config_path.empty() ? parse_config(Json::object(), base) : load_config(o.config_path, base);
  if (o.desk_scale) {
    if (study == Study::flow_compare || study == Study::run) {
      cfg.experiment.n = 300;
      cfg.experiment.flow.particles = 30;
    } else {
      cfg.experiment.n_grid = {100, 400};
      cfg.experiment.replicates = 10;
    }
  }
  if (o.seed) cfg.experiment.seed = *o.seed;
  cfg.experiment.jobs = resolve_jobs(o);
  cfg.experiment.validate();
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const fs::path& dir, const Json& manifest) {
  for (const auto& [name, hash] : manifest["files"].items()) {
    std::cout << (dir / name).string() << "  " << hash.get<std::string>().substr(0, 16) << '\n';
  }
  std::cout << (dir / "manifest.json").string() << '\n';
}

int cmd_flow_compare(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Config cfg = build_config(o, Study::flow_compare);
  const FlowComparison cmp = run_experiment_1(cfg.experiment);
  OutputSet out(o.out_dir);
  out.add("experiment1_particles.csv", particles_csv(cmp));
  out.add("experiment1_w2.csv", w2_csv(cmp));
  out.add("experiment1_init.csv", init_csv(cmp.init));
  const Json manifest = out.commit("flow-compare", cfg, seconds_since(t0));
  for (const auto& m : cmp.modes) std::cout << to_string(m.mode) << "  W2 = " << m.w2 << '\n';
  report(o.out_dir, manifest);
  return 0;
}

int cmd_study(const Options& o, Study study) {
  const auto t0 = std::chrono::steady_clock::now();
  const Config cfg = build_config(o, study);
  const bool boot = study == Study::bootstrap;
  const ExperimentResult r = boot ? run_experiment_2(cfg.experiment) : run_experiment_3(cfg.experiment);
  const std::string stem = boot ? "experiment2" : "experiment3";
  OutputSet out(o.out_dir);
  out.add(stem + ".csv", replicates_csv(r));
  out.add(stem + "_bands.csv", bands_csv(r));
  const Json manifest = out.commit(boot ? "bootstrap-study" : "prior-ablation", cfg, seconds_since(t0));
  for (const auto& b : r.bands) {
    std::cout << "n=" << b.n << "  " << b.arm << "  mean " << b.band.mean << "  [" << b.band.lower << ", "
              << b.band.upper << "]\n";
  }
  report(o.out_dir, manifest);
  return 0;
}

int cmd_run(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Config cfg = build_config(o, Study::run);
  const ExperimentConfig& e = cfg.experiment;
  const GaussianMixture truth = fixtures::by_name(e.target);
  Matrix data;
  if (cfg.data) {
    data = *cfg.data;
  } else {
    Rng rng(derive_seed(e.seed, seed_tag::data));
    data = truth.sample(e.n, rng);
  }
  ParticleMeasure init;
  if (cfg.init) {
    init = *cfg.init;
  } else {
    Rng rng(derive_seed(e.seed, seed_tag::init));
    init = init_particles(e.prior, e.flow.particles, rng);
  }

  std::ostringstream particles;
  particles << "step,atom_index,x0,x1,weight\n";
  auto dump = [&](std::size_t step, const ParticleMeasure& mu) {
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      particles << step << ',' << i << ',' << format_double(mu.atoms()(0, i)) << ','
                << (mu.dim() > 1 ? format_double(mu.atoms()(1, i)) : std::string("0")) << ','
                << format_double(mu.weight(i)) << '\n';
    }
  };
  if (init.dim() != 2 || data.rows() != 2) throw ConfigError("data", "run writes two-dimensional traces");
  dump(0, init);
  Rng flow_rng(derive_seed(e.seed, seed_tag::flow));
  const FlowRun run = run_flow(data, init, e.context(), e.flow, flow_rng,
                               [&](const FlowState& s, RunRecord&) { dump(s.step, s.measure); });
  OutputSet out(o.out_dir);
  out.add("run_trace.csv", trace_csv(run));
  out.add("run_particles.csv", particles.str());
  const Json manifest = out.commit("run", cfg, seconds_since(t0));
  const auto& d = run.state.diagnostics;
  std::cout << "mode " << to_string(e.flow.mode) << "  steps " << run.state.step << "  ESS " << d.ess
            << "  underflows " << d.likelihood_underflows << "  sinkhorn non-converged " << d.sinkhorn_nonconverged
            << '/' << d.sinkhorn_solves << '\n';
  report(o.out_dir, manifest);
  return 0;
}

std::string read_target(const fs::path& dir) {
  const fs::path m = dir / "manifest.json";
  if (!fs::exists(m)) return "paw";
  std::ifstream in(m);
  const Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("config") || !j["config"].contains("target")) return "paw";
  return j["config"]["target"].get<std::string>();
}

int cmd_render(const Options& o) {
  const fs::path dir = o.out_dir;
  int written = 0;
  if (fs::exists(dir / "experiment1_particles.csv")) {
    const CsvTable t = read_csv(dir / "experiment1_particles.csv");
    const auto cm = t.column("mode"), cx = t.column("x0"), cy = t.column("x1"), cw = t.column("weight");
    std::vector<svg::Panel> panels;
    for (const std::string mode : {"fisher_rao", "newton", "wfr"}) {
      svg::Panel p;
      p.title = mode;
      for (const auto& row : t.rows) {
        if (row[cm] == mode) p.particles.push_back({parse_double(row[cx]), parse_double(row[cy]), parse_double(row[cw])});
      }
      panels.push_back(std::move(p));
    }
    write_file_atomic(dir / "experiment1_flows.svg", svg::density_panels(fixtures::by_name(read_target(dir)), panels));
    std::cout << (dir / "experiment1_flows.svg").string() << '\n';
    ++written;
  }
  for (const std::string stem : {"experiment2", "experiment3"}) {
    const fs::path path = dir / (stem + "_bands.csv");
    if (!fs::exists(path)) continue;
    const CsvTable t = read_csv(path);
    const auto cn = t.column("n"), ca = t.column("arm"), cm = t.column("mean"), cl = t.column("lower"),
               cu = t.column("upper");
    std::map<std::string, std::vector<svg::BandPoint>> series;
    for (const auto& row : t.rows) {
      series[row[ca]].push_back({parse_double(row[cn]), parse_double(row[cm]), parse_double(row[cl]), parse_double(row[cu])});
    }
    const std::string title = stem == "experiment2" ? "Truncated vs continuation" : "Prior on vs off";
    write_file_atomic(dir / (stem + "_bands.svg"), svg::band_chart(series, title));
    std::cout << (dir / (stem + "_bands.svg")).string() << '\n';
    ++written;
  }
  if (written == 0) throw InvalidArgument("render: no experiment CSVs found in " + dir.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming mixing-measure flows: Newton, Fisher-Rao and Wasserstein-Fisher-Rao"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool study) {
    sub->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
    if (!study) return;
    sub->add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Master seed (overrides the config)");
    sub->add_flag("--desk-scale", o.desk_scale, "Reduced sizes for quick runs");
    sub->add_option("--jobs", o.jobs, "Worker threads (default: NS_FLOWS_JOBS or all cores)")
        ->check(CLI::PositiveNumber);
  };
  auto* fc = app.add_subcommand("flow-compare", "Newton vs Fisher-Rao vs WFR on the paw target");
  auto* bs = app.add_subcommand("bootstrap-study", "Truncated vs continuation bootstrap streams");
  auto* pa = app.add_subcommand("prior-ablation", "Prior regularisation on vs off");
  auto* rn = app.add_subcommand("run", "Single flow from a configuration");
  auto* rd = app.add_subcommand("render", "SVG figures from existing CSVs in --out");
  for (auto* s : {fc, bs, pa, rn}) add_common(s, true);
  add_common(rd, false);

  CLI11_PARSE(app, argc, argv);
  try {
    if (fc->parsed()) return cmd_flow_compare(o);
    if (bs->parsed()) return cmd_study(o, Study::bootstrap);
    if (pa->parsed()) return cmd_study(o, Study::ablation);
    if (rn->parsed()) return cmd_run(o);
    if (rd->parsed()) return cmd_render(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
