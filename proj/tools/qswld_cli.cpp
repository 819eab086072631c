#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qswld/qswld.hpp"

namespace {

using namespace qswld;

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct RunConfig {
  std::string input;
  double damping = kDefaultDamping;
  double coherent_weight = 1.0;
  double s_min = -3.0;
  double s_max = 3.0;
  std::size_t s_steps = 61;
  double fd_step = kDefaultFdStep;
  double t_max = 200.0;
  double dt = kDefaultTrajectoryDt;
  std::size_t n_traj = 1000;
  std::uint64_t seed = 0;
  std::string output;
  std::string summary;
  std::string event_log;
  std::string initial = "uniform";
  LimitMode limit_mode = LimitMode::none;
};

// Thrown for bad invocations that CLI11 cannot catch itself (unreadable files).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

DirectedGraph load(const RunConfig& cfg) {
  std::ifstream in(cfg.input);
  if (!in) throw UsageError("cannot open input file '" + cfg.input + "'");
  return parse_edge_list(in);
}

QswModel load_model(const RunConfig& cfg) { return build_qsw(load(cfg), cfg.damping, cfg.coherent_weight); }

// Writes to --output when given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path.empty()) return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw UsageError("cannot open output file '" + path + "'");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void cmd_pagerank(const RunConfig& cfg) {
  const auto pi = pagerank(google_matrix(load(cfg), cfg.damping));
  Sink sink(cfg.output);
  auto& os = sink.stream();
  os << "node,score\n";
  for (std::size_t i = 0; i < pi.size(); ++i) os << i << ',' << csv::number(pi[i]) << '\n';
}

void cmd_ranks(const RunConfig& cfg) {
  const auto model = load_model(cfg);
  const auto pi = pagerank(model.google());
  const auto rho = steady_state(model);
  const auto alpha = activity(model, TiltVector::zero(model.size()), cfg.fd_step);
  const RealVector pop = rho.populations();
  Sink sink(cfg.output);
  auto& os = sink.stream();
  os << "node,pagerank,activity0,population\n";
  for (std::size_t i = 0; i < model.size(); ++i) {
    os << i << ',' << csv::number(pi[i]) << ',' << csv::number(alpha[i]) << ','
       << csv::number(pop(static_cast<Eigen::Index>(i))) << '\n';
  }
}

void cmd_scan(const RunConfig& cfg) {
  const auto model = load_model(cfg);
  const auto points = scan(model, uniform_grid(model.size(), cfg.s_min, cfg.s_max, cfg.s_steps), cfg.fd_step,
                           cfg.limit_mode);
  Sink sink(cfg.output);
  write_scan_csv(sink.stream(), points, model.size());

  const auto cross = locate_crossover(points);
  std::ofstream summary_file;
  if (!cfg.summary.empty()) {
    summary_file.open(cfg.summary);
    if (!summary_file) throw UsageError("cannot open summary file '" + cfg.summary + "'");
  }
  std::ostream& sum = cfg.summary.empty() ? std::cerr : summary_file;
  sum << "argmax_index,argmax_s,max_delta_global,interior\n";
  if (cross.argmax) {
    sum << *cross.argmax << ',' << csv::number(points[*cross.argmax].s[0]) << ','
        << csv::number(cross.max_delta_global) << ',' << (cross.interior ? "true" : "false") << '\n';
  } else {
    sum << ",,,false\n";
  }
}

void cmd_simulate(const RunConfig& cfg) {
  const auto model = load_model(cfg);
  const std::size_t n = model.size();
  const InitialCondition ic =
      cfg.initial == "uniform" ? InitialCondition::uniform(n) : InitialCondition::steady(model);
  const auto zero = TiltVector::zero(n);
  const auto alpha = activity(model, zero, cfg.fd_step);
  const auto disp = dispersion(model, zero, cfg.fd_step);

  if (!cfg.event_log.empty()) {
    Philox4x32 rng(cfg.seed, 0);
    const ComplexVector psi0 = ic.draw(rng);
    const auto rec = simulate(model, psi0, cfg.t_max, cfg.dt, cfg.seed, 0);
    std::ofstream log(cfg.event_log);
    if (!log) throw UsageError("cannot open event log '" + cfg.event_log + "'");
    write_events_csv(log, rec);
  }

  // A single trajectory has no sample variance: rate only, the rest blank.
  std::optional<EnsembleStats> stats;
  std::vector<double> single_rate;
  if (cfg.n_traj >= 2) {
    stats = ensemble_stats(model, ic, cfg.t_max, cfg.dt, cfg.n_traj, cfg.seed);
  } else {
    Philox4x32 rng(cfg.seed, 0);
    const ComplexVector psi0 = ic.draw(rng);
    SimulationOptions opts;
    opts.record_events = false;
    const auto rec = simulate(model, psi0, cfg.t_max, cfg.dt, cfg.seed, 0, opts);
    for (auto c : rec.counts) single_rate.push_back(static_cast<double>(c) / cfg.t_max);
  }

  Sink sink(cfg.output);
  auto& os = sink.stream();
  os << "node,mean_rate,rate_se,activity0,rate_z,var_rate,dispersion_hat,dispersion_se,dispersion0,dispersion_z\n";
  const auto num = [](double x) { return std::isfinite(x) ? csv::number(x) : std::string(); };
  for (std::size_t i = 0; i < n; ++i) {
    const std::string d0 = disp.delta[i] ? csv::number(*disp.delta[i]) : std::string();
    if (!stats) {
      os << i << ',' << csv::number(single_rate[i]) << ",," << csv::number(alpha[i]) << ",,,,," << d0 << ",\n";
      continue;
    }
    const double se = stats->standard_errors[i];
    const double dse = stats->dispersion_standard_errors[i];
    const double rate_z = (stats->mean_rate[i] - alpha[i]) / se;
    const double disp_z = disp.delta[i] ? (stats->dispersion_hat[i] - *disp.delta[i]) / dse : std::nan("");
    os << i << ',' << csv::number(stats->mean_rate[i]) << ',' << num(se) << ',' << csv::number(alpha[i]) << ','
       << num(rate_z) << ',' << csv::number(stats->var_rate[i]) << ',' << csv::number(stats->dispersion_hat[i]) << ','
       << num(dse) << ',' << d0 << ',' << num(disp_z) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Large-deviation thermodynamics of dissipative quantum walks on directed graphs"};
  app.require_subcommand(1);
  RunConfig cfg;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--input", cfg.input, "Edge-list file")->required();
    sub->add_option("--damping", cfg.damping, "Google damping factor in (0, 1]")->capture_default_str();
    sub->add_option("--output", cfg.output, "Output CSV path (default stdout)");
  };
  const auto add_model = [&](CLI::App* sub) {
    sub->add_option("--coherent-weight", cfg.coherent_weight, "Weight of the coherent part")->capture_default_str();
    sub->add_option("--fd-step", cfg.fd_step, "Finite-difference step for derivatives of theta")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  };

  auto* pr = app.add_subcommand("pagerank", "Classical pagerank of the graph");
  add_common(pr);

  auto* ranks = app.add_subcommand("ranks", "Pagerank, activity at s=0 and steady-state populations");
  add_common(ranks);
  add_model(ranks);

  auto* sc = app.add_subcommand("scan", "Thermodynamic scan over a uniform tilt grid");
  add_common(sc);
  add_model(sc);
  sc->add_option("--s-min", cfg.s_min)->capture_default_str();
  sc->add_option("--s-max", cfg.s_max)->capture_default_str();
  sc->add_option("--s-steps", cfg.s_steps)->capture_default_str()->check(CLI::PositiveNumber);
  const std::map<std::string, LimitMode> modes{
      {"none", LimitMode::none}, {"inactive", LimitMode::inactive}, {"active", LimitMode::active}};
  sc->add_option("--limit-mode", cfg.limit_mode, "Limit generator: none, inactive or active")
      ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case));
  sc->add_option("--summary", cfg.summary, "Crossover summary CSV path (default stderr)");

  auto* sim = app.add_subcommand("simulate", "Quantum-jump ensemble statistics compared with s=0 predictions");
  add_common(sim);
  add_model(sim);
  sim->add_option("--t-max", cfg.t_max)->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--dt", cfg.dt)->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--n-traj", cfg.n_traj)->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--seed", cfg.seed)->capture_default_str();
  sim->add_option("--initial", cfg.initial, "Initial state: uniform superposition or steady-state ensemble")
      ->capture_default_str()
      ->check(CLI::IsMember({"steady", "uniform"}));
  sim->add_option("--event-log", cfg.event_log, "Write the jump events of trajectory 0 to this CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (pr->parsed()) cmd_pagerank(cfg);
    if (ranks->parsed()) cmd_ranks(cfg);
    if (sc->parsed()) cmd_scan(cfg);
    if (sim->parsed()) cmd_simulate(cfg);
  } catch (const NumericalError& e) {
    std::cerr << "qswld: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "qswld: " << e.what() << '\n';
    return kExitUsage;
  }
  return 0;
}
