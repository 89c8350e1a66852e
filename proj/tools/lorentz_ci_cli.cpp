// Batch driver: corrugate | search | rigidity | modulus.
//
// Exit status: 0 all thresholds met, 1 a threshold missed (artifacts are still
// written and the report says so), 2 an error (only error.json is written).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lorentz_ci.hpp"

using namespace lorentz_ci;
using json = nlohmann::ordered_json;

namespace {

struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;
  void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
};

json config_json(const RunConfig& cfg) {
  json j;
  for (const auto& [k, v] : describe(cfg)) j[k] = v;
  return j;
}

std::string format_w(cplx w) {
  char buf[64];
  if (std::abs(w.real()) < 5e-13 * std::max(1.0, std::abs(w.imag()))) {
    std::snprintf(buf, sizeof buf, "%.12gi", w.imag());
  } else {
    std::snprintf(buf, sizeof buf, "%.12g%+.12gi", w.real(), w.imag());
  }
  return buf;
}

ScalarField eta_field(const RunConfig& cfg, const PeriodicGrid& grid) {
  if (cfg.eta_modulation == 0.0) return ScalarField(grid, cfg.eta);
  return ScalarField::from_function(grid, [&](double, double y) {
    return cfg.eta * (1.0 + cfg.eta_modulation * std::sin(2 * M_PI * y));
  });
}

bool run_corrugate(const RunConfig& cfg, Artifacts& out, json& report) {
  const PeriodicGrid grid(cfg.grid_n);
  const Immersion f = Immersion::flat_plane(grid);
  const ScalarField eta = eta_field(cfg, grid);
  const LinearFormZ form(1, 0);
  bool ok = true;
  std::ostringstream csv;
  csv << "n_corr,c0_error,target_diff,min_eigenvalue\n";
  json rows = json::array();

  auto record = [&](int n, const Immersion& F, double err, double tdc) {
    const MetricField g = pullback(F);
    const double lam = g.min_eigenvalue();
    csv << n << ',' << detail::fmt17(err) << ',' << detail::fmt17(tdc) << ',' << detail::fmt17(lam) << '\n';
    rows.push_back({{"n_corr", n}, {"c0_error", err}, {"target_diff", tdc}, {"min_eigenvalue", lam}});
    ok = ok && tdc <= 1e-8 && lam > 0.0;
    std::ostringstream obj;
    write_obj(obj, F);
    out.add("mesh_N" + std::to_string(n) + ".obj", obj.str());
  };

  if (cfg.n_policy.empty()) {
    Decomposition dec{{DecompositionTerm{form, eta}}};
    const PipelineResult r = run_pipeline(f, dec, NPolicy::automatic(cfg.epsilon));
    const CorrugationStep step(form, eta, r.n_corr.at(0));
    record(r.n_corr.at(0), r.immersion, c0_distance(pullback(r.immersion), target_metric(f, step)),
           target_differential_check(f, step));
    ok = ok && r.log.at(0).c0_error <= cfg.epsilon;
  } else {
    std::vector<double> logn, loge;
    for (int n : cfg.n_policy) {
      const CorrugationStep step(form, eta, n);
      const Immersion F = corrugate_once(f, step);
      const double err = c0_distance(pullback(F), target_metric(f, step));
      record(n, F, err, target_differential_check(f, step));
      if (err > 0.0) logn.push_back(std::log(n)), loge.push_back(std::log(err));
    }
    if (logn.size() >= 2 && logn.size() == cfg.n_policy.size()) {
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < logn.size(); ++i) mx += logn[i], my += loge[i];
      mx /= logn.size(), my /= logn.size();
      double sxy = 0, sxx = 0;
      for (std::size_t i = 0; i < logn.size(); ++i) sxy += (logn[i] - mx) * (loge[i] - my), sxx += (logn[i] - mx) * (logn[i] - mx);
      report["slope"] = sxy / sxx;
    }
  }
  out.add("errors.csv", csv.str());
  report["runs"] = rows;
  return ok;
}

bool run_search(const RunConfig& cfg, Artifacts& out, json& report) {
  const PeriodicGrid grid(cfg.grid_n);
  SearchConfig sc;
  sc.rho = cfg.rho;
  sc.epsilon = cfg.epsilon;
  if (!cfg.n_policy.empty()) {
    if (cfg.n_policy.size() != default_dictionary().size()) {
      throw Error(ErrorCode::ConfigError, "key 'n_policy': search needs 'auto' or one number per dictionary form (" +
                                              std::to_string(default_dictionary().size()) + ")");
    }
    sc.n_corr = cfg.n_policy;
  }
  SearchResult r;
  std::vector<SearchTraceRow> trace;
  try {
    r = conformal_search(Immersion::flat_plane(grid), UHPoint(cfg.w0), sc);
    trace = r.trace;
  } catch (const SearchFailure& e) {
    std::ostringstream csv;
    write_search_trace_csv(csv, e.trace());
    out.add("trace.csv", csv.str());
    throw;
  }
  std::ostringstream csv;
  write_search_trace_csv(csv, trace);
  out.add("trace.csv", csv.str());
  std::ostringstream obj;
  write_obj(obj, *r.immersion);
  out.add("final.obj", obj.str());
  bool dil_ok = true;
  for (const auto& row : trace) {
    if (std::isfinite(row.hyp_dist) && !(row.modulus_shift <= row.dil_bound + 1e-3)) dil_ok = false;
  }
  report["w_star"] = {r.w_star.re(), r.w_star.im()};
  report["G_w_star"] = {r.g_star.re(), r.g_star.im()};
  report["hyp_distance"] = r.distance;
  report["delta"] = r.delta;
  report["n_corr"] = r.n_corr;
  report["evaluations"] = r.evaluations;
  report["hypothesis_warnings"] = r.hypothesis_warnings;
  report["dilatation_consistent"] = dil_ok;
  return r.distance <= sc.tol && r.evaluations <= sc.max_evals && dil_ok;
}

bool run_rigidity(const RunConfig& cfg, Artifacts& out, json& report) {
  const FuchsianGroup group = make_genus2_group();
  const MinkVector centre{0, 0, 1};
  const AlphaEstimate est = estimate_alpha(group, centre, cfg.word_len);
  const double uniform = uniform_alpha(group, cfg.word_len);
  const RigidityConstants k = rigidity_constants(uniform);
  report["word_len"] = cfg.word_len;
  report["orbit_size"] = est.orbit_size;
  report["alpha"] = uniform;
  report["alpha_base_origin"] = est.alpha;
  report["alpha_sampling"] = "max over 5x5 base points, Klein coordinates in [-0.6, 0.6]^2";
  report["C"] = k.big_c;
  report["c"] = k.small_c;
  report["C_prime"] = k.c_prime;
  report["C_prime_choice"] = "derived: 1/alpha^2";
  // relative change against word_len - 2; null when the shorter orbit does
  // not yet cover the fundamental domain
  report["stabilization_ratio"] = nullptr;
  if (cfg.word_len >= 3) {
    try {
      const double prev = uniform_alpha(group, cfg.word_len - 2);
      report["stabilization_ratio"] = (uniform - prev) / prev;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::FundamentalDomainNotCovered) throw;
    }
  }
  report["relator_defect"] = group.relator_defect();
  report["boost_length"] = group.boost_length;
  std::ostringstream obj;
  write_obj(obj, est.hull);
  out.add("hull.obj", obj.str());
  return group.relator_defect() <= kRelatorTolerance && uniform > 1.0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corrugated isometric embeddings of flat tori in Minkowski space, conformal search, rigidity constants"};
  std::map<std::string, std::string> flags;
  const std::vector<std::pair<std::string, std::string>> keys = {
      {"command", "corrugate | search | rigidity | modulus"},
      {"grid-n", "grid nodes per side"},
      {"epsilon", "isometry budget for automatic corrugation numbers"},
      {"rho", "radius of the search disc"},
      {"w0", "target conformal class, e.g. 0.3+1.2i"},
      {"n-policy", "'auto' or comma separated corrugation numbers"},
      {"word-len", "maximal word length of the orbit"},
      {"out", "output directory"},
      {"seed", "seed (recorded; all algorithms are deterministic)"},
      {"eta", "corrugate: coefficient of dx^2"},
      {"eta-modulation", "corrugate: relative sin(2 pi y) modulation of eta"},
      {"metric", "modulus: constant metric E,F,G"}};
  for (const auto& [k, help] : keys) app.add_option("--" + k, flags[k], help);
  std::string config_path;
  app.add_option("--config", config_path, "key = value file; flags override it");
  CLI11_PARSE(app, argc, argv);

  RunConfig cfg;
  json report;
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw Error(ErrorCode::IoError, "cannot open " + config_path);
      apply_config_stream(cfg, in);
    }
    for (const auto& [k, help] : keys) {
      if (app.count("--" + k) == 0) continue;
      std::string key = k == "out" ? "output_dir" : k;
      std::replace(key.begin(), key.end(), '-', '_');
      apply_setting(cfg, key, flags[k]);
    }
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  if (cfg.command == Command::Modulus) {
    try {
      const PeriodicGrid grid(cfg.grid_n);
      const Sym2 g{cfg.metric[0], cfg.metric[1], cfg.metric[2]};
      std::cout << format_w(torus_modulus(MetricField(grid, g)).value()) << '\n';
      return 0;
    } catch (const Error& e) {
      std::cerr << e.what() << '\n';
      return 2;
    }
  }

  Artifacts out;
  report["config"] = config_json(cfg);
  bool ok = false;
  int status = 0;
  try {
    std::filesystem::create_directories(cfg.output_dir);
    switch (cfg.command) {
      case Command::Corrugate: ok = run_corrugate(cfg, out, report); break;
      case Command::Search: ok = run_search(cfg, out, report); break;
      case Command::Rigidity: ok = run_rigidity(cfg, out, report); break;
      case Command::Modulus: break;
    }
    report["passed"] = ok;
    out.add("report.json", report.dump(2) + "\n");
    for (const auto& [name, content] : out.files) write_file(cfg.output_dir + "/" + name, content);
    status = ok ? 0 : 1;
  } catch (const Error& e) {
    json err;
    err["config"] = config_json(cfg);
    err["error"] = std::string(to_string(e.code()));
    err["message"] = e.what();
    std::cerr << e.what() << '\n';
    try {
      write_file(cfg.output_dir + "/error.json", err.dump(2) + "\n");
    } catch (const Error&) {
    }
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::cout << report.dump(2) << '\n';
  return status;
}
