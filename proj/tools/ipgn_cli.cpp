#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "ipgn/errors.hpp"
#include "ipgn/experiments.hpp"

namespace fs = std::filesystem;
using namespace ipgn;
using namespace ipgn::experiments;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::optional<int> mesh;
  std::optional<double> gamma, noise;
  std::optional<std::string> solver, out;
  std::optional<std::uint64_t> seed;
  bool dump_blocks = false;
  bool inject_negative_w = false;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON config file (flat keys)");
  sub->add_option("--mesh", o.mesh, "cells per side");
  sub->add_option("--gamma", o.gamma, "regularization weight (gamma1 = gamma2)");
  sub->add_option("--noise", o.noise, "relative noise level");
  sub->add_option("--solver", o.solver, "gmres-blockgs | cg-reduced | gmres-central | gmres-constraint");
  sub->add_option("--seed", o.seed, "noise seed");
  sub->add_option("--out", o.out, "output directory");
}

RunConfig effective(const std::string& command, const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  c.command = command;
  if (o.mesh) c.mesh = *o.mesh;
  if (o.gamma) c.problem.gamma1 = c.problem.gamma2 = *o.gamma;
  if (o.noise) c.problem.noise_level = *o.noise;
  if (o.solver) c.ipm.solver = parse_solver(*o.solver);
  if (o.seed) c.problem.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.dump_blocks) c.dump_blocks = true;
  c.inject_negative_w = o.inject_negative_w;
  c.validate();
  return c;
}

std::string path_in(const RunConfig& c, const char* name) { return (fs::path(c.out) / name).string(); }

int cmd_solve(const RunConfig& c) {
  const SolveSummary s = run_solve(c, c.mesh, c.out);
  std::cout << "converged=" << s.result.converged << " steps=" << s.result.steps() << " mean_krylov=" << s.result.mean_krylov()
            << " e_total=" << s.result.final_errors.e_total << " misfit_left=" << s.misfit_left
            << " noise_left=" << s.noise_left << '\n';
  if (!s.ok()) {
    std::cerr << json{{"error", s.error.empty() ? "not converged" : s.error}, {"command", "solve"}}.dump() << '\n';
    return 1;
  }
  return 0;
}

int cmd_scaling(const RunConfig& c) {
  fs::create_directories(c.out);
  const auto rows = scaling_study(c);
  write_scaling_csv(path_in(c, "scaling.csv"), rows);
  json summary = json::array();
  bool ok = true;
  for (const auto& r : rows) {
    summary.push_back({{"n", r.n}, {"solves_gmres", r.solves_gmres}, {"mean_gmres", r.mean_gmres}, {"solves_cg", r.solves_cg},
                       {"mean_cg", r.mean_cg}, {"status", r.status}});
    ok = ok && r.status == "ok";
    std::cout << r.n << ": solves " << r.solves_gmres << "/" << r.solves_cg << " mean " << r.mean_gmres << "/" << r.mean_cg
              << " " << r.status << '\n';
  }
  write_manifest(c.out, c, {"scaling.csv"}, json{{"rows", summary}}.dump(), ok ? "ok" : "partial");
  return ok ? 0 : 1;
}

int cmd_mu_trace(const RunConfig& c) {
  fs::create_directories(c.out);
  const auto rows = mu_trace(c);
  write_mu_trace_csv(path_in(c, "mu_trace.csv"), rows);
  write_manifest(c.out, c, {"mu_trace.csv"}, json{{"steps", rows.size()}}.dump(), "ok");
  for (const auto& r : rows)
    std::cout << r.step << " mu=" << r.mu << " blockgs=" << r.iters_blockgs << " central=" << r.iters_central
              << " constraint=" << r.iters_constraint << " cg=" << r.iters_cg << '\n';
  return 0;
}

int cmd_morozov(const RunConfig& c) {
  fs::create_directories(c.out);
  const auto grid = c.gammas.empty() ? default_morozov_grid() : c.gammas;
  const auto rows = morozov_sweep(c, c.mesh, grid);
  write_morozov_csv(path_in(c, "morozov.csv"), rows);
  const auto br = morozov_bracket(rows);
  const auto g = morozov_gamma(rows);
  json summary{{"bracket", br ? json{br->first, br->second} : json(nullptr)}, {"gamma", g ? json(*g) : json(nullptr)}};
  write_manifest(c.out, c, {"morozov.csv"}, summary.dump(), br ? "ok" : "no-crossing");
  for (const auto& r : rows) std::cout << "gamma=" << r.gamma << " misfit=" << r.misfit_left << " noise=" << r.noise_left << '\n';
  if (!br) {
    std::cerr << json{{"error", "no Morozov crossing in the gamma range"}, {"command", "morozov"}}.dump() << '\n';
    return 1;
  }
  std::cout << "crossing in [" << br->first << ", " << br->second << "], interpolated gamma " << *g << '\n';
  return 0;
}

int cmd_noise_table(const RunConfig& c) {
  fs::create_directories(c.out);
  const auto t3 = noise_table(c);
  write_noise_csv(path_in(c, "noise_table.csv"), t3);
  const auto t4 = regularization_table(c);
  write_regularization_csv(path_in(c, "regularization_table.csv"), t4);
  bool ok = true;
  for (const auto& r : t3) ok = ok && std::isfinite(r.gamma);
  for (const auto& r : t4) ok = ok && r.converged;
  write_manifest(c.out, c, {"noise_table.csv", "regularization_table.csv"}, "", ok ? "ok" : "partial");
  for (const auto& r : t3) std::cout << "noise=" << r.noise << " gamma=" << r.gamma << " mean=" << r.mean_gmres << '\n';
  for (const auto& r : t4) std::cout << "gamma=" << r.gamma << " mean=" << r.mean_gmres << '\n';
  return ok ? 0 : 1;
}

int cmd_spectral(const RunConfig& c) {
  fs::create_directories(c.out);
  const auto checks = spectral_verify(c);
  json items = json::array();
  bool ok = true;
  for (const auto& k : checks) {
    std::cout << (k.passed ? "PASS " : "FAIL ") << k.name << "  " << k.detail << '\n';
    items.push_back({{"name", k.name}, {"passed", k.passed}, {"detail", k.detail}});
    ok = ok && k.passed;
  }
  write_manifest(c.out, c, {}, json{{"checks", items}}.dump(), ok ? "ok" : "failed");
  if (!ok) {
    json failed = json::array();
    for (const auto& k : checks)
      if (!k.passed) failed.push_back(k.name + ": " + k.detail);
    std::cerr << json{{"error", "spectral checks failed"}, {"failures", failed}}.dump() << '\n';
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interior-point Gauss-Newton experiments"};
  app.require_subcommand(1);
  Overrides o;
  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&);
  };
  const Entry entries[] = {
      {"solve", "single optimization with VTK, CSV and manifest output", cmd_solve},
      {"scaling-study", "mesh refinement table", cmd_scaling},
      {"mu-trace", "Krylov iterations per step for each preconditioner", cmd_mu_trace},
      {"morozov", "regularization sweep and discrepancy crossing", cmd_morozov},
      {"noise-table", "Morozov gamma per noise level and iterations per gamma", cmd_noise_table},
      {"spectral-verify", "dense spectral checks on small meshes", cmd_spectral},
  };
  std::vector<CLI::App*> subs;
  for (const auto& e : entries) {
    auto* s = app.add_subcommand(e.name, e.help);
    add_common(s, o);
    if (std::string(e.name) == "solve") s->add_flag("--dump-blocks", o.dump_blocks, "write KKT blocks per step (Matrix Market)");
    if (std::string(e.name) == "spectral-verify")
      s->add_flag("--inject-negative-w", o.inject_negative_w, "corrupt W to exercise the precondition path");
    subs.push_back(s);
  }
  CLI11_PARSE(app, argc, argv);

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    try {
      const RunConfig c = effective(entries[i].name, o);
      return entries[i].run(c);
    } catch (const ConfigError& e) {
      std::cerr << json{{"error", e.what()}, {"kind", "config"}}.dump() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << json{{"error", e.what()}, {"kind", "runtime"}}.dump() << '\n';
      return 1;
    }
  }
  return 2;
}
