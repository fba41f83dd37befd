// creatorsim command line: environment generation, seeded experiment grids,
// the five-user counterexample, theory checks and trace metrics.
//
// Exit codes: 0 success, 1 validation or usage error, 2 runtime failure.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "creatorsim/experiment.hpp"
#include "creatorsim/io.hpp"

using namespace creatorsim;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct RunFlags {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> arms;
  std::string output_dir;
  std::optional<double> eta;
  std::optional<int> horizon;
  std::optional<int> epochs;
  std::optional<int> epoch_length;
  std::optional<int> threads;
  std::string env_kind;
  bool full_fidelity = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("-c,--config", f.config, "JSON run config")->check(CLI::ExistingFile);
  cmd->add_option("-s,--seed", f.seeds, "Master seed(s); replaces the config's list");
  cmd->add_option("-a,--arm", f.arms, "Arm(s) by mechanism name: none, uir, smt, hmt");
  cmd->add_option("-o,--output-dir", f.output_dir, "Output directory (beats CREATORSIM_OUTPUT_DIR)");
  cmd->add_option("--eta", f.eta, "LBR step size");
  cmd->add_option("-T,--horizon", f.horizon, "Total rounds T");
  cmd->add_option("-E,--epochs", f.epochs, "Reweighting epochs E");
  cmd->add_option("-M,--epoch-length", f.epoch_length, "Rounds per epoch M");
  cmd->add_option("-j,--threads", f.threads, "Worker threads (0: all cores)");
  cmd->add_option("--env", f.env_kind, "Environment kind");
  cmd->add_flag("--full-fidelity", f.full_fidelity, "Store strategies every round");
}

// flag > config file > default; CREATORSIM_OUTPUT_DIR sits between the flag
// and the config file.
RunConfig load_run_config(const RunFlags& f, const std::vector<std::string>& default_arms) {
  json doc = json::object();
  std::filesystem::path base;
  if (!f.config.empty()) {
    doc = read_json_file(f.config);
    base = std::filesystem::path(f.config).parent_path();
    if (base.empty()) base = ".";
  }
  if (!doc.is_object()) throw ConfigError({"config root must be an object"});
  if (!f.env_kind.empty()) doc["environment"]["kind"] = f.env_kind;
  if (f.eta) doc["dynamics"]["eta"] = *f.eta;
  if (f.horizon) {
    doc["dynamics"]["horizon"] = *f.horizon;
    if (!f.epochs && doc.contains("reweighting") && doc["reweighting"].is_object()) doc["reweighting"].erase("epochs");
  }
  if (f.epochs) {
    doc["reweighting"]["epochs"] = *f.epochs;
    if (!f.horizon && doc.contains("dynamics") && doc["dynamics"].is_object()) doc["dynamics"].erase("horizon");
  }
  if (f.epoch_length) doc["reweighting"]["epoch_length"] = *f.epoch_length;
  if (f.full_fidelity) doc["reweighting"]["full_fidelity"] = true;
  if (!f.seeds.empty()) doc["seeds"] = f.seeds;
  if (!f.arms.empty()) doc["arms"] = f.arms;
  else if (!doc.contains("arms")) doc["arms"] = default_arms;
  if (f.threads) doc["threads"] = *f.threads;
  RunConfig config = parse_config(doc, base);
  config.output_dir = f.output_dir.empty() ? resolve_output_dir(config.output_dir) : f.output_dir;
  return config;
}

void emit_json(const json& doc, const std::string& out) {
  if (out.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    write_file_atomic(out, doc.dump(2) + "\n");
    std::cerr << "wrote " << out << "\n";
  }
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

// Final welfare of `arm` per seed, skipping seeds where it failed.
std::vector<double> final_welfare(const ExperimentResult& result, const std::string& arm) {
  std::vector<double> out;
  for (const auto& s : result.seeds) {
    if (const auto* a = s.find(arm); a && a->status == "ok") out.push_back(a->final_welfare);
  }
  return out;
}

void print_arm_table(const ExperimentResult& result, const RunConfig& config) {
  std::printf("%-16s %6s %12s %10s %10s %10s\n", "arm", "runs", "mean W", "sd", "rho(w,n)", "plateau");
  const auto base = final_welfare(result, config.arms.front().name);
  for (const auto& arm : config.arms) {
    const auto w = final_welfare(result, arm.name);
    std::vector<double> rho;
    int plateaued = 0;
    for (const auto& s : result.seeds) {
      if (const auto* a = s.find(arm.name); a && a->status == "ok") {
        rho.push_back(a->metrics.true_cluster_sizes.empty() ? a->metrics.weight_size_spearman
                                                              : a->metrics.true_weight_size_spearman);
        plateaued += a->metrics.plateaued ? 1 : 0;
      }
    }
    std::printf("%-16s %6zu %12.6f %10.6f %10.4f %7d/%zu", arm.name.c_str(), w.size(), mean(w), sd(w), mean(rho),
                plateaued, w.size());
    if (&arm != &config.arms.front() && w.size() == base.size() && w.size() >= 2) {
      const auto t = paired_t_test(w, base);
      std::printf("   vs %s: diff %+.6f  p=%.4g", config.arms.front().name.c_str(), t.mean_difference, t.p_value);
    }
    std::printf("\n");
  }
}

int finish_experiment(const ExperimentResult& result) {
  std::cerr << "outputs in " << result.output_dir.string() << " (config hash " << result.manifest.config_hash << ")\n";
  for (const auto& r : result.manifest.runs) {
    if (r.status != "ok") std::cerr << "seed " << r.seed << " arm " << r.arm << " failed: " << r.error << "\n";
  }
  return result.all_ok() ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"creatorsim: content creator competition under top-K softmax matching"};
  app.require_subcommand(1);

  // gen-env
  auto* gen = app.add_subcommand("gen-env", "Build an environment and save its JSON snapshot");
  std::string gen_config;
  std::string gen_kind;
  std::uint64_t gen_seed = 1;
  std::optional<int> gen_groups;
  std::string gen_out;
  std::string gen_users;
  std::string gen_items;
  gen->add_option("-c,--config", gen_config, "Run config; its environment section is used")->check(CLI::ExistingFile);
  gen->add_option("-k,--kind", gen_kind, "synthetic, failure_example, orthogonal_basis, embedding");
  gen->add_option("-s,--seed", gen_seed, "Seed");
  gen->add_option("-L,--groups", gen_groups, "k-means groups (0 keeps the builder's groups)");
  gen->add_option("--user-file", gen_users, "User embedding CSV (embedding kind)");
  gen->add_option("--item-file", gen_items, "Item embedding CSV (embedding kind)");
  gen->add_option("-o,--out", gen_out, "Output JSON path")->required();

  // simulate / sweep
  auto* sim = app.add_subcommand("simulate", "Run a config: every seed x arm (default arm: none)");
  RunFlags sim_flags;
  add_run_flags(sim, sim_flags);
  auto* sweep = app.add_subcommand("sweep", "Mechanism x seed grid (default arms: none, uir, smt, hmt)");
  RunFlags sweep_flags;
  add_run_flags(sweep, sweep_flags);

  // repro-example
  auto* repro = app.add_subcommand("repro-example", "Five-user counterexample: baseline vs halved center weight");
  int repro_seeds = 20;
  int repro_rounds = 2000;
  std::string repro_out = "runs/repro-example";
  int repro_threads = 0;
  repro->add_option("-n,--seeds", repro_seeds, "Number of seeds (0..n-1)")->check(CLI::PositiveNumber);
  repro->add_option("-T,--rounds", repro_rounds, "LBR rounds")->check(CLI::PositiveNumber);
  repro->add_option("-o,--output-dir", repro_out, "Output directory");
  repro->add_option("-j,--threads", repro_threads, "Worker threads (0: all cores)");

  // check-monotone / check-gradient / check
  auto* mono = app.add_subcommand("check-monotone", "Second-order monotonicity condition on named cases");
  std::vector<std::string> mono_cases;
  int mono_samples = 100;
  std::uint64_t mono_seed = 1;
  std::optional<double> mono_tol;
  std::string mono_out;
  mono->add_option("--case", mono_cases, "dot_orthogonal, bounded_quadratic, truncated_linear (default: all)");
  mono->add_option("-n,--samples", mono_samples, "Sample strategies per case")->check(CLI::PositiveNumber);
  mono->add_option("-s,--seed", mono_seed, "Seed");
  mono->add_option("--tolerance", mono_tol, "Eigenvalue tolerance");
  mono->add_option("-o,--out", mono_out, "Write the JSON report here instead of stdout");

  auto* grad = app.add_subcommand("check-gradient", "Finite-difference welfare response to group weights");
  std::uint64_t grad_seed = 1;
  int grad_seeds = 20;
  int grad_creators = 100;
  std::optional<double> grad_delta;
  std::optional<int> grad_settle;
  std::string grad_out;
  grad->add_option("-s,--seed", grad_seed, "Environment seed");
  grad->add_option("-n,--seeds", grad_seeds, "Paired seeds per group")->check(CLI::PositiveNumber);
  grad->add_option("--creators", grad_creators, "Number of creators")->check(CLI::PositiveNumber);
  grad->add_option("--delta", grad_delta, "Weight perturbation");
  grad->add_option("--settle", grad_settle, "Rounds after the perturbation");
  grad->add_option("-o,--out", grad_out, "Write the JSON report here instead of stdout");

  auto* check = app.add_subcommand("check", "check-monotone (all cases) and check-gradient together");
  std::uint64_t check_seed = 1;
  int check_seeds = 20;
  std::string check_out;
  check->add_option("-s,--seed", check_seed, "Seed");
  check->add_option("-n,--seeds", check_seeds, "Paired seeds for the gradient check")->check(CLI::PositiveNumber);
  check->add_option("-o,--out", check_out, "Write the JSON report here instead of stdout");

  // metrics
  auto* met = app.add_subcommand("metrics", "Metrics and welfare recomputation for a stored trace");
  std::string met_trace;
  std::string met_env;
  std::string met_json;
  std::string met_csv;
  met->add_option("-t,--trace", met_trace, "Trace JSONL")->required()->check(CLI::ExistingFile);
  met->add_option("-e,--env", met_env, "Environment snapshot the trace was run on")->required()->check(CLI::ExistingFile);
  met->add_option("--json", met_json, "Write metrics JSON here");
  met->add_option("--csv", met_csv, "Write the step,welfare curve here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*gen) {
      json doc = gen_config.empty() ? json::object() : read_json_file(gen_config);
      if (!gen_kind.empty()) doc["environment"]["kind"] = gen_kind;
      if (gen_groups) doc["reweighting"]["groups"] = *gen_groups;
      if (!gen_users.empty()) doc["environment"]["embedding"]["user_file"] = gen_users;
      if (!gen_items.empty()) doc["environment"]["embedding"]["item_file"] = gen_items;
      std::filesystem::path base = gen_config.empty() ? "" : std::filesystem::path(gen_config).parent_path();
      const auto config = parse_config(doc, base);
      const auto env = build_environment(config.environment, gen_seed);
      save_environment(gen_out, env);
      for (const auto& w : env.warnings()) std::cerr << "warning: " << w << "\n";
      std::cerr << "wrote " << gen_out << ": " << env.population.size() << " users, " << env.num_creators()
                << " creators, " << env.population.num_groups << " groups\n";
      return 0;
    }

    if (*sim || *sweep) {
      const bool is_sweep = static_cast<bool>(*sweep);
      const auto config = load_run_config(is_sweep ? sweep_flags : sim_flags,
                                          is_sweep ? std::vector<std::string>{"none", "uir", "smt", "hmt"}
                                                   : std::vector<std::string>{"none"});
      const auto result = run_experiment(config);
      print_arm_table(result, config);
      return finish_experiment(result);
    }

    if (*repro) {
      std::vector<std::uint64_t> seeds(static_cast<std::size_t>(repro_seeds));
      std::iota(seeds.begin(), seeds.end(), 0);
      json doc{{"environment", {{"kind", "failure_example"}}},
               {"dynamics", {{"horizon", repro_rounds}}},
               {"reweighting", {{"adaptive", false}, {"epoch_length", 1}}},
               {"arms",
                {{{"name", "baseline"}, {"mechanism", {{"kind", "none"}}}},
                 {{"name", "uir_half_center"},
                  {"mechanism", {{"kind", "uir"}}},
                  {"initial_weights", {0.5, 1.0, 1.0, 1.0, 1.0}}}}},
               {"seeds", seeds},
               {"output_dir", repro->count("--output-dir") ? repro_out : resolve_output_dir(repro_out)},
               {"threads", repro_threads}};
      const auto config = parse_config(doc);
      const auto result = run_experiment(config);
      json arms = json::object();
      std::printf("%-16s %12s %10s %12s\n", "arm", "mean W", "plateaued", "x4/x5 < 1");
      for (const auto& arm : config.arms) {
        int plateaued = 0;
        int unsatisfied = 0;
        int runs = 0;
        for (const auto& s : result.seeds) {
          const auto* a = s.find(arm.name);
          if (!a || a->status != "ok") continue;
          ++runs;
          const auto& curve = a->metrics.welfare_curve;
          const auto mid = static_cast<std::size_t>(std::ceil(0.5 * static_cast<double>(curve.size()))) - 1;
          plateaued += std::abs(curve.back() - curve[mid]) / std::abs(curve[mid]) < 0.02 ? 1 : 0;
          const auto& u = a->metrics.final_group_utilities;
          unsatisfied += (u[3] < 1.0 || u[4] < 1.0) ? 1 : 0;
        }
        const auto w = final_welfare(result, arm.name);
        std::printf("%-16s %12.6f %7d/%-2d %9d/%-2d\n", arm.name.c_str(), mean(w), plateaued, runs, unsatisfied, runs);
        arms[arm.name] = {{"mean_final_welfare", mean(w)},
                          {"final_welfare", w},
                          {"plateaued", plateaued},
                          {"x4_or_x5_below_half", unsatisfied},
                          {"runs", runs}};
      }
      const auto t = paired_t_test(final_welfare(result, "uir_half_center"), final_welfare(result, "baseline"));
      std::printf("paired t-test (uir_half_center > baseline): diff %+.6f t=%.3f p=%.4g\n", t.mean_difference,
                  t.t_statistic, t.p_value);
      json report{{"kind", "repro_example"},
                  {"schema_version", kSummarySchemaVersion},
                  {"arms", arms},
                  {"paired_t_test", {{"mean_difference", t.mean_difference}, {"t", t.t_statistic}, {"p_value", t.p_value}}}};
      write_file_atomic(result.output_dir / "repro_example.json", report.dump(2) + "\n");
      return finish_experiment(result);
    }

    auto monotone_reports = [](const std::vector<std::string>& names, int samples, std::uint64_t seed,
                               std::optional<double> tol) {
      json out = json::array();
      for (const auto& name : names) {
        auto c = monotone_case(name, seed, samples);
        const auto report = check_monotone_condition(c.population, c.model, c.samples, tol.value_or(c.tolerance));
        double worst = -std::numeric_limits<double>::infinity();
        for (double e : report.max_eigenvalues) worst = std::max(worst, e);
        std::cerr << name << ": " << (report.holds ? "holds" : "fails") << " (max eigenvalue " << worst << ", "
                  << report.evaluated.size() << " points, " << report.skipped.size() << " skipped)\n";
        out.push_back({{"case", name}, {"report", to_json(report)}});
      }
      return out;
    };
    auto gradient_report = [](std::uint64_t seed, int seeds, int creators, std::optional<double> delta,
                              std::optional<int> settle) {
      auto c = gradient_case(seed, seeds, creators);
      if (delta) c.options.perturbation.delta = *delta;
      if (settle) c.options.perturbation.settle_rounds = *settle;
      const auto report = check_weight_gradient(c.env, c.options);
      for (const auto& e : report.entries) {
        std::cerr << "group " << e.group << ": pi_bar " << e.pi_bar << ", mean dW " << e.mean_delta_welfare
                  << ", dW >= 0 in " << e.fraction_nonnegative * 100.0 << "% of seeds\n";
      }
      std::cerr << "rank agreement with -pi_bar: " << report.rank_agreement << "\n";
      return to_json(report);
    };

    if (*mono) {
      emit_json(json{{"kind", "monotone_checks"},
                     {"schema_version", kReportSchemaVersion},
                     {"cases", monotone_reports(mono_cases.empty() ? monotone_case_names() : mono_cases, mono_samples,
                                                mono_seed, mono_tol)}},
                mono_out);
      return 0;
    }
    if (*grad) {
      emit_json(gradient_report(grad_seed, grad_seeds, grad_creators, grad_delta, grad_settle), grad_out);
      return 0;
    }
    if (*check) {
      emit_json(json{{"kind", "theory_checks"},
                     {"schema_version", kReportSchemaVersion},
                     {"monotone", monotone_reports(monotone_case_names(), 100, check_seed, std::nullopt)},
                     {"gradient", gradient_report(check_seed, check_seeds, 100, std::nullopt, std::nullopt)}},
                check_out);
      return 0;
    }

    if (*met) {
      TraceHeader header;
      const auto trace = read_trace(met_trace, &header);
      const auto env = load_environment(met_env);
      if (env.num_creators() != header.num_creators || env.population.size() != header.num_users)
        throw ValidationError("trace and environment sizes differ");
      const auto metrics = experiment_metrics(trace, env);
      double worst = 0.0;
      int checked = 0;
      for (const auto& rec : trace.records) {
        if (const auto w = recompute_welfare(rec, env, header.mechanism)) {
          worst = std::max(worst, std::abs(*w - rec.welfare));
          ++checked;
        }
      }
      std::printf("final welfare %.10f  plateau change %.6f  rho(weight,size) %.4f  rho(utility,size) %.4f\n",
                  trace.final_welfare(), metrics.plateau_relative_change, metrics.weight_size_spearman,
                  metrics.utility_size_spearman);
      std::printf("welfare recomputed on %d records: max |diff| %.3g\n", checked, worst);
      if (!met_json.empty()) write_file_atomic(met_json, to_json(metrics).dump(2) + "\n");
      if (!met_csv.empty()) write_file_atomic(met_csv, welfare_curve_csv(metrics));
      return worst <= 1e-9 ? 0 : kExitRuntime;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
