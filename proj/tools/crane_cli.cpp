// Command-line front end: `run` simulates one closed-loop scenario, `compare`
// runs nominal vs robust safety modes side by side, `validate` checks a
// scenario file. Scenario files are JSON; see configs/ for the default.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "crane/harness.hpp"

namespace {

const char* mode_name(crane::SafetyMode m) {
  return m == crane::SafetyMode::robust ? "robust" : "nominal";
}

void print_metrics(const char* label, const crane::Metrics& m) {
  std::printf("%s: min h_t = %.6g m, violation %.3g s, tracking RMS %.4g m, "
              "final error %.4g m, settle %.3g s, insertion %s\n",
              label, m.min_h_t, m.violation_duration, m.tracking_rms, m.final_tracking_error,
              m.settle_time_tracking, m.insertion_success ? "yes" : "no");
}

void export_run(const crane::SimulationLog& log, const std::filesystem::path& out,
                const std::string& mode) {
  std::filesystem::create_directories(out);
  crane::export_csv(log, (out / ("log_" + mode + ".csv")).string());
  crane::export_tracking_plot(log, (out / ("tracking_" + mode + ".svg")).string());
  crane::export_safety_plot(log, (out / ("safety_" + mode + ".svg")).string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ship-mounted crane MPC simulator"};
  app.require_subcommand(1);

  std::string config_path, mode_override, out_dir = "out";
  std::uint64_t seed_override = 0;
  bool have_seed = false;
  double duration_override = 0.0;
  bool timing = false;

  auto* run = app.add_subcommand("run", "Simulate one closed-loop scenario");
  run->add_option("--config", config_path, "Scenario JSON file")->required();
  run->add_option("--mode", mode_override, "Override safety mode (nominal|robust)");
  run->add_option("--seed", seed_override, "Override the scenario seed")
      ->each([&](const std::string&) { have_seed = true; });
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--duration", duration_override, "Override the duration [s]");
  run->add_flag("--timing", timing, "Record wall-clock solve times (breaks log determinism)");

  auto* cmp = app.add_subcommand("compare", "Run nominal and robust modes with shared seeds");
  cmp->add_option("--config", config_path, "Scenario JSON file")->required();
  cmp->add_option("--out", out_dir, "Output directory")->required();
  cmp->add_flag("--timing", timing, "Record wall-clock solve times");

  auto* val = app.add_subcommand("validate", "Schema-check a scenario file");
  val->add_option("--config", config_path, "Scenario JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    crane::ScenarioConfig cfg = crane::load_scenario(config_path);
    if (!mode_override.empty()) {
      if (mode_override == "nominal")
        cfg.mode = crane::SafetyMode::nominal;
      else if (mode_override == "robust")
        cfg.mode = crane::SafetyMode::robust;
      else
        throw std::invalid_argument("--mode must be nominal or robust");
    }
    if (have_seed) cfg.seed = seed_override;
    if (duration_override > 0.0) cfg.duration = duration_override;
    crane::validate_scenario(cfg);

    if (val->parsed()) {
      std::printf("%s: valid scenario (%s mode, %.3g s, seed %llu)\n", config_path.c_str(),
                  mode_name(cfg.mode), cfg.duration,
                  static_cast<unsigned long long>(cfg.seed));
      return 0;
    }

    if (run->parsed()) {
      const crane::SimulationLog log = crane::run_scenario(cfg, timing);
      const crane::BaseSignal base = crane::make_base_signal(cfg.base_profile);
      const crane::Metrics m = crane::compute_metrics(log, cfg.crane, base);
      export_run(log, out_dir, mode_name(cfg.mode));
      print_metrics(mode_name(cfg.mode), m);
      // A robust-mode run is accepted only if it kept the target constraint.
      const bool ok =
          cfg.mode != crane::SafetyMode::robust || m.min_h_t >= -1e-6;
      return ok ? 0 : 1;
    }

    // compare
    const crane::ComparisonReport rep = crane::compare_nominal_robust(cfg, timing);
    std::filesystem::create_directories(out_dir);
    export_run(rep.nominal_log, out_dir, "nominal");
    export_run(rep.robust_log, out_dir, "robust");
    const std::string report = crane::format_report(rep);
    {
      std::ofstream rf(std::filesystem::path(out_dir) / "report.txt", std::ios::binary);
      if (!rf) throw std::runtime_error("compare: cannot write report.txt");
      rf << report;
    }
    std::fputs(report.c_str(), stdout);
    print_metrics("nominal", rep.nominal);
    print_metrics("robust", rep.robust);
    return (rep.nominal_violates && rep.robust_safe) ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
