// egosgm command-line driver.
#include "egosgm/egosgm.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace egosgm;

namespace {

void apply_overrides(KeyValueFile& kv, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ParseError("--set expects key=value, got '" + o + "'");
    }
    kv.set(detail::trim(o.substr(0, eq)), detail::trim(o.substr(eq + 1)));
  }
}

int cmd_run(const fs::path& config_path, const std::string& output, bool baseline,
            const std::vector<std::string>& overrides, bool quiet) {
  KeyValueFile kv = KeyValueFile::load(config_path);
  apply_overrides(kv, overrides);
  if (baseline) kv.set("baseline_sgm", "true");
  RunOptions options = parse_run_config(kv, config_path.parent_path());
  if (!output.empty()) options.output = output;
  const RunSummary summary = run_pipeline(options, quiet ? nullptr : &std::cout);
  if (!quiet) std::cout << format_summary(summary);
  return 0;
}

int cmd_synth(const fs::path& spec_path, const fs::path& output) {
  const SequenceSpec spec = parse_sequence_spec(KeyValueFile::load(spec_path));
  export_sequence(spec, output);
  std::cout << "wrote " << spec.trajectory.frames << " frames to " << output.string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& estimate, const fs::path& truth, const std::string& mode,
             const std::string& output) {
  const BadPixelRule rule = parse_bad_pixel_rule(mode);
  const auto results = evaluate_directories(estimate, truth, rule);
  std::ostringstream report;
  double rate = 0.0, rate_all = 0.0;
  for (const auto& r : results) {
    report << format_file_metrics(r) << "\n";
    rate += r.stats.rate;
    rate_all += r.stats.rate_all;
  }
  const double n = static_cast<double>(results.size());
  std::ostringstream summary;
  summary << "metric=" << to_string(rule) << "\n"
          << "files=" << results.size() << "\n"
          << "mean_bad_rate=" << detail::fixed6(rate / n) << "\n"
          << "mean_bad_rate_all=" << detail::fixed6(rate_all / n) << "\n";
  std::cout << report.str() << summary.str();
  if (!output.empty()) std::ofstream(output) << summary.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal stereo disparity estimation with ego-motion reduced search space"};
  app.require_subcommand(1);

  std::string config, output, spec, estimate, truth, mode = "or";
  std::vector<std::string> overrides;
  bool baseline = false, quiet = false;

  auto* run = app.add_subcommand("run", "Run predict/match/fuse over a sequence");
  run->add_option("-c,--config", config, "Key-value run configuration")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output", output, "Output directory (overrides the config)");
  run->add_flag("--baseline-sgm", baseline, "Full-range SGM every frame, no temporal fusion");
  run->add_option("--set", overrides, "Override a config key: key=value (repeatable)");
  run->add_flag("-q,--quiet", quiet, "Do not print per-frame metrics");

  auto* synth = app.add_subcommand("synth", "Render a synthetic sequence to disk");
  synth->add_option("-s,--spec", spec, "Sequence spec file")->required()->check(CLI::ExistingFile);
  synth->add_option("-o,--output", output, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Bad-pixel metrics between two disparity directories");
  eval->add_option("-e,--estimate", estimate, "Estimated disparity PNGs")->required();
  eval->add_option("-g,--gt", truth, "Ground-truth disparity PNGs")->required();
  eval->add_option("-m,--mode", mode, "Bad-pixel rule: or | and")->check(CLI::IsMember({"or", "and"}));
  eval->add_option("-o,--output", output, "Write the key=value summary here");

  auto* render = app.add_subcommand("render-errors", "Write red (bad) / blue (good) error PNGs");
  render->add_option("-e,--estimate", estimate, "Estimated disparity PNGs")->required();
  render->add_option("-g,--gt", truth, "Ground-truth disparity PNGs")->required();
  render->add_option("-o,--output", output, "Output directory")->required();
  render->add_option("-m,--mode", mode, "Bad-pixel rule: or | and")->check(CLI::IsMember({"or", "and"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, output, baseline, overrides, quiet);
    if (*synth) return cmd_synth(spec, output);
    if (*eval) return cmd_eval(estimate, truth, mode, output);
    if (*render) {
      render_error_images(estimate, truth, output, parse_bad_pixel_rule(mode));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "egosgm: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
