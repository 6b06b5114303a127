// cmsim: runs one congestion-manager experiment and writes its outputs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cm/cm.h"

namespace {

using owned_string = std::unique_ptr<char, decltype(&cm_free_string)>;

int exit_code(cm_status s) {
  switch (s) {
    case CM_OK: return 0;
    case CM_ERR_CONFIG: return 2;
    case CM_ERR_CHECK_FAILED: return 3;
    default: return 1;
  }
}

int report(cm_status s) {
  std::cerr << "cmsim: " << cm_status_string(s);
  if (*cm_last_error()) std::cerr << ": " << cm_last_error();
  std::cerr << '\n';
  return exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Run a congestion manager experiment in the network simulator"};

  std::string config_path, scenario, out_dir = "out";
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  double duration = 0.0;
  bool check = false, print_config = false, quiet = false;

  app.add_option("--config", config_path, "JSON experiment config")
      ->check(CLI::ExistingFile);
  app.add_option("--scenario", scenario,
                 "tcp_compare, sharing, layered_alf, layered_rate, "
                 "delayed_feedback, fairness_ensemble, udpcc_basic, vat");
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  auto* duration_opt =
      app.add_option("--duration", duration, "virtual seconds to simulate");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--set", overrides, "override a config field: key.path=value")
      ->take_all();
  app.add_flag("--check", check,
               "exit nonzero if any of the scenario's checks fails");
  app.add_flag("--print-config", print_config,
               "print the resolved config and exit without running");
  app.add_flag("-q,--quiet", quiet, "do not print the summary");
  CLI11_PARSE(app, argc, argv);

  std::string doc = "{}";
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    std::stringstream text;
    text << in.rdbuf();
    doc = text.str();
  }

  std::vector<std::string> assignments;
  if (!scenario.empty()) assignments.push_back("scenario=\"" + scenario + "\"");
  if (*seed_opt) assignments.push_back("seed=" + std::to_string(seed));
  if (*duration_opt) {
    std::ostringstream d;
    d.precision(17);
    d << duration;
    assignments.push_back("duration=" + d.str());
  }
  assignments.insert(assignments.end(), overrides.begin(), overrides.end());

  for (const std::string& a : assignments) {
    char* next = nullptr;
    if (cm_status s = cm_apply_override(doc.c_str(), a.c_str(), &next); s != CM_OK)
      return report(s);
    doc = owned_string(next, cm_free_string).get();
  }

  if (print_config) {
    char* resolved = nullptr;
    if (cm_status s = cm_resolve_config(doc.c_str(), &resolved); s != CM_OK)
      return report(s);
    std::cout << owned_string(resolved, cm_free_string).get() << '\n';
    return 0;
  }

  char* summary = nullptr;
  const cm_status s =
      cm_run_experiment(doc.c_str(), out_dir.c_str(), check ? 1 : 0, &summary);
  owned_string owned(summary, cm_free_string);
  if (summary && !quiet) std::cout << summary << '\n';
  if (s != CM_OK) return report(s);
  return 0;
}
