#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mirfuzz/fuzz.hpp"
#include "mirfuzz/parse.hpp"
#include "mirfuzz/synth.hpp"

namespace mirfuzz {

struct PipelineConfig {
  std::vector<std::string> inputs;   // .mir paths
  size_t max_entries = 3;            // entries to recommend
  std::vector<std::string> entries;  // manual override of the locator
  bool composite = false;            // one driver calling all entries in order
  uint64_t alloc_size = 64;
  int smoke_trials = 256;
  uint64_t budget_execs = 50000;
  std::optional<double> budget_secs;
  uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = "out";
  bool harvest = true;
};

// Line-oriented key=value configuration file. Unknown keys and malformed
// values are reported through `errors`.
PipelineConfig load_config_file(const std::string& path, std::vector<std::string>& errors);

struct PipelineOutcome {
  int exit_code = 0;  // 0 ok, 1 parse failure, 2 every driver invalid
  nlohmann::ordered_json report;
  std::vector<Diagnostic> diagnostics;
  std::optional<Program> instrumented;  // final program with all drivers
};

// analyze -> synth -> smoke-filter -> fuzz -> merged report; writes driver
// modules, pseudo-sources, driver specs, crash inputs, and report.json under
// out_dir.
PipelineOutcome run_pipeline(const PipelineConfig& config);

// Parses and concatenates the given modules into one program.
ParseResult parse_inputs(const std::vector<std::string>& paths);

nlohmann::ordered_json ranking_json(const Program& p, size_t max_number);
nlohmann::ordered_json driver_spec_json(const DriverSpec& spec);
nlohmann::ordered_json exec_result_json(const ExecResult& r);
nlohmann::ordered_json report_json(const CoverageReport& report);

}  // namespace mirfuzz
