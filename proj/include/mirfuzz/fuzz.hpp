#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mirfuzz/runtime.hpp"
#include "mirfuzz/synth.hpp"

namespace mirfuzz {

using Bytes = std::vector<uint8_t>;

// Applies one mutation operator: bit flip, byte set, byte insert, byte
// delete, block duplicate, splice with a corpus input, or an
// interesting-constant overwrite (builtins plus harvested constants).
Bytes mutate(const Bytes& input, std::mt19937_64& rng, const std::vector<Bytes>& corpus,
             const std::vector<HarvestedConst>& dict, size_t max_size = 4096);

struct SmokeVerdict {
  bool valid = true;
  CrashKind reason = CrashKind::None;
};

// Runs the driver on the empty input plus (trials-1) seeded-random inputs.
// Any crash other than StepLimit marks the driver invalid.
SmokeVerdict smoke_filter(const Program& instrumented, const std::string& driver,
                          int trials, uint64_t seed, const RunOptions& run_opts = {});

struct CrashSignature {
  CrashKind kind;
  uint32_t block;
  auto operator<=>(const CrashSignature&) const = default;
};

struct DriverStats {
  std::set<uint32_t> blocks;
  std::set<uint64_t> paths;
  std::map<CrashSignature, Bytes> crashes;  // first input per unique signature
  uint64_t execs = 0;
  uint64_t hangs = 0;  // StepLimit executions
};

struct CoverageReport {
  uint64_t program_id = 0;
  std::map<std::string, DriverStats> drivers;
  double wall_secs = 0;  // recorded only for wall-clock budgets

  uint64_t total_execs() const;
  std::set<uint32_t> total_blocks() const;
  std::set<uint64_t> total_paths() const;
  uint64_t total_bugs() const;
};

struct ReportMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Set-union merge; associative, commutative, idempotent. Throws
// ReportMismatch when the program identities differ.
CoverageReport merge_reports(const CoverageReport& a, const CoverageReport& b);

// Stable hash of the rendered module, used as report identity.
uint64_t program_identity(const Program& p);

struct CampaignOptions {
  uint64_t budget_execs = 0;                 // total, split across drivers and workers
  std::optional<double> budget_secs;
  uint64_t seed = 1;
  int workers = 1;
  std::vector<HarvestedConst> dict;
  std::vector<Bytes> seed_inputs;            // extra user seeds
  size_t max_input = 4096;
  RunOptions run;
  // Observes every execution (worker-local order); used by invariant checks.
  std::function<void(const std::string& driver, const Bytes& input, const ExecResult&)>
      observer;
};

// Coverage-guided evolutionary loop. Deterministic given (seed, exec budget)
// with a fixed worker count.
CoverageReport run_campaign(const Program& instrumented,
                            const std::vector<std::string>& drivers,
                            const CampaignOptions& opts);

}  // namespace mirfuzz
