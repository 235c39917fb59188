#include "mirfuzz/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mirfuzz/locator.hpp"
#include "mirfuzz/print.hpp"

namespace mirfuzz {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

void write_file(const fs::path& path, const Bytes& content) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(content.data()),
            static_cast<std::streamsize>(content.size()));
}

uint64_t bytes_hash(const Bytes& b) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (uint8_t c : b) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

ordered_json plan_json(const ArgPlan& plan) {
  ordered_json j;
  switch (plan.kind) {
    case ArgPlan::Kind::ScalarFromBuffer: j["kind"] = "scalar_from_buffer"; break;
    case ArgPlan::Kind::FreshAllocation: j["kind"] = "fresh_allocation"; break;
    case ArgPlan::Kind::RecursiveAggregate: j["kind"] = "recursive_aggregate"; break;
    case ArgPlan::Kind::FuncRefTrap: j["kind"] = "funcref_trap"; break;
  }
  j["type"] = type_to_string(plan.type);
  j["size"] = plan.size;
  if (!plan.candidates.empty()) j["candidates"] = plan.candidates;
  if (!plan.children.empty()) {
    ordered_json kids = ordered_json::array();
    for (const auto& c : plan.children) kids.push_back(plan_json(c));
    j["children"] = kids;
  }
  return j;
}

}  // namespace

ParseResult parse_inputs(const std::vector<std::string>& paths) {
  std::string merged;
  for (const auto& path : paths) {
    auto text = read_file(path);
    if (!text) {
      ParseResult r;
      r.diagnostics.push_back({0, 0, "cannot read " + path});
      return r;
    }
    merged += *text;
    merged += "\n";
  }
  return parse_module(merged);
}

ordered_json ranking_json(const Program& p, size_t max_number) {
  ordered_json out = ordered_json::array();
  for (const auto& [name, priority] : locate_entries(p, max_number)) {
    const Function* f = p.find_func(name);
    DirectWeights w = direct_weights(*f, p);
    ordered_json row;
    row["function"] = name;
    row["priority"] = priority;
    row["direct_weights"] = {{"deref", w.deref}, {"memfunc", w.memfunc}};
    out.push_back(row);
  }
  return out;
}

ordered_json driver_spec_json(const DriverSpec& spec) {
  ordered_json j;
  j["driver"] = spec.driver_name;
  j["entries"] = spec.entries;
  ordered_json args = ordered_json::array();
  for (const auto& entry_plans : spec.plans) {
    ordered_json per_entry = ordered_json::array();
    for (const auto& plan : entry_plans) per_entry.push_back(plan_json(plan));
    args.push_back(per_entry);
  }
  j["args"] = args;
  ordered_json consts = ordered_json::array();
  for (const auto& c : spec.constants)
    consts.push_back({{"value", c.value}, {"width", c.width}});
  j["constants"] = consts;
  return j;
}

ordered_json exec_result_json(const ExecResult& r) {
  ordered_json j;
  j["status"] = r.ok ? "ok" : "crash";
  j["crash_kind"] = crash_kind_name(r.crash);
  j["crash_block"] = r.crash_block;
  j["blocks"] = std::vector<uint32_t>(r.blocks.begin(), r.blocks.end());
  j["path_hash"] = hex64(r.path_hash);
  j["consumed"] = r.consumed;
  j["exhausted"] = r.exhausted;
  j["live_leaks_pre_epilogue"] = r.live_leaks_pre_epilogue;
  j["live_program_after"] = r.live_program_after;
  j["unassigned_reads"] = r.unassigned_reads;
  j["steps"] = r.steps;
  return j;
}

ordered_json report_json(const CoverageReport& report) {
  ordered_json j;
  j["schema"] = 1;
  j["program"] = hex64(report.program_id);
  ordered_json drivers = ordered_json::object();
  for (const auto& [name, stats] : report.drivers) {
    ordered_json d;
    d["executions"] = stats.execs;
    d["hangs"] = stats.hangs;
    d["blocks"] = stats.blocks.size();
    d["block_ids"] = std::vector<uint32_t>(stats.blocks.begin(), stats.blocks.end());
    d["paths"] = stats.paths.size();
    ordered_json paths = ordered_json::array();
    for (uint64_t p : stats.paths) paths.push_back(hex64(p));
    d["path_ids"] = paths;
    ordered_json crashes = ordered_json::array();
    for (const auto& [sig, input] : stats.crashes) {
      crashes.push_back({{"kind", crash_kind_name(sig.kind)},
                         {"block", sig.block},
                         {"input", crash_kind_name(sig.kind) + std::string("_") +
                                       hex64(bytes_hash(input)) + ".bin"}});
    }
    d["crashes"] = crashes;
    drivers[name] = d;
  }
  j["drivers"] = drivers;
  j["totals"] = {{"executions", report.total_execs()},
                 {"blocks", report.total_blocks().size()},
                 {"paths", report.total_paths().size()},
                 {"bugs", report.total_bugs()}};
  j["wall_secs"] = report.wall_secs;
  return j;
}

PipelineConfig load_config_file(const std::string& path, std::vector<std::string>& errors) {
  PipelineConfig cfg;
  auto text = read_file(path);
  if (!text) {
    errors.push_back("cannot read config " + path);
    return cfg;
  }
  std::istringstream in(*text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("config line " + std::to_string(lineno) + ": expected key=value");
      continue;
    }
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "input")
        cfg.inputs.push_back(value);
      else if (key == "entry")
        cfg.entries.push_back(value);
      else if (key == "max_entries")
        cfg.max_entries = std::stoull(value);
      else if (key == "alloc_size")
        cfg.alloc_size = std::stoull(value);
      else if (key == "smoke_trials")
        cfg.smoke_trials = std::stoi(value);
      else if (key == "budget_execs")
        cfg.budget_execs = std::stoull(value);
      else if (key == "budget_secs")
        cfg.budget_secs = std::stod(value);
      else if (key == "seed")
        cfg.seed = std::stoull(value);
      else if (key == "workers")
        cfg.workers = std::stoi(value);
      else if (key == "out_dir")
        cfg.out_dir = value;
      else if (key == "composite")
        cfg.composite = value == "1" || value == "true";
      else if (key == "harvest")
        cfg.harvest = value == "1" || value == "true";
      else
        errors.push_back("config line " + std::to_string(lineno) + ": unknown key " + key);
    } catch (const std::exception&) {
      errors.push_back("config line " + std::to_string(lineno) + ": bad value for " + key);
    }
  }
  if (cfg.alloc_size < 8) errors.push_back("alloc_size must be >= 8");
  return cfg;
}

PipelineOutcome run_pipeline(const PipelineConfig& config) {
  PipelineOutcome outcome;
  ParseResult parsed = parse_inputs(config.inputs);
  if (!parsed.ok()) {
    outcome.exit_code = 1;
    outcome.diagnostics = parsed.diagnostics;
    return outcome;
  }
  const Program& base = *parsed.program;

  fs::create_directories(config.out_dir);
  fs::create_directories(fs::path(config.out_dir) / "drivers");
  fs::create_directories(fs::path(config.out_dir) / "crashes");

  // Entry selection: manual override, else top-N by priority.
  std::vector<std::string> entries = config.entries;
  PriorityMap priorities = function_priorities(base);
  if (entries.empty()) {
    for (const auto& [name, _] : locate_entries(base, config.max_entries))
      entries.push_back(name);
  }

  SynthOptions sopts;
  sopts.alloc_size = config.alloc_size;
  sopts.harvest = config.harvest;

  struct EntryRecord {
    std::string label;  // entry name, or joined names for composite
    DriverSpec spec;
    SmokeVerdict smoke;
  };
  std::vector<EntryRecord> records;

  // All drivers accumulate into one program so every report shares one
  // program identity.
  Program work = base;
  std::vector<std::string> valid_drivers;
  std::vector<HarvestedConst> dict;

  auto synth_one = [&](const std::vector<std::string>& entry_group) {
    EntryRecord rec;
    SynthResult sr = entry_group.size() == 1
                         ? synthesize_driver(work, entry_group[0], sopts)
                         : synthesize_composite_driver(work, entry_group, sopts);
    work = std::move(sr.program);
    rec.spec = std::move(sr.spec);
    rec.label = rec.spec.driver_name;
    records.push_back(std::move(rec));
  };

  try {
    if (config.composite && entries.size() >= 2) {
      synth_one(entries);
    } else {
      for (const auto& e : entries) synth_one({e});
    }
  } catch (const SynthError& e) {
    outcome.exit_code = 1;
    outcome.diagnostics.push_back({0, 0, e.what()});
    return outcome;
  }

  for (auto& rec : records) work = instrument_lazy_store(work, rec.spec.driver_name);

  RunOptions ropts;
  ropts.alloc_size = config.alloc_size;

  for (auto& rec : records) {
    rec.smoke = smoke_filter(work, rec.spec.driver_name, config.smoke_trials, config.seed,
                             ropts);
    if (rec.smoke.valid) {
      valid_drivers.push_back(rec.spec.driver_name);
      for (const auto& c : rec.spec.constants) {
        if (std::find(dict.begin(), dict.end(), c) == dict.end()) dict.push_back(c);
      }
    }
    // Per-driver artifacts: the full instrumented module (self-contained and
    // replayable), the pseudo-source, and the driver spec.
    fs::path dir = fs::path(config.out_dir) / "drivers";
    write_file(dir / (rec.spec.driver_name + ".mir"), render_module(work));
    write_file(dir / (rec.spec.driver_name + ".pseudo.txt"),
               emit_pseudo_source(rec.spec, work));
    write_file(dir / (rec.spec.driver_name + ".spec.json"),
               driver_spec_json(rec.spec).dump(2) + "\n");
  }

  ordered_json entry_rows = ordered_json::array();
  for (const auto& rec : records) {
    ordered_json row;
    row["entries"] = rec.spec.entries;
    row["driver"] = rec.spec.driver_name;
    ordered_json prio = ordered_json::array();
    for (const auto& e : rec.spec.entries) prio.push_back(priorities.at(e));
    row["priority"] = prio.size() == 1 ? prio[0] : prio;
    row["smoke"] = rec.smoke.valid ? "valid" : "invalid";
    if (!rec.smoke.valid) row["reason"] = crash_kind_name(rec.smoke.reason);
    entry_rows.push_back(row);
  }

  CoverageReport report;
  report.program_id = program_identity(work);
  if (!valid_drivers.empty()) {
    CampaignOptions copts;
    copts.budget_execs = config.budget_execs;
    copts.budget_secs = config.budget_secs;
    copts.seed = config.seed;
    copts.workers = config.workers;
    copts.dict = dict;
    copts.run = ropts;
    report = run_campaign(work, valid_drivers, copts);
    for (const auto& [driver, stats] : report.drivers) {
      for (const auto& [sig, input] : stats.crashes) {
        write_file(fs::path(config.out_dir) / "crashes" /
                       (crash_kind_name(sig.kind) + std::string("_") +
                        hex64(bytes_hash(input)) + ".bin"),
                   input);
      }
    }
  }

  ordered_json j = report_json(report);
  j["seed"] = config.seed;
  j["budget_execs"] = config.budget_execs;
  j["workers"] = config.workers;
  j["entries"] = entry_rows;
  write_file(fs::path(config.out_dir) / "report.json", j.dump(2) + "\n");

  outcome.report = std::move(j);
  outcome.instrumented = std::move(work);
  if (valid_drivers.empty()) outcome.exit_code = 2;
  return outcome;
}

}  // namespace mirfuzz
