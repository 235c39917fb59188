#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mirfuzz/fuzz.hpp"
#include "mirfuzz/locator.hpp"
#include "mirfuzz/parse.hpp"
#include "mirfuzz/pipeline.hpp"
#include "mirfuzz/print.hpp"
#include "mirfuzz/synth.hpp"

namespace fs = std::filesystem;
using namespace mirfuzz;
using nlohmann::ordered_json;

namespace {

void print_diagnostics(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags)
    std::cerr << "error:" << d.line << ":" << d.col << ": " << d.message << "\n";
}

std::optional<Program> load_program(const std::vector<std::string>& paths) {
  ParseResult parsed = parse_inputs(paths);
  if (!parsed.ok()) {
    print_diagnostics(parsed.diagnostics);
    return std::nullopt;
  }
  return std::move(parsed.program);
}

std::optional<Bytes> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  return Bytes(s.begin(), s.end());
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// Dictionary for a pre-synthesized module: constants harvested from the
// functions each driver calls directly.
std::vector<HarvestedConst> dict_for_drivers(const Program& p,
                                             const std::vector<std::string>& drivers) {
  std::vector<HarvestedConst> dict;
  for (const auto& dname : drivers) {
    const Function* driver = p.find_func(dname);
    if (!driver) continue;
    for (const auto& b : driver->blocks) {
      for (const auto& inst : b.insts) {
        if (inst.op != Opcode::Call || inst.indirect_call) continue;
        if (inst.callee.rfind("__", 0) == 0) continue;
        const Function* callee = p.find_func(inst.callee);
        if (!callee) continue;
        for (const auto& c : harvest_comparison_constants(*callee, p).all) {
          if (std::find(dict.begin(), dict.end(), c) == dict.end()) dict.push_back(c);
        }
      }
    }
  }
  return dict;
}

int cmd_analyze(const std::vector<std::string>& inputs, size_t max_number,
                const std::string& json_out) {
  auto program = load_program(inputs);
  if (!program) return 1;
  ordered_json ranking = ranking_json(*program, max_number);
  std::string text = ranking.dump(2) + "\n";
  std::cout << text;
  if (!json_out.empty()) write_text(json_out, text);
  return 0;
}

int cmd_synth(const std::string& input, std::vector<std::string> entries, size_t top,
              uint64_t alloc_size, bool no_harvest, const std::string& out,
              const std::string& pseudo, const std::string& spec_out) {
  auto program = load_program({input});
  if (!program) return 1;
  if (entries.empty()) {
    for (const auto& [name, _] : locate_entries(*program, top)) entries.push_back(name);
    if (entries.empty()) {
      std::cerr << "error: module has no functions\n";
      return 1;
    }
  }
  SynthOptions opts;
  opts.alloc_size = alloc_size;
  opts.harvest = !no_harvest;
  try {
    SynthResult result = entries.size() >= 2
                             ? synthesize_composite_driver(*program, entries, opts)
                             : synthesize_driver(*program, entries[0], opts);
    Program instrumented = instrument_lazy_store(result.program, result.spec.driver_name);
    write_text(out, render_module(instrumented));
    if (!pseudo.empty()) write_text(pseudo, emit_pseudo_source(result.spec, instrumented));
    std::string spec_path = spec_out.empty() ? out + ".spec.json" : spec_out;
    write_text(spec_path, driver_spec_json(result.spec).dump(2) + "\n");
    std::cout << "driver " << result.spec.driver_name << " written to " << out << "\n";
    return 0;
  } catch (const SynthError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_exec(const std::string& input, const std::string& driver,
             const std::string& input_file, bool trace, uint64_t alloc_size) {
  auto program = load_program({input});
  if (!program) return 1;
  Bytes data;
  if (!input_file.empty()) {
    auto bytes = read_bytes(input_file);
    if (!bytes) {
      std::cerr << "error: cannot read " << input_file << "\n";
      return 1;
    }
    data = std::move(*bytes);
  }
  Interpreter interp(*program);
  RunOptions opts;
  opts.alloc_size = alloc_size;
  opts.collect_trace = trace;
  ExecResult r = interp.run(driver, data, opts);
  if (trace) {
    for (uint32_t b : r.trace) std::cout << "block " << b << "\n";
  }
  std::cout << exec_result_json(r).dump(2) << "\n";
  return 0;
}

int cmd_fuzz(const std::string& input, std::vector<std::string> drivers,
             uint64_t budget_execs, double budget_secs, uint64_t seed, int workers,
             const std::string& corpus_dir, const std::string& report_file,
             const std::string& crashes_dir) {
  auto program = load_program({input});
  if (!program) return 1;
  if (drivers.empty()) {
    for (const auto& f : program->funcs) {
      if (f.name.rfind("__driver_", 0) == 0) drivers.push_back(f.name);
    }
    if (drivers.empty()) {
      std::cerr << "error: no __driver_* functions in module; run synth first\n";
      return 1;
    }
  }
  CampaignOptions opts;
  opts.budget_execs = budget_execs;
  if (budget_secs > 0) opts.budget_secs = budget_secs;
  opts.seed = seed;
  opts.workers = workers;
  opts.dict = dict_for_drivers(*program, drivers);
  if (!corpus_dir.empty() && fs::is_directory(corpus_dir)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(corpus_dir)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      if (auto b = read_bytes(f.string())) opts.seed_inputs.push_back(std::move(*b));
    }
  }
  CoverageReport report = run_campaign(*program, drivers, opts);
  if (!crashes_dir.empty()) {
    fs::create_directories(crashes_dir);
    for (const auto& [dname, stats] : report.drivers) {
      for (const auto& [sig, in] : stats.crashes) {
        uint64_t h = 0xcbf29ce484222325ull;
        for (uint8_t c : in) {
          h ^= c;
          h *= 0x100000001b3ull;
        }
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%016llx.bin", crash_kind_name(sig.kind),
                      static_cast<unsigned long long>(h));
        std::ofstream out(fs::path(crashes_dir) / name, std::ios::binary);
        out.write(reinterpret_cast<const char*>(in.data()),
                  static_cast<std::streamsize>(in.size()));
      }
    }
  }
  std::string text = report_json(report).dump(2) + "\n";
  std::cout << text;
  if (!report_file.empty()) write_text(report_file, text);
  return 0;
}

int cmd_report(const PipelineConfig& config) {
  PipelineOutcome outcome = run_pipeline(config);
  if (outcome.exit_code == 1) {
    print_diagnostics(outcome.diagnostics);
    return 1;
  }
  std::cout << outcome.report.dump(2) << "\n";
  if (outcome.exit_code == 2)
    std::cerr << "error: every synthesized driver was filtered as invalid\n";
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mini-IR fuzz-driver synthesis workbench"};
  app.require_subcommand(1);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "rank entry functions by priority");
  std::vector<std::string> an_inputs;
  size_t an_max = 10;
  std::string an_json;
  analyze->add_option("inputs", an_inputs, "input .mir modules")->required();
  analyze->add_option("--max", an_max, "entries to list");
  analyze->add_option("--json", an_json, "also write the ranking to this file");

  // synth
  auto* synth = app.add_subcommand("synth", "synthesize a fuzz driver");
  std::string sy_input, sy_out = "driver.mir", sy_pseudo, sy_spec;
  std::vector<std::string> sy_entries;
  size_t sy_top = 1;
  uint64_t sy_alloc = 64;
  bool sy_no_harvest = false;
  synth->add_option("input", sy_input, "input .mir module")->required();
  synth->add_option("--entry", sy_entries, "entry function (repeat for a composite driver)");
  synth->add_option("--top", sy_top, "pick the top-N entry when --entry is absent");
  synth->add_option("--alloc-size", sy_alloc, "minimum pointer allocation size");
  synth->add_flag("--no-harvest", sy_no_harvest, "disable comparison-constant harvesting");
  synth->add_option("--out", sy_out, "instrumented output module");
  synth->add_option("--pseudo", sy_pseudo, "write a pseudo-C rendering here");
  synth->add_option("--spec", sy_spec, "driver spec JSON path (default <out>.spec.json)");

  // exec
  auto* exec = app.add_subcommand("exec", "replay a single input against a driver");
  std::string ex_input, ex_driver, ex_file;
  bool ex_trace = false;
  uint64_t ex_alloc = 64;
  exec->add_option("module", ex_input, "instrumented .mir module")->required();
  exec->add_option("--driver", ex_driver, "driver function name")->required();
  exec->add_option("--input", ex_file, "input file (empty input when omitted)");
  exec->add_flag("--trace", ex_trace, "print the block trace");
  exec->add_option("--alloc-size", ex_alloc, "minimum pointer allocation size");

  // fuzz
  auto* fuzz = app.add_subcommand("fuzz", "run a coverage-guided campaign");
  std::string fz_input, fz_corpus, fz_report, fz_crashes = "crashes";
  std::vector<std::string> fz_drivers;
  uint64_t fz_budget = 10000, fz_seed = 1;
  double fz_secs = 0;
  int fz_workers = 1;
  fuzz->add_option("input", fz_input, "instrumented .mir module with drivers")->required();
  fuzz->add_option("--driver", fz_drivers, "driver to fuzz (default: every __driver_*)");
  fuzz->add_option("--budget-execs", fz_budget, "total executions");
  fuzz->add_option("--budget-secs", fz_secs, "wall-clock budget in seconds");
  fuzz->add_option("--seed", fz_seed, "campaign seed");
  fuzz->add_option("--workers", fz_workers, "independent workers");
  fuzz->add_option("--corpus", fz_corpus, "seed corpus directory");
  fuzz->add_option("--report", fz_report, "write the report JSON here");
  fuzz->add_option("--crashes", fz_crashes, "crash input directory");

  // report (full pipeline); `pipeline` is an alias
  auto* report = app.add_subcommand("report", "run the whole pipeline and emit a report");
  report->alias("pipeline");
  std::string rp_config;
  PipelineConfig cfg;
  bool rp_no_harvest = false;
  report->add_option("--config", rp_config, "key=value configuration file");
  report->add_option("--input", cfg.inputs, "input .mir modules");
  report->add_option("--entry", cfg.entries, "manual entry override");
  report->add_option("--max-entries", cfg.max_entries, "entries to recommend");
  report->add_option("--alloc-size", cfg.alloc_size, "minimum pointer allocation size");
  report->add_option("--smoke-trials", cfg.smoke_trials, "smoke filter trials");
  report->add_option("--budget-execs", cfg.budget_execs, "total executions");
  double rp_secs = 0;
  report->add_option("--budget-secs", rp_secs, "wall-clock budget in seconds");
  report->add_option("--seed", cfg.seed, "campaign seed");
  report->add_option("--workers", cfg.workers, "independent workers");
  report->add_option("--out", cfg.out_dir, "output directory");
  report->add_flag("--no-harvest", rp_no_harvest, "disable comparison-constant harvesting");
  report->add_flag("--composite", cfg.composite, "one composite driver over all entries");

  CLI11_PARSE(app, argc, argv);

  if (analyze->parsed()) return cmd_analyze(an_inputs, an_max, an_json);
  if (synth->parsed())
    return cmd_synth(sy_input, sy_entries, sy_top, sy_alloc, sy_no_harvest, sy_out,
                     sy_pseudo, sy_spec);
  if (exec->parsed()) return cmd_exec(ex_input, ex_driver, ex_file, ex_trace, ex_alloc);
  if (fuzz->parsed())
    return cmd_fuzz(fz_input, fz_drivers, fz_budget, fz_secs, fz_seed, fz_workers,
                    fz_corpus, fz_report, fz_crashes);
  if (report->parsed()) {
    if (!rp_config.empty()) {
      std::vector<std::string> errors;
      PipelineConfig file_cfg = load_config_file(rp_config, errors);
      if (!errors.empty()) {
        for (const auto& e : errors) std::cerr << "error: " << e << "\n";
        return 1;
      }
      // Command-line inputs/entries extend the file; scalar flags passed on
      // the command line win.
      for (const auto& i : cfg.inputs) file_cfg.inputs.push_back(i);
      for (const auto& e : cfg.entries) file_cfg.entries.push_back(e);
      if (report->count("--max-entries")) file_cfg.max_entries = cfg.max_entries;
      if (report->count("--alloc-size")) file_cfg.alloc_size = cfg.alloc_size;
      if (report->count("--smoke-trials")) file_cfg.smoke_trials = cfg.smoke_trials;
      if (report->count("--budget-execs")) file_cfg.budget_execs = cfg.budget_execs;
      if (report->count("--seed")) file_cfg.seed = cfg.seed;
      if (report->count("--workers")) file_cfg.workers = cfg.workers;
      if (report->count("--out")) file_cfg.out_dir = cfg.out_dir;
      if (report->count("--composite")) file_cfg.composite = cfg.composite;
      if (rp_no_harvest) file_cfg.harvest = false;
      if (rp_secs > 0) file_cfg.budget_secs = rp_secs;
      return cmd_report(file_cfg);
    }
    if (rp_no_harvest) cfg.harvest = false;
    if (rp_secs > 0) cfg.budget_secs = rp_secs;
    if (cfg.inputs.empty()) {
      std::cerr << "error: no inputs (use --input or --config)\n";
      return 1;
    }
    return cmd_report(cfg);
  }
  return 0;
}
