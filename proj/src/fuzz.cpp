#include "mirfuzz/fuzz.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include "mirfuzz/print.hpp"

namespace mirfuzz {

namespace {

uint64_t pick(std::mt19937_64& rng, uint64_t n) { return n == 0 ? 0 : rng() % n; }

// Stream derivation for per-worker RNGs (splitmix64 finalizer).
uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

const std::vector<HarvestedConst>& builtin_constants() {
  static const std::vector<HarvestedConst> k = {
      {0, 1}, {1, 1}, {0xFF, 1}, {0x7FFFFFFF, 4}};
  return k;
}

Bytes insert_byte(const Bytes& in, std::mt19937_64& rng, size_t max_size) {
  Bytes out = in;
  if (out.size() >= max_size) return out;
  size_t pos = pick(rng, out.size() + 1);
  out.insert(out.begin() + pos, static_cast<uint8_t>(rng()));
  return out;
}

}  // namespace

Bytes mutate(const Bytes& input, std::mt19937_64& rng, const std::vector<Bytes>& corpus,
             const std::vector<HarvestedConst>& dict, size_t max_size) {
  int op = static_cast<int>(pick(rng, 7));
  switch (op) {
    case 0: {  // bit flip
      if (input.empty()) return insert_byte(input, rng, max_size);
      Bytes out = input;
      size_t pos = pick(rng, out.size());
      out[pos] ^= static_cast<uint8_t>(1u << pick(rng, 8));
      return out;
    }
    case 1: {  // byte set
      if (input.empty()) return insert_byte(input, rng, max_size);
      Bytes out = input;
      out[pick(rng, out.size())] = static_cast<uint8_t>(rng());
      return out;
    }
    case 2:  // byte insert
      return insert_byte(input, rng, max_size);
    case 3: {  // byte delete
      if (input.empty()) return insert_byte(input, rng, max_size);
      Bytes out = input;
      out.erase(out.begin() + pick(rng, out.size()));
      return out;
    }
    case 4: {  // block duplicate
      if (input.empty()) return insert_byte(input, rng, max_size);
      Bytes out = input;
      size_t start = pick(rng, out.size());
      size_t len = 1 + pick(rng, std::min<size_t>(out.size() - start, 32));
      Bytes block(out.begin() + start, out.begin() + start + len);
      size_t pos = pick(rng, out.size() + 1);
      out.insert(out.begin() + pos, block.begin(), block.end());
      if (out.size() > max_size) out.resize(max_size);
      return out;
    }
    case 5: {  // splice with a corpus input
      if (corpus.empty()) return insert_byte(input, rng, max_size);
      const Bytes& other = corpus[pick(rng, corpus.size())];
      if (input.empty() && other.empty()) return insert_byte(input, rng, max_size);
      size_t head = pick(rng, input.size() + 1);
      size_t tail = pick(rng, other.size() + 1);
      Bytes out(input.begin(), input.begin() + head);
      out.insert(out.end(), other.end() - tail, other.end());
      if (out.size() > max_size) out.resize(max_size);
      return out;
    }
    default: {  // interesting-constant overwrite
      std::vector<HarvestedConst> pool = builtin_constants();
      pool.insert(pool.end(), dict.begin(), dict.end());
      const HarvestedConst& c = pool[pick(rng, pool.size())];
      size_t w = static_cast<size_t>(c.width);
      Bytes out = input;
      if (out.size() < w) out.assign(w, 0);
      // Width-aligned window; lazily materialized scalars sit at aligned
      // input offsets, so aligned overwrites can actually reach them.
      size_t slots = (out.size() - w) / w + 1;
      size_t off = pick(rng, slots) * w;
      for (size_t i = 0; i < w; ++i)
        out[off + i] = static_cast<uint8_t>(c.value >> (8 * i));
      return out;
    }
  }
}

SmokeVerdict smoke_filter(const Program& instrumented, const std::string& driver,
                          int trials, uint64_t seed, const RunOptions& run_opts) {
  Interpreter interp(instrumented);
  std::mt19937_64 rng(mix(seed, 0x5eed));
  for (int t = 0; t < trials; ++t) {
    Bytes input;
    if (t > 0) {
      input.resize(pick(rng, 65));
      for (auto& b : input) b = static_cast<uint8_t>(rng());
    }
    ExecResult r = interp.run(driver, input, run_opts);
    if (!r.ok && r.crash != CrashKind::StepLimit) return {false, r.crash};
  }
  return {true, CrashKind::None};
}

uint64_t CoverageReport::total_execs() const {
  uint64_t n = 0;
  for (const auto& [_, d] : drivers) n += d.execs;
  return n;
}

std::set<uint32_t> CoverageReport::total_blocks() const {
  std::set<uint32_t> s;
  for (const auto& [_, d] : drivers) s.insert(d.blocks.begin(), d.blocks.end());
  return s;
}

std::set<uint64_t> CoverageReport::total_paths() const {
  std::set<uint64_t> s;
  for (const auto& [_, d] : drivers) s.insert(d.paths.begin(), d.paths.end());
  return s;
}

uint64_t CoverageReport::total_bugs() const {
  std::set<CrashSignature> sigs;
  for (const auto& [_, d] : drivers) {
    for (const auto& [sig, _i] : d.crashes) sigs.insert(sig);
  }
  return sigs.size();
}

CoverageReport merge_reports(const CoverageReport& a, const CoverageReport& b) {
  if (a.program_id != b.program_id)
    throw ReportMismatch("cannot merge reports for different programs");
  CoverageReport out = a;
  out.wall_secs += b.wall_secs;
  for (const auto& [name, stats] : b.drivers) {
    DriverStats& d = out.drivers[name];
    d.blocks.insert(stats.blocks.begin(), stats.blocks.end());
    d.paths.insert(stats.paths.begin(), stats.paths.end());
    for (const auto& [sig, input] : stats.crashes) d.crashes.emplace(sig, input);
    d.execs += stats.execs;
    d.hangs += stats.hangs;
  }
  return out;
}

uint64_t program_identity(const Program& p) {
  std::string text = render_module(p);
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

struct WorkerTask {
  const Program* program;
  std::string driver;
  uint64_t budget_execs;
  std::optional<double> budget_secs;
  uint64_t rng_seed;
  const CampaignOptions* opts;
};

DriverStats fuzz_worker(const WorkerTask& task, double* wall_out) {
  const CampaignOptions& opts = *task.opts;
  Interpreter interp(*task.program);
  std::mt19937_64 rng(task.rng_seed);
  DriverStats stats;

  std::vector<Bytes> corpus;
  std::vector<Bytes> pending{Bytes{}, Bytes(64, 0)};
  pending.insert(pending.end(), opts.seed_inputs.begin(), opts.seed_inputs.end());

  auto start = std::chrono::steady_clock::now();
  auto out_of_budget = [&]() {
    if (task.budget_secs) {
      double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      return elapsed >= *task.budget_secs;
    }
    return stats.execs >= task.budget_execs;
  };

  auto execute_one = [&](const Bytes& input) {
    ExecResult r = interp.run(task.driver, input, opts.run);
    ++stats.execs;
    bool novel = false;
    for (uint32_t b : r.blocks) {
      if (stats.blocks.insert(b).second) novel = true;
    }
    if (stats.paths.insert(r.path_hash).second) novel = true;
    if (!r.ok) {
      if (r.crash == CrashKind::StepLimit)
        ++stats.hangs;
      else
        stats.crashes.emplace(CrashSignature{r.crash, r.crash_block}, input);
    }
    if (novel) corpus.push_back(input);
    if (opts.observer) opts.observer(task.driver, input, r);
  };

  for (const auto& seed : pending) {
    if (out_of_budget()) break;
    size_t before = corpus.size();
    execute_one(seed);
    // Seeds stay in the corpus even when they add no coverage; the zero seed
    // is what gives mutations room to reach beyond the first few bytes.
    if (corpus.size() == before) corpus.push_back(seed);
  }
  while (!out_of_budget()) {
    const Bytes& base = corpus.empty() ? pending[0] : corpus[pick(rng, corpus.size())];
    Bytes mutated = mutate(base, rng, corpus, opts.dict, opts.max_input);
    execute_one(mutated);
  }
  if (wall_out && task.budget_secs) {
    *wall_out =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return stats;
}

}  // namespace

CoverageReport run_campaign(const Program& instrumented,
                            const std::vector<std::string>& drivers,
                            const CampaignOptions& opts) {
  if (drivers.empty()) throw std::invalid_argument("run_campaign: empty driver list");
  CoverageReport report;
  report.program_id = program_identity(instrumented);
  for (const auto& d : drivers) report.drivers[d];  // present even with zero budget

  size_t n_drivers = drivers.size();
  int workers = std::max(1, opts.workers);

  for (size_t di = 0; di < n_drivers; ++di) {
    uint64_t driver_budget =
        opts.budget_execs / n_drivers + (di < opts.budget_execs % n_drivers ? 1 : 0);
    std::vector<WorkerTask> tasks;
    for (int w = 0; w < workers; ++w) {
      WorkerTask t;
      t.program = &instrumented;
      t.driver = drivers[di];
      t.budget_execs = driver_budget / workers +
                       (static_cast<uint64_t>(w) < driver_budget % workers ? 1 : 0);
      t.budget_secs = opts.budget_secs;
      t.rng_seed = mix(mix(opts.seed, di), static_cast<uint64_t>(w));
      t.opts = &opts;
      tasks.push_back(std::move(t));
    }
    std::vector<DriverStats> results(tasks.size());
    std::vector<double> walls(tasks.size(), 0.0);
    if (workers == 1) {
      results[0] = fuzz_worker(tasks[0], &walls[0]);
    } else {
      std::vector<std::thread> threads;
      for (size_t w = 0; w < tasks.size(); ++w) {
        threads.emplace_back(
            [&, w] { results[w] = fuzz_worker(tasks[w], &walls[w]); });
      }
      for (auto& t : threads) t.join();
    }
    // Merge worker shards in worker order.
    for (size_t w = 0; w < results.size(); ++w) {
      CoverageReport shard;
      shard.program_id = report.program_id;
      shard.drivers[drivers[di]] = std::move(results[w]);
      shard.wall_secs = walls[w];
      report = merge_reports(report, shard);
    }
  }
  return report;
}

}  // namespace mirfuzz
