#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "evtrojan/codec.hpp"
#include "evtrojan/error.hpp"
#include "evtrojan/evaluation.hpp"
#include "evtrojan/io.hpp"
#include "evtrojan/seed.hpp"
#include "report.hpp"

#ifndef EVTROJAN_VERSION
#define EVTROJAN_VERSION "0.0.0"
#endif

namespace evtrojan::cli {

namespace {

constexpr std::uint64_t kTagSplit = 1;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Pool size from EVT_THREADS, else the hardware concurrency.
unsigned worker_count() {
  if (const char* env = std::getenv("EVT_THREADS"); env && *env) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) throw UsageError("EVT_THREADS must be a positive integer");
    return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n) on the worker pool; the first exception wins.
template <class Fn>
void parallel_for(std::size_t n, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(worker_count(), std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

struct Manifest {
  explicit Manifest(std::string cmd) : command(std::move(cmd)) {}

  std::string command;
  json config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string started = utc_now();

  void write(const fs::path& path) const {
    json j = {{"command", command},
              {"config_digest", config_digest(config)},
              {"config", config},
              {"tool_version", EVTROJAN_VERSION},
              {"started", started},
              {"finished", utc_now()},
              {"inputs", inputs},
              {"outputs", outputs}};
    j["seed"] = seed ? json(*seed) : json(nullptr);
    write_json_file(path, j);
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_error, "cannot create " + dir.string() + ": " + ec.message());
}

std::vector<DiskSample> load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("not a dataset directory: " + dir.string());
  return read_dataset(dir);
}

GeneratorParams load_generator(fs::path path) {
  if (fs::is_directory(path)) path /= "generator.evtg";
  return decode_generator(read_file_bytes(path.string()));
}

std::map<std::string, fs::path> dumps_in(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".evtr") out[e.path().stem().string()] = e.path();
  return out;
}

json psnr_json(double v) {
  if (std::isnan(v)) return nullptr;
  return std::isinf(v) ? json("inf") : json(v);
}

fs::path sidecar(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

}  // namespace

void run_synth(const SynthOptions& o) {
  Manifest m("synth");
  DatasetRecipe recipe = recipe_from_json(read_json_file(o.config));
  if (o.seed) recipe.seed = *o.seed;
  m.config = to_json(recipe);
  m.seed = recipe.seed;
  m.inputs = {o.config.string()};

  const auto data = make_dataset(recipe);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(recipe.seed, kTagSplit));
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n = data.size(), n_train = n * 60 / 100, n_val = n * 20 / 100;
  const std::pair<const char*, std::pair<std::size_t, std::size_t>> splits[] = {
      {"train", {0, n_train}}, {"val", {n_train, n_train + n_val}}, {"test", {n_train + n_val, n}}};
  ensure_dir(o.out);
  for (const auto& [name, range] : splits) {
    std::vector<DiskSample> part;
    for (std::size_t k = range.first; k < range.second; ++k)
      part.push_back({sample_id(order[k]), data[order[k]], false});
    std::sort(part.begin(), part.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    write_dataset(o.out / name, part, false);
    m.outputs.push_back((o.out / name).string());
  }
  write_json_file(o.out / "recipe.json", m.config);
  m.write(o.out / "manifest.json");
}

void run_poison(const PoisonOptions& o) {
  Manifest m("poison");
  PoisonPolicy policy;
  policy.mode = poison_mode_from_string(o.mode);
  if (policy.mode == PoisonMode::mutable_ && !o.generator)
    throw UsageError("--generator is required in mutable mode");
  if (o.spec) policy.spec = trigger_spec_from_json(read_json_file(*o.spec));
  policy.spec.mode = policy.mode == PoisonMode::mutable_ ? TriggerMode::mutable_ : TriggerMode::immutable;
  if (!(o.rho >= 0.0 && o.rho <= 1.0)) throw UsageError("--rho must lie in [0, 1]");
  policy.rho = o.rho;
  policy.target = o.target;
  policy.seed = o.seed;
  policy.patch_value = o.patch_value;
  policy.spec.validate();
  m.config = to_json(policy);
  m.seed = o.seed;
  m.inputs = {o.in.string()};

  std::optional<GeneratorParams> generator;
  if (policy.mode == PoisonMode::mutable_) {
    generator = load_generator(*o.generator);
    m.inputs.push_back(o.generator->string());
  }
  const auto disk = load_dataset(o.in);
  const auto clean = samples_of(disk);
  const auto poisoned = build_poisoned_dataset(clean, policy, generator ? &*generator : nullptr);

  std::vector<DiskSample> out;
  out.reserve(poisoned.size());
  for (const auto& p : poisoned) out.push_back({disk[p.source].id, {p.stream, p.label}, p.poisoned});
  write_dataset(o.out, out, true);
  write_json_file(o.out / "poison.json", m.config);
  m.outputs = {o.out.string()};
  m.write(o.out / "manifest.json");
}

void run_represent(const RepresentOptions& o) {
  Manifest m("represent");
  ReprConfig cfg;
  cfg.method = method_from_string(o.method);
  cfg.bins = o.bins;
  cfg.tau = o.tau;
  cfg.tencode_dt = o.tencode_dt;
  cfg.measurement = measurement_from_string(o.measurement);
  cfg.validate();
  m.config = to_json(cfg);
  m.inputs = {o.in.string()};
  if (!fs::is_directory(o.in)) throw UsageError("not a dataset directory: " + o.in.string());

  ensure_dir(o.out);
  std::vector<DiskSample> disk;
  if (fs::exists(o.in / "labels.json")) {
    disk = read_dataset(o.in);
  }
  if (disk.empty()) std::fprintf(stderr, "warning: no event streams in %s\n", o.in.string().c_str());

  std::vector<double> seconds(disk.size());
  parallel_for(disk.size(), [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    const RepresentationTensor r = represent(disk[i].sample.stream, cfg);
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_file_atomic((o.out / (disk[i].id + ".evtr")).string(), encode_dump(r));
  });

  json times = json::object(), labels = json::object();
  for (std::size_t i = 0; i < disk.size(); ++i) {
    times[disk[i].id] = seconds[i];
    labels[disk[i].id] = disk[i].sample.label;
  }
  write_json_file(o.out / "times.json", times);
  write_json_file(o.out / "labels.json", labels);
  write_json_file(o.out / "repr.json", m.config);
  m.outputs = {o.out.string()};
  m.write(o.out / "manifest.json");
}

void run_train(const TrainOptions& o) {
  Manifest m("train");
  TrainConfig cfg = train_config_from_json(read_json_file(o.config));
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  m.config = to_json(cfg);
  m.seed = cfg.seed;
  m.inputs = {o.config.string(), o.data.string()};

  const auto disk = load_dataset(o.data);
  const auto samples = samples_of(disk);
  const TrainResult res = train_backdoor(samples, cfg);

  ensure_dir(o.out);
  write_file_atomic((o.out / "model.evtm").string(), encode_model(res.model));
  if (res.generator) write_file_atomic((o.out / "generator.evtg").string(), encode_generator(*res.generator));
  std::string history;
  for (const auto& h : res.history) history += to_json(h).dump() + "\n";
  write_file_atomic((o.out / "history.jsonl").string(), std::string_view(history));
  write_json_file(o.out / "config.json", m.config);
  m.outputs = {o.out.string()};
  m.write(o.out / "manifest.json");
}

void run_eval(const EvalOptions& o) {
  Manifest m("eval");
  if (!fs::is_directory(o.ckpt)) throw UsageError("not a checkpoint directory: " + o.ckpt.string());
  const TrainConfig cfg = train_config_from_json(read_json_file(o.ckpt / "config.json"));
  const nn::ModelParams model = decode_model(read_file_bytes((o.ckpt / "model.evtm").string()));
  const int target = o.target.value_or(cfg.poison.target);
  m.config = {{"train", to_json(cfg)}, {"target", target}};
  m.inputs = {o.ckpt.string(), o.clean.string(), o.poisoned.string()};

  const auto clean_disk = load_dataset(o.clean);
  const auto poisoned_disk = load_dataset(o.poisoned);
  const auto clean = samples_of(clean_disk);

  std::optional<PatchTrigger> patch;
  if (cfg.poison.mode == PoisonMode::patch_baseline) {
    patch = patch_from_spec(cfg.poison.spec);
    patch->value = cfg.poison.patch_value;
  }

  // Triggered samples are the flagged ones (all of them when nothing is
  // flagged); their true label comes from the clean sample with the same id.
  std::map<std::string, std::size_t> clean_index;
  for (std::size_t i = 0; i < clean_disk.size(); ++i) clean_index[clean_disk[i].id] = i;
  const bool any_flag = std::any_of(poisoned_disk.begin(), poisoned_disk.end(),
                                    [](const DiskSample& s) { return s.poisoned; });
  std::vector<LabeledStream> triggered;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (clean, triggered)
  for (const DiskSample& s : poisoned_disk) {
    if (any_flag && !s.poisoned) continue;
    LabeledStream t = s.sample;
    if (auto it = clean_index.find(s.id); it != clean_index.end()) {
      t.label = clean[it->second].label;
      pairs.push_back({it->second, triggered.size()});
    }
    triggered.push_back(std::move(t));
  }

  MetricReport report;
  report.target_class = target;
  report.cda = cda(model, cfg.repr, clean).rate;
  report.n_clean = clean.size();
  const RateResult a = asr(model, cfg.repr, triggered, target, patch);
  report.asr = a.rate;
  report.n_poisoned = a.total;

  std::vector<double> ps(pairs.size()), ss(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto c = represent(clean[pairs[k].first].stream, cfg.repr);
    auto p = represent(triggered[pairs[k].second].stream, cfg.repr);
    if (patch) p = apply_patch(p, *patch);
    ps[k] = psnr(c, p);
    ss[k] = ssim(c, p);
  });
  double psum = 0.0;
  std::size_t finite = 0;
  for (double v : ps)
    if (std::isfinite(v)) {
      psum += v;
      ++finite;
    }
  report.psnr_db = pairs.empty() ? NAN : finite ? psum / static_cast<double>(finite) : kPsnrIdentical;
  report.ssim = pairs.empty() ? NAN : std::accumulate(ss.begin(), ss.end(), 0.0) / static_cast<double>(ss.size());

  json j = to_json(report);
  j["psnr_db"] = psnr_json(report.psnr_db);
  if (o.out.has_parent_path()) ensure_dir(o.out.parent_path());
  write_json_file(o.out, j);
  m.outputs = {o.out.string()};
  m.write(sidecar(o.out));
}

void run_filter(const FilterOptions& o) {
  Manifest m("filter");
  StcConfig cfg;
  cfg.radius = o.radius;
  cfg.window = o.window;
  cfg.validate();
  m.config = to_json(cfg);
  m.inputs = {o.in.string()};

  auto disk = load_dataset(o.in);
  parallel_for(disk.size(), [&](std::size_t i) { disk[i].sample.stream = stc_filter(disk[i].sample.stream, cfg); });
  write_dataset(o.out, disk, fs::exists(o.in / "flags.json"));
  m.outputs = {o.out.string()};
  m.write(o.out / "manifest.json");
}

void run_stealth(const StealthOptions& o) {
  Manifest m("stealth");
  m.inputs = {o.clean.string(), o.poisoned.string()};
  const auto clean = dumps_in(o.clean), poisoned = dumps_in(o.poisoned);
  std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> pairs;
  for (const auto& [id, path] : clean)
    if (auto it = poisoned.find(id); it != poisoned.end()) pairs.push_back({id, {path, it->second}});
  if (pairs.empty()) throw Error(Errc::empty_dataset, "no paired representations");

  std::vector<double> ps(pairs.size()), ss(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto a = decode_dump(read_file_bytes(pairs[k].second.first.string()));
    const auto b = decode_dump(read_file_bytes(pairs[k].second.second.string()));
    ps[k] = psnr(a, b);
    ss[k] = ssim(a, b);
  });

  json per = json::object();
  double psum = 0.0;
  std::size_t finite = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    per[pairs[k].first] = {{"psnr_db", psnr_json(ps[k])}, {"ssim", ss[k]}};
    if (std::isfinite(ps[k])) {
      psum += ps[k];
      ++finite;
    }
  }
  const double mean_psnr = finite ? psum / static_cast<double>(finite) : kPsnrIdentical;
  const json j = {{"pairs", pairs.size()},
                  {"unpaired", clean.size() + poisoned.size() - 2 * pairs.size()},
                  {"psnr_db", psnr_json(mean_psnr)},
                  {"ssim", std::accumulate(ss.begin(), ss.end(), 0.0) / static_cast<double>(ss.size())},
                  {"per_sample", per}};
  if (o.out.has_parent_path()) ensure_dir(o.out.parent_path());
  write_json_file(o.out, j);
  m.config = json::object();
  m.outputs = {o.out.string()};
  m.write(sidecar(o.out));
}

void run_report(const ReportOptions& o) {
  Manifest m("report");
  std::vector<ReportRun> runs;
  for (const fs::path& p : o.in) {
    runs.push_back({p.stem().string(), read_json_file(p)});
    m.inputs.push_back(p.string());
  }
  ensure_dir(o.out);
  struct Chart {
    const char* metric;
    const char* title;
    const char* file;
  };
  for (const Chart& c : {Chart{"cda", "Clean-data accuracy", "cda.svg"},
                         Chart{"asr", "Attack success rate", "asr.svg"},
                         Chart{"psnr_db", "PSNR (dB)", "psnr.svg"}}) {
    const fs::path path = o.out / c.file;
    write_file_atomic(path.string(), std::string_view(bar_chart_svg(runs, c.metric, c.title)));
    m.outputs.push_back(path.string());
  }
  m.config = json::object();
  m.write(o.out / "manifest.json");
}

}  // namespace evtrojan::cli
