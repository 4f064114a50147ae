#include "evtrojan/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "evtrojan/codec.hpp"
#include "evtrojan/error.hpp"

namespace evtrojan {

namespace {

// Reads known keys out of a JSON object and rejects leftovers.
class Fields {
 public:
  Fields(const json& j, std::string what) : j_(j), what_(std::move(what)) {
    if (!j_.is_object()) throw Error(Errc::config_invalid, what_ + " must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw Error(Errc::config_invalid, what_ + "." + key + ": " + e.what());
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw Error(Errc::config_invalid, what_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string what_;
  std::set<std::string> seen_;
};

}  // namespace

json to_json(const SceneConfig& c) {
  json shapes = json::array();
  for (const MovingShape& s : c.shapes)
    shapes.push_back({{"kind", std::string(to_string(s.kind))}, {"size", s.size}, {"vx", s.vx},
                      {"vy", s.vy}, {"x0", s.x0}, {"y0", s.y0}});
  return {{"width", c.geometry.width}, {"height", c.geometry.height}, {"shapes", shapes},
          {"frames", c.frames}, {"sigma", c.sigma}, {"noise_rate", c.noise_rate},
          {"background", c.background}, {"foreground", c.foreground}, {"seed", c.seed}};
}

SceneConfig scene_from_json(const json& j) {
  SceneConfig c;
  Fields f(j, "scene");
  f.get("width", c.geometry.width);
  f.get("height", c.geometry.height);
  f.get("frames", c.frames);
  f.get("sigma", c.sigma);
  f.get("noise_rate", c.noise_rate);
  f.get("background", c.background);
  f.get("foreground", c.foreground);
  f.get("seed", c.seed);
  if (const json* shapes = f.sub("shapes")) {
    if (!shapes->is_array()) throw Error(Errc::config_invalid, "scene.shapes must be an array");
    for (const json& sj : *shapes) {
      MovingShape s;
      std::string kind = "square";
      Fields sf(sj, "scene.shapes[]");
      sf.get("kind", kind);
      sf.get("size", s.size);
      sf.get("vx", s.vx);
      sf.get("vy", s.vy);
      sf.get("x0", s.x0);
      sf.get("y0", s.y0);
      sf.finish();
      s.kind = shape_kind_from_string(kind);
      c.shapes.push_back(s);
    }
  }
  f.finish();
  validate_config(c);
  return c;
}

json to_json(const DatasetRecipe& r) {
  return {{"width", r.geometry.width}, {"height", r.geometry.height}, {"samples", r.samples},
          {"classes", r.classes}, {"frames", r.frames}, {"sigma", r.sigma},
          {"noise_rate", r.noise_rate}, {"shape_size", r.shape_size}, {"speed", r.speed},
          {"heading_jitter", r.heading_jitter}, {"seed", r.seed}};
}

DatasetRecipe recipe_from_json(const json& j) {
  DatasetRecipe r;
  Fields f(j, "scene");
  f.get("width", r.geometry.width);
  f.get("height", r.geometry.height);
  f.get("samples", r.samples);
  f.get("classes", r.classes);
  f.get("frames", r.frames);
  f.get("sigma", r.sigma);
  f.get("noise_rate", r.noise_rate);
  f.get("shape_size", r.shape_size);
  f.get("speed", r.speed);
  f.get("heading_jitter", r.heading_jitter);
  f.get("seed", r.seed);
  f.finish();
  if (r.geometry.width < 1 || r.geometry.height < 1 || r.geometry.width > 256 ||
      r.geometry.height > 256)
    throw Error(Errc::config_invalid, "geometry must lie in 1..256 per side");
  if (r.frames < 2 || !(r.sigma > 0.0) || r.samples < 1 || !(r.shape_size > 0.0))
    throw Error(Errc::config_invalid, "frames >= 2, sigma > 0, samples >= 1, shape_size > 0");
  return r;
}

json to_json(const TriggerSpec& s) {
  return {{"origin_x", s.origin_x}, {"origin_y", s.origin_y}, {"height", s.height},
          {"width", s.width}, {"m", s.m}, {"alpha", s.alpha}, {"beta", s.beta},
          {"mode", s.mode == TriggerMode::immutable ? "immutable" : "mutable"}};
}

TriggerSpec trigger_spec_from_json(const json& j) {
  TriggerSpec s;
  std::string mode = "immutable";
  Fields f(j, "trigger");
  f.get("origin_x", s.origin_x);
  f.get("origin_y", s.origin_y);
  f.get("height", s.height);
  f.get("width", s.width);
  f.get("m", s.m);
  f.get("alpha", s.alpha);
  f.get("beta", s.beta);
  f.get("mode", mode);
  f.finish();
  if (mode == "immutable") s.mode = TriggerMode::immutable;
  else if (mode == "mutable") s.mode = TriggerMode::mutable_;
  else throw Error(Errc::config_invalid, "trigger.mode must be immutable or mutable");
  s.validate();
  return s;
}

json to_json(const LossWeights& w) { return {{"lambda1", w.lambda1}, {"lambda2", w.lambda2}}; }

LossWeights loss_weights_from_json(const json& j) {
  LossWeights w;
  Fields f(j, "loss_weights");
  f.get("lambda1", w.lambda1);
  f.get("lambda2", w.lambda2);
  f.finish();
  if (w.lambda1 < 0.0 || w.lambda2 < 0.0) throw Error(Errc::config_invalid, "loss weights must be >= 0");
  return w;
}

json to_json(const ReprConfig& c) {
  return {{"method", std::string(to_string(c.method))}, {"bins", c.bins}, {"tau", c.tau},
          {"tencode_dt", c.tencode_dt}, {"measurement", std::string(to_string(c.measurement))}};
}

ReprConfig repr_from_json(const json& j) {
  ReprConfig c;
  std::string method(to_string(c.method)), measurement(to_string(c.measurement));
  Fields f(j, "repr");
  f.get("method", method);
  f.get("bins", c.bins);
  f.get("tau", c.tau);
  f.get("tencode_dt", c.tencode_dt);
  f.get("measurement", measurement);
  f.finish();
  c.method = method_from_string(method);
  c.measurement = measurement_from_string(measurement);
  c.validate();
  return c;
}

json to_json(const StcConfig& c) { return {{"radius", c.radius}, {"window", c.window}}; }

StcConfig stc_from_json(const json& j) {
  StcConfig c;
  Fields f(j, "stc");
  f.get("radius", c.radius);
  f.get("window", c.window);
  f.finish();
  c.validate();
  return c;
}

json to_json(const PoisonPolicy& p) {
  json j = {{"rho", p.rho}, {"target", p.target}, {"mode", std::string(to_string(p.mode))},
            {"spec", to_json(p.spec)}, {"seed", p.seed}};
  j["patch_value"] = p.patch_value ? json(*p.patch_value) : json(nullptr);
  return j;
}

PoisonPolicy poison_from_json(const json& j) {
  PoisonPolicy p;
  std::string mode(to_string(p.mode));
  Fields f(j, "poison");
  f.get("rho", p.rho);
  f.get("target", p.target);
  f.get("mode", mode);
  f.get("seed", p.seed);
  if (const json* v = f.sub("patch_value"); v && !v->is_null()) p.patch_value = v->get<double>();
  if (const json* spec = f.sub("spec")) p.spec = trigger_spec_from_json(*spec);
  f.finish();
  p.mode = poison_mode_from_string(mode);
  if (!(p.rho >= 0.0 && p.rho <= 1.0)) throw Error(Errc::config_invalid, "rho must lie in [0, 1]");
  return p;
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size}, {"epochs", c.epochs}, {"classes", c.classes},
          {"hidden", c.hidden}, {"pooled", c.pooled}, {"loss_weights", to_json(c.loss_weights)},
          {"lr_classifier", c.lr_classifier}, {"lr_generator", c.lr_generator},
          {"momentum", c.momentum}, {"lr_decay", c.lr_decay}, {"train_omega", c.train_omega},
          {"standardize_input", c.standardize_input},
          {"input_variance_floor", c.input_variance_floor}, {"input_clip", c.input_clip}, {"repr", to_json(c.repr)}, {"poison", to_json(c.poison)}, {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  Fields f(j, "train");
  f.get("batch_size", c.batch_size);
  f.get("epochs", c.epochs);
  f.get("classes", c.classes);
  f.get("hidden", c.hidden);
  f.get("pooled", c.pooled);
  f.get("lr_classifier", c.lr_classifier);
  f.get("lr_generator", c.lr_generator);
  f.get("momentum", c.momentum);
  f.get("lr_decay", c.lr_decay);
  f.get("train_omega", c.train_omega);
  f.get("standardize_input", c.standardize_input);
  f.get("input_variance_floor", c.input_variance_floor);
  f.get("input_clip", c.input_clip);
  f.get("seed", c.seed);
  if (const json* w = f.sub("loss_weights")) c.loss_weights = loss_weights_from_json(*w);
  if (const json* r = f.sub("repr")) c.repr = repr_from_json(*r);
  if (const json* p = f.sub("poison")) c.poison = poison_from_json(*p);
  f.sub("train_data");  // consumed by the CLI
  f.finish();
  c.validate();
  return c;
}

json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch}, {"clean_loss", r.clean_loss}, {"poison_loss", r.poison_loss},
          {"trigger_loss", r.trigger_loss}, {"lr", r.lr}, {"clean_samples", r.clean_samples},
          {"poisoned_samples", r.poisoned_samples}};
}

json to_json(const MetricReport& r) {
  json j = {{"cda", r.cda}, {"asr", r.asr}, {"ssim", r.ssim}, {"n_clean", r.n_clean},
            {"n_poisoned", r.n_poisoned}, {"target_class", r.target_class}};
  j["psnr_db"] = std::isinf(r.psnr_db) ? json("inf") : json(r.psnr_db);
  return j;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::config_invalid, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  write_file_atomic(path.string(), j.dump(2) + "\n");
}

std::string config_digest(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

namespace {

class ByteWriter {
 public:
  void magic(const char* m) { bytes_.insert(bytes_.end(), m, m + 4); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(std::span<const double> values) {
    for (double d : values) {
      const auto v = std::bit_cast<std::uint64_t>(d);
      for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  void magic(const char* m) {
    need(4);
    if (std::memcmp(bytes_.data() + off_, m, 4) != 0)
      throw Error(Errc::format_error, std::string("bad magic, expected ") + m);
    off_ += 4;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[off_ + i]} << (8 * i);
    off_ += 4;
    return v;
  }
  void f64(std::span<double> out) {
    need(out.size() * 8);
    for (double& d : out) {
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[off_ + i]} << (8 * i);
      d = std::bit_cast<double>(v);
      off_ += 8;
    }
  }
  void done() const {
    if (off_ != bytes_.size()) throw Error(Errc::format_error, "trailing bytes in checkpoint");
  }

 private:
  void need(std::size_t n) const {
    if (off_ + n > bytes_.size()) throw Error(Errc::format_error, "checkpoint truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t off_ = 0;
};

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kMaxDim = 1u << 24;

}  // namespace

std::vector<std::uint8_t> encode_model(const nn::ModelParams& params) {
  ByteWriter w;
  w.magic("EVTM");
  w.u32(kCheckpointVersion);
  const nn::ClassifierShape& s = params.shape;
  for (int d : {s.channels, s.pooled_height, s.pooled_width, s.hidden, s.classes})
    w.u32(static_cast<std::uint32_t>(d));
  const bool normalized = !params.input_scale.empty();
  w.u32(normalized ? 1 : 0);
  if (normalized) {
    w.f64(std::span<const double>(&params.input_clip, 1));
    w.f64(params.input_mean);
    w.f64(params.input_scale);
  }
  for (auto t : params.tensors()) w.f64(t);
  return w.take();
}

nn::ModelParams decode_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.magic("EVTM");
  if (const auto v = r.u32(); v != kCheckpointVersion)
    throw Error(Errc::format_error, "unsupported model checkpoint version " + std::to_string(v));
  nn::ClassifierShape s;
  for (int* d : {&s.channels, &s.pooled_height, &s.pooled_width, &s.hidden, &s.classes}) {
    const std::uint32_t v = r.u32();
    if (v == 0 || v > kMaxDim) throw Error(Errc::format_error, "implausible model dimension");
    *d = static_cast<int>(v);
  }
  if (static_cast<std::uint64_t>(s.features()) * s.hidden > (1ull << 28))
    throw Error(Errc::format_error, "implausible model size");
  nn::ModelParams p = nn::zeros_like(nn::init_model(s, 0));
  if (const auto flag = r.u32(); flag == 1) {
    p.input_mean.resize(static_cast<std::size_t>(s.features()));
    p.input_scale.resize(p.input_mean.size());
    r.f64(std::span<double>(&p.input_clip, 1));
    r.f64(p.input_mean);
    r.f64(p.input_scale);
  } else if (flag != 0) {
    throw Error(Errc::format_error, "bad input-normalization flag");
  }
  for (auto t : p.tensors()) r.f64(t);
  r.done();
  return p;
}

std::vector<std::uint8_t> encode_generator(const GeneratorParams& params) {
  ByteWriter w;
  w.magic("EVTG");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.net.layers.size()));
  for (const nn::Dense& l : params.net.layers) {
    w.u32(static_cast<std::uint32_t>(l.in));
    w.u32(static_cast<std::uint32_t>(l.out));
    w.f64(l.weight);
    w.f64(l.bias);
  }
  return w.take();
}

GeneratorParams decode_generator(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.magic("EVTG");
  if (const auto v = r.u32(); v != kCheckpointVersion)
    throw Error(Errc::format_error, "unsupported generator checkpoint version " + std::to_string(v));
  const std::uint32_t layers = r.u32();
  if (layers == 0 || layers > 64) throw Error(Errc::format_error, "implausible layer count");
  GeneratorParams g;
  g.net.activation = nn::OutputActivation::logistic;
  for (std::uint32_t i = 0; i < layers; ++i) {
    const std::uint32_t in = r.u32(), out = r.u32();
    if (in == 0 || out == 0 || in > kMaxDim || out > kMaxDim ||
        static_cast<std::uint64_t>(in) * out > (1ull << 28))
      throw Error(Errc::format_error, "implausible layer dimensions");
    if (i > 0 && static_cast<int>(in) != g.net.layers.back().out)
      throw Error(Errc::format_error, "layer dimensions do not chain");
    nn::Dense d(static_cast<int>(in), static_cast<int>(out));
    r.f64(d.weight);
    r.f64(d.bias);
    g.net.layers.push_back(std::move(d));
  }
  r.done();
  return g;
}

std::string sample_id(std::size_t index) {
  std::string s = std::to_string(index);
  return std::string(s.size() < 6 ? 6 - s.size() : 0, '0') + s;
}

EventStream to_disk_time(const EventStream& normalized) {
  if (normalized.time_domain != TimeDomain::normalized_unit)
    throw Error(Errc::wrong_time_domain, "expected a normalized stream");
  EventStream raw = normalized;
  raw.time_domain = TimeDomain::raw_microseconds;
  for (Event& e : raw.events) e.t = std::round(e.t * kDiskSpanMicroseconds);
  return raw;
}

void write_dataset(const std::filesystem::path& dir, std::span<const DiskSample> samples,
                   bool with_flags) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_error, "cannot create " + dir.string() + ": " + ec.message());
  json labels = json::object(), flags = json::object();
  SensorGeometry geometry{1, 1};
  for (const DiskSample& s : samples) {
    write_file_atomic((dir / (s.id + ".bin")).string(), write_bin(to_disk_time(s.sample.stream)));
    labels[s.id] = s.sample.label;
    flags[s.id] = s.poisoned;
    geometry = s.sample.stream.geometry;
  }
  write_json_file(dir / "sensor.json", {{"width", geometry.width},
                                        {"height", geometry.height},
                                        {"time_span_us", kDiskSpanMicroseconds}});
  if (with_flags) write_json_file(dir / "flags.json", flags);
  write_json_file(dir / "labels.json", labels);
}

std::vector<DiskSample> read_dataset(const std::filesystem::path& dir) {
  const json labels = read_json_file(dir / "labels.json");
  if (!labels.is_object()) throw Error(Errc::format_error, "labels.json must be an object");
  std::optional<SensorGeometry> geometry;
  std::optional<double> span;
  if (std::filesystem::exists(dir / "sensor.json")) {
    const json g = read_json_file(dir / "sensor.json");
    try {
      geometry = SensorGeometry{g.at("width").get<int>(), g.at("height").get<int>()};
      if (g.contains("time_span_us")) span = g.at("time_span_us").get<double>();
    } catch (const json::exception& e) {
      throw Error(Errc::format_error, "sensor.json: " + std::string(e.what()));
    }
    if (span && !(*span > 0.0)) throw Error(Errc::format_error, "sensor.json: time_span_us must be > 0");
  }
  json flags = json::object();
  if (std::filesystem::exists(dir / "flags.json")) flags = read_json_file(dir / "flags.json");

  std::vector<DiskSample> out;
  for (auto it = labels.begin(); it != labels.end(); ++it) {
    DiskSample s;
    s.id = it.key();
    s.sample.label = it.value().get<int>();
    s.poisoned = flags.contains(s.id) && flags[s.id].get<bool>();
    const auto bytes = read_file_bytes((dir / (s.id + ".bin")).string());
    EventStream raw = parse_bin(bytes, geometry);
    if (span) {
      // Written by write_dataset: keep the stored time axis.
      for (Event& e : raw.events) e.t = std::min(e.t / *span, 1.0);
      raw.time_domain = TimeDomain::normalized_unit;
      s.sample.stream = std::move(raw);
    } else if (raw.empty()) {
      raw.time_domain = TimeDomain::normalized_unit;
      s.sample.stream = std::move(raw);
    } else {
      s.sample.stream = normalize_time(raw);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<LabeledStream> samples_of(std::span<const DiskSample> disk) {
  std::vector<LabeledStream> out;
  out.reserve(disk.size());
  for (const DiskSample& d : disk) out.push_back(d.sample);
  return out;
}

}  // namespace evtrojan
