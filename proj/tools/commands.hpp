#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace evtrojan::cli {

namespace fs = std::filesystem;

// Thrown for bad flag combinations the parser cannot catch; maps to exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SynthOptions {
  fs::path config;
  fs::path out;
  std::optional<std::uint64_t> seed;
};

struct PoisonOptions {
  std::string mode;
  std::optional<fs::path> spec;
  fs::path in;
  fs::path out;
  std::optional<fs::path> generator;
  double rho = 0.1;
  int target = 0;
  std::uint64_t seed = 0;
  std::optional<double> patch_value;
};

struct RepresentOptions {
  std::string method;
  int bins = 4;
  double tau = 0.3;
  double tencode_dt = 1.0;
  std::string measurement = "timestamp";
  fs::path in;
  fs::path out;
};

struct TrainOptions {
  fs::path config;
  fs::path data;
  fs::path out;
  std::optional<std::uint64_t> seed;
};

struct EvalOptions {
  fs::path ckpt;
  fs::path clean;
  fs::path poisoned;
  std::optional<int> target;
  fs::path out;
};

struct FilterOptions {
  fs::path in;
  fs::path out;
  int radius = 1;
  double window = 0.05;
};

struct StealthOptions {
  fs::path clean;
  fs::path poisoned;
  fs::path out;
};

struct ReportOptions {
  std::vector<fs::path> in;
  fs::path out;
};

void run_synth(const SynthOptions& o);
void run_poison(const PoisonOptions& o);
void run_represent(const RepresentOptions& o);
void run_train(const TrainOptions& o);
void run_eval(const EvalOptions& o);
void run_filter(const FilterOptions& o);
void run_stealth(const StealthOptions& o);
void run_report(const ReportOptions& o);

}  // namespace evtrojan::cli
