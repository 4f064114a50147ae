#include <cstdio>
#include <exception>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "evtrojan/error.hpp"

using namespace evtrojan;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int exit_code(Errc code) {
  switch (code) {
    case Errc::config_invalid:
    case Errc::missing_generator:
      return kExitUsage;
    default:
      return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-stream backdoor toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", EVTROJAN_VERSION);

  cli::SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Generate a labeled synthetic dataset with train/val/test splits");
  s->add_option("--config", synth.config, "Dataset recipe (JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Overrides the recipe seed");

  cli::PoisonOptions poison;
  auto* p = app.add_subcommand("poison", "Inject triggers into a dataset and relabel to the target");
  p->add_option("--mode", poison.mode, "immutable | mutable | patch")->required();
  p->add_option("--spec", poison.spec, "Trigger spec (JSON)")->check(CLI::ExistingFile);
  p->add_option("--in", poison.in, "Input dataset directory")->required();
  p->add_option("--out", poison.out, "Output dataset directory")->required();
  p->add_option("--generator", poison.generator, "Generator checkpoint (mutable mode)")->check(CLI::ExistingPath);
  p->add_option("--rho", poison.rho, "Poison ratio")->capture_default_str();
  p->add_option("--target", poison.target, "Target class")->capture_default_str()->check(CLI::NonNegativeNumber);
  p->add_option("--seed", poison.seed, "Selection seed")->capture_default_str();
  p->add_option("--patch-value", poison.patch_value, "Patch fill value (default: representation max)");

  cli::RepresentOptions repr;
  auto* r = app.add_subcommand("represent", "Convert every stream to a representation dump");
  r->add_option("--method", repr.method, "est | ef | ts | vg | tencode")->required();
  r->add_option("--bins", repr.bins, "Temporal bins")->capture_default_str();
  r->add_option("--tau", repr.tau, "Time-surface decay")->capture_default_str();
  r->add_option("--dt", repr.tencode_dt, "Tencode window")->capture_default_str();
  r->add_option("--measurement", repr.measurement, "EST measurement: timestamp | count | polarity")
      ->capture_default_str();
  r->add_option("--in", repr.in, "Input dataset directory")->required();
  r->add_option("--out", repr.out, "Output directory")->required();

  cli::TrainOptions train;
  auto* t = app.add_subcommand("train", "Joint backdoor training");
  t->add_option("--config", train.config, "Training config (JSON)")->required()->check(CLI::ExistingFile);
  t->add_option("--data", train.data, "Clean training dataset directory")->required();
  t->add_option("--out", train.out, "Checkpoint directory")->required();
  t->add_option("--seed", train.seed, "Overrides the config seed");

  cli::EvalOptions eval;
  auto* e = app.add_subcommand("eval", "CDA, ASR, PSNR and SSIM of a checkpoint");
  e->add_option("--ckpt", eval.ckpt, "Checkpoint directory")->required();
  e->add_option("--clean", eval.clean, "Clean test dataset")->required();
  e->add_option("--poisoned", eval.poisoned, "Triggered test dataset")->required();
  e->add_option("--target", eval.target, "Target class (default: from the checkpoint config)")
      ->check(CLI::NonNegativeNumber);
  e->add_option("--out", eval.out, "Report file (JSON)")->required();

  cli::FilterOptions filter;
  auto* f = app.add_subcommand("filter", "Denoising defenses");
  f->require_subcommand(1);
  auto* stc = f->add_subcommand("stc", "Spatio-temporal correlation filter");
  stc->add_option("--in", filter.in, "Input dataset directory")->required();
  stc->add_option("--out", filter.out, "Output dataset directory")->required();
  stc->add_option("--radius", filter.radius, "Chebyshev radius in pixels")->capture_default_str();
  stc->add_option("--window", filter.window, "Temporal window (normalized time)")->capture_default_str();

  cli::StealthOptions stealth;
  auto* st = app.add_subcommand("stealth", "PSNR/SSIM over paired representation dumps");
  st->add_option("--clean", stealth.clean, "Clean representation directory")->required();
  st->add_option("--poisoned", stealth.poisoned, "Poisoned representation directory")->required();
  st->add_option("--out", stealth.out, "Report file (JSON)")->required();

  cli::ReportOptions report;
  auto* rp = app.add_subcommand("report", "SVG bar charts of CDA, ASR and PSNR across reports");
  rp->add_option("--in", report.in, "Report files (JSON)")->required()->check(CLI::ExistingFile);
  rp->add_option("--out", report.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ok) {
    return app.exit(ok);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitUsage;
  }

  try {
    if (*s) cli::run_synth(synth);
    else if (*p) cli::run_poison(poison);
    else if (*r) cli::run_represent(repr);
    else if (*t) cli::run_train(train);
    else if (*e) cli::run_eval(eval);
    else if (*f) cli::run_filter(filter);
    else if (*st) cli::run_stealth(stealth);
    else if (*rp) cli::run_report(report);
  } catch (const cli::UsageError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitUsage;
  } catch (const Error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return exit_code(err.code());
  } catch (const nlohmann::json::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitUsage;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitRuntime;
  }
  return 0;
}
