#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "elvckit/pipeline.hpp"
#include "elvckit/synth_corpus.hpp"

namespace fs = std::filesystem;
using namespace elvc;
using pipeline::LogLevel;

namespace {

spdlog::level::level_enum level_from_env() {
  const char* v = std::getenv("ELVCKIT_LOG");
  if (!v || !*v) return spdlog::level::info;
  auto lvl = spdlog::level::from_str(v);
  if (lvl == spdlog::level::off && std::string(v) != "off") return spdlog::level::info;
  return lvl;
}

void forward(LogLevel level, const std::string& msg) {
  switch (level) {
    case LogLevel::Error: spdlog::error("{}", msg); break;
    case LogLevel::Warn: spdlog::warn("{}", msg); break;
    case LogLevel::Info: spdlog::info("{}", msg); break;
    case LogLevel::Debug: spdlog::debug("{}", msg); break;
  }
}

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out;
};

pipeline::Context make_context(const GlobalFlags& g) {
  pipeline::Context ctx;
  if (!g.config.empty()) ctx.cfg = load_config(g.config);
  if (g.seed) {
    ctx.cfg.model_seed = static_cast<int>(*g.seed & 0x7fffffff);
    ctx.cfg.nlvc.seed = *g.seed;
    ctx.cfg.elvc.seed = *g.seed;
  }
  if (!g.out.empty()) ctx.cfg.out_dir = g.out;
  validate(ctx.cfg);
  ctx.jobs = std::max(1, g.jobs);
  ctx.sink = forward;
  return ctx;
}

std::vector<UtteranceManifest> rows_or(const std::string& manifest, const fs::path& fallback) {
  const fs::path p = manifest.empty() ? fallback : fs::path(manifest);
  if (p.empty()) fail(ErrorKind::InvalidConfig, "no manifest given and none configured");
  return load_manifest(p, true);
}

void print_report(const std::string& name, const EvalReport& r) {
  std::cout << kReportHeader << '\n' << report_row({name, r.mcd_db, r.f0_rmse_hz, r.f0_corr, r.n_frames_compared}) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("elvckit"));
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(level_from_env());

  CLI::App app{"elvckit: electrolaryngeal voice conversion toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--config", g.config, "pipeline config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "seed for model init and training");
  app.add_option("--jobs", g.jobs, "worker threads for per-utterance work")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output directory (overrides out_dir)");

  std::string manifest;
  auto* extract = app.add_subcommand("extract", "compute Mel/MCC/SP feature files");
  extract->add_option("--manifest", manifest, "manifest to process (default: every configured manifest)");

  auto* align = app.add_subcommand("align", "word-segmented DTW between EL and NL pairs");
  align->add_option("--manifest", manifest, "EL manifest (default: corpus.el_train)");

  auto* train_nlvc = app.add_subcommand("train-nlvc", "stage-1 training on NL speech");
  auto* train_elvc = app.add_subcommand("train-elvc", "stage-2 training of the EL encoder");

  std::string speaker, out_domain;
  auto* convert = app.add_subcommand("convert", "convert EL features with the stage-2 model");
  convert->add_option("--manifest", manifest, "EL manifest (default: corpus.el_test)");
  convert->add_option("--speaker", speaker, "target speaker id");
  convert->add_option("--out-domain", out_domain, "output feature domain");

  std::vector<std::string> synth_inputs;
  std::string synth_dir;
  auto* synth = app.add_subcommand("synth", "Griffin-Lim audio from Mel feature files");
  synth->add_option("inputs", synth_inputs, "Mel CDFX files (default: converted files of the configured system)");
  synth->add_option("--wav-dir", synth_dir, "output directory for WAV files");

  auto* evaluate = app.add_subcommand("evaluate", "MCD / F0 RMSE / F0 CORR of converted speech");
  evaluate->add_option("--manifest", manifest, "EL manifest (default: corpus.el_test)");

  auto* experiment = app.add_subcommand("experiment", "run the DTW x CDVAE feature grid end to end");

  synth::CorpusConfig corpus;
  auto* gen = app.add_subcommand("synth-corpus", "write the built-in synthetic EL/NL corpus");
  gen->add_option("--train-sentences", corpus.train_sentences);
  gen->add_option("--test-sentences", corpus.test_sentences);
  gen->add_option("--seconds", corpus.seconds);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const fs::path root = g.out.empty() ? fs::path("synthetic_corpus") : fs::path(g.out);
      if (g.seed) corpus.seed = *g.seed;
      auto paths = synth::generate_corpus(root, corpus);
      PipelineConfig cfg;
      cfg.nl_train = fs::absolute(paths.nl_train);
      cfg.nl_test = fs::absolute(paths.nl_test);
      cfg.el_train = fs::absolute(paths.el_train);
      cfg.el_test = fs::absolute(paths.el_test);
      cfg.ssl_dir = fs::absolute(root / "ssl");
      cfg.out_dir = fs::absolute(root / "run");
      save_config(cfg, root / "elvckit.cfg");
      spdlog::info("corpus written to {}; config at {}", root.string(), (root / "elvckit.cfg").string());
      return 0;
    }

    auto ctx = make_context(g);
    const auto& c = ctx.cfg;
    if (extract->parsed()) {
      pipeline::cmd_extract(ctx, manifest.empty() ? pipeline::all_rows(c) : load_manifest(manifest, true));
    } else if (align->parsed()) {
      auto rows = pipeline::cmd_align(ctx, rows_or(manifest, c.el_train));
      for (const auto& r : rows) std::cout << r.el_id << '\t' << r.nl_id << '\t' << r.total_cost << '\t' << r.path_length << '\n';
    } else if (train_nlvc->parsed()) {
      std::cout << pipeline::cmd_train_nlvc(ctx).string() << '\n';
    } else if (train_elvc->parsed()) {
      std::cout << pipeline::cmd_train_elvc(ctx).string() << '\n';
    } else if (convert->parsed()) {
      if (!speaker.empty()) ctx.cfg.target_speaker = speaker;
      if (!out_domain.empty()) ctx.cfg.out_domain = domain_or_throw(out_domain);
      for (const auto& p : pipeline::cmd_convert(ctx, rows_or(manifest, c.el_test))) std::cout << p.string() << '\n';
    } else if (synth->parsed()) {
      std::vector<fs::path> inputs(synth_inputs.begin(), synth_inputs.end());
      if (inputs.empty())
        for (const auto& r : load_manifest(c.el_test)) inputs.push_back(pipeline::converted_path(c, r.utterance_id));
      const fs::path dir = synth_dir.empty() ? pipeline::wav_path(c, "x").parent_path() : fs::path(synth_dir);
      for (const auto& p : pipeline::cmd_synth(ctx, inputs, dir)) std::cout << p.string() << '\n';
    } else if (evaluate->parsed()) {
      print_report("MEAN", pipeline::cmd_evaluate(ctx, rows_or(manifest, c.el_test)));
    } else if (experiment->parsed()) {
      auto rows = pipeline::cmd_experiment(ctx);
      bool failed = false;
      std::cout << kReportHeader << '\n';
      for (const auto& r : rows) {
        if (r.report) {
          std::cout << report_row({r.system, r.report->mcd_db, r.report->f0_rmse_hz, r.report->f0_corr, r.report->n_frames_compared}) << '\n';
        } else {
          std::cout << r.system << "\tERROR\tERROR\tERROR\t0\n";
          failed = true;
        }
      }
      return failed ? 1 : 0;
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
