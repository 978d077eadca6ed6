#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "elvckit/cdfx.hpp"
#include "elvckit/cdvae/checkpoint.hpp"
#include "elvckit/cdvae/inference.hpp"
#include "elvckit/cdvae/train.hpp"
#include "elvckit/config.hpp"
#include "elvckit/dtw.hpp"
#include "elvckit/features.hpp"
#include "elvckit/griffin_lim.hpp"
#include "elvckit/manifest.hpp"
#include "elvckit/metrics.hpp"
#include "elvckit/parallel.hpp"
#include "elvckit/reconcile.hpp"

namespace elvc::pipeline {

namespace fs = std::filesystem;

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };
using LogSink = std::function<void(LogLevel, const std::string&)>;

struct Context {
  PipelineConfig cfg;
  int jobs = 1;
  LogSink sink;

  void log(LogLevel level, const std::string& msg) const {
    if (sink) sink(level, msg);
  }
};

// ---- layout -------------------------------------------------------------------------------------

inline std::string set_tag(const std::vector<FeatureDomain>& set) {
  std::string out;
  for (std::size_t i = 0; i < set.size(); ++i) out += (i ? "+" : "") + file_tag(set[i]);
  return out;
}

/// Name of one (CDVAE features, DTW feature) system, e.g. `mel+ssl_dtw-mcc`.
inline std::string cell_tag(const PipelineConfig& c) { return set_tag(c.cdvae_features) + "_dtw-" + file_tag(c.dtw_feature); }

inline std::string system_label(const PipelineConfig& c) {
  return "dtw=" + std::string(to_string(c.dtw_feature)) + ",cdvae=" + config_detail::join_set(c.cdvae_features);
}

inline fs::path feature_path(const PipelineConfig& c, const std::string& id, FeatureDomain d) {
  return c.out_dir / "features" / (id + "." + file_tag(d) + ".cdfx");
}
inline fs::path ssl_path(const PipelineConfig& c, const std::string& id) { return c.ssl_dir / (id + ".ssl.cdfx"); }
inline fs::path align_path(const PipelineConfig& c, const std::string& el_id) {
  return c.out_dir / "align" / file_tag(c.dtw_feature) / (el_id + ".path");
}
inline fs::path nlvc_checkpoint(const PipelineConfig& c) { return c.out_dir / "checkpoints" / ("nlvc_" + set_tag(c.cdvae_features) + ".ckpt"); }
inline fs::path elvc_checkpoint(const PipelineConfig& c) { return c.out_dir / "checkpoints" / ("elvc_" + cell_tag(c) + ".ckpt"); }
inline fs::path converted_path(const PipelineConfig& c, const std::string& id) {
  return c.out_dir / "converted" / cell_tag(c) / (id + "." + file_tag(c.out_domain) + ".cdfx");
}
inline fs::path wav_path(const PipelineConfig& c, const std::string& id) { return c.out_dir / "wav" / cell_tag(c) / (id + ".wav"); }
inline fs::path report_path(const PipelineConfig& c) { return c.out_dir / "reports" / (cell_tag(c) + ".tsv"); }

inline int domain_hop(const PipelineConfig& c, FeatureDomain d) { return d == FeatureDomain::SSL ? c.ssl_hop : c.mel.hop_size; }

/// Domains that must share one frame grid: the CDVAE features plus the DTW feature.
inline std::vector<FeatureDomain> grid_domains(const PipelineConfig& c) {
  auto out = c.cdvae_features;
  if (std::find(out.begin(), out.end(), c.dtw_feature) == out.end()) out.push_back(c.dtw_feature);
  return out;
}

inline int grid_hop(const PipelineConfig& c) {
  int hop = 0;
  for (auto d : grid_domains(c)) hop = std::max(hop, domain_hop(c, d));
  return hop;
}

// ---- features -----------------------------------------------------------------------------------

inline AudioBuffer load_audio(const Context& ctx, const fs::path& path) {
  auto audio = read_wav(path);
  if (audio.sample_rate != ctx.cfg.sample_rate) {
    ctx.log(LogLevel::Warn, path.string() + ": resampling " + std::to_string(audio.sample_rate) + " Hz to " +
                                std::to_string(ctx.cfg.sample_rate) + " Hz");
    audio = resample(audio, ctx.cfg.sample_rate);
  }
  return audio;
}

inline FeatureSequence compute_feature(const PipelineConfig& c, const AudioBuffer& audio, FeatureDomain d) {
  switch (d) {
    case FeatureDomain::Mel: return extract_mel(audio, c.mel, c.n_mels);
    case FeatureDomain::MCC: return extract_mcc(audio, c.mel, c.mcc_order, c.n_mels);
    case FeatureDomain::SP: return extract_envelope(audio, {c.sp_frame_size, c.mel.hop_size});
    case FeatureDomain::SSL: break;
  }
  fail(ErrorKind::DomainMismatch, "SSL embeddings are ingested from CDFX files, not computed");
}

/// Writes one CDFX file per (utterance, configured domain). SSL is skipped: those files come from the
/// external embedding dumper and are read from corpus.ssl_dir.
inline std::vector<fs::path> cmd_extract(const Context& ctx, const std::vector<UtteranceManifest>& rows) {
  const auto& c = ctx.cfg;
  std::vector<FeatureDomain> domains;
  for (auto d : c.extract_domains) {
    if (d == FeatureDomain::SSL)
      ctx.log(LogLevel::Info, "SSL features are not computed here; dump them with ssl-extract and set corpus.ssl_dir");
    else
      domains.push_back(d);
  }
  fs::create_directories(c.out_dir / "features");
  std::vector<fs::path> written(rows.size() * domains.size());
  parallel_for(rows.size(), ctx.jobs, [&](std::size_t i) {
    const auto& row = rows[i];
    const auto audio = load_audio(ctx, row.audio_path);
    for (std::size_t k = 0; k < domains.size(); ++k) {
      auto seq = compute_feature(c, audio, domains[k]);
      seq.utterance_id = row.utterance_id;
      const auto out = feature_path(c, row.utterance_id, domains[k]);
      write_features(seq, out);
      written[i * domains.size() + k] = out;
    }
  });
  ctx.log(LogLevel::Info, "extracted " + std::to_string(written.size()) + " feature files");
  return written;
}

inline FeatureSequence load_feature(const PipelineConfig& c, const std::string& id, FeatureDomain d) {
  FeatureSequence seq;
  if (d == FeatureDomain::SSL) {
    require(!c.ssl_dir.empty(), ErrorKind::InvalidConfig, "corpus.ssl_dir is required for SSL features");
    seq = ingest_ssl(ssl_path(c, id), c.ssl_hop, c.ssl_dims);
  } else {
    const auto p = feature_path(c, id, d);
    if (!fs::exists(p)) fail(ErrorKind::MissingFile, p.string() + " not found; run extract first");
    seq = read_features(p);
  }
  seq.utterance_id = id;
  return seq;
}

/// Features of one utterance on the shared grid: finer hops are interpolated onto the coarsest one and
/// every sequence is cut to the shortest length.
inline std::map<FeatureDomain, FeatureSequence> load_on_grid(const PipelineConfig& c, const std::string& id) {
  const int hop = grid_hop(c);
  std::map<FeatureDomain, FeatureSequence> out;
  Eigen::Index frames = std::numeric_limits<Eigen::Index>::max();
  for (auto d : grid_domains(c)) {
    auto seq = load_feature(c, id, d);
    if (seq.hop_size != hop) seq = resample_frames(seq, hop);
    frames = std::min(frames, seq.frames());
    out[d] = std::move(seq);
  }
  for (auto& [d, seq] : out) seq.data.conservativeResize(frames, Eigen::NoChange);
  return out;
}

// ---- alignment ----------------------------------------------------------------------------------

inline std::map<std::string, UtteranceManifest> index_rows(const std::vector<UtteranceManifest>& rows) {
  std::map<std::string, UtteranceManifest> out;
  for (const auto& r : rows) out.emplace(r.utterance_id, r);
  return out;
}

/// NL rows of both configured NL manifests, keyed by utterance_id.
inline std::map<std::string, UtteranceManifest> nl_rows(const PipelineConfig& c) {
  std::map<std::string, UtteranceManifest> out;
  for (const auto* p : {&c.nl_train, &c.nl_test})
    if (!p->empty() && fs::exists(*p))
      for (auto& r : load_manifest(*p)) out.emplace(r.utterance_id, r);
  return out;
}

inline const UtteranceManifest& counterpart(const std::map<std::string, UtteranceManifest>& nl, const UtteranceManifest& el) {
  require(el.parallel_id.has_value(), ErrorKind::MissingPair, el.utterance_id + ": no parallel_id");
  auto it = nl.find(*el.parallel_id);
  if (it == nl.end()) fail(ErrorKind::MissingPair, el.utterance_id + ": NL utterance '" + *el.parallel_id + "' not in any NL manifest");
  return it->second;
}

struct AlignSummaryRow {
  std::string el_id, nl_id;
  double total_cost = 0.0;
  std::size_t path_length = 0;
};

/// Word-segmented DTW of every EL row against its NL counterpart on the configured DTW feature. Writes
/// one path file per pair plus `summary.tsv` next to them.
inline std::vector<AlignSummaryRow> cmd_align(const Context& ctx, const std::vector<UtteranceManifest>& el_rows) {
  const auto& c = ctx.cfg;
  const auto nl = nl_rows(c);
  for (const auto& r : el_rows) require_stage2_ready(r);
  std::vector<AlignSummaryRow> summary(el_rows.size());
  fs::create_directories(align_path(c, "x").parent_path());
  parallel_for(el_rows.size(), ctx.jobs, [&](std::size_t i) {
    const auto& el = el_rows[i];
    const auto& ref = counterpart(nl, el);
    if (!ref.boundaries_path) fail(ErrorKind::BoundaryMismatch, ref.utterance_id + ": NL row lacks boundaries_path");
    auto src = load_on_grid(c, el.utterance_id).at(c.dtw_feature);
    auto dst = load_on_grid(c, ref.utterance_id).at(c.dtw_feature);
    auto path = segment_align(src, dst, read_boundaries(*el.boundaries_path), read_boundaries(*ref.boundaries_path));
    write_path(path, std::string(to_string(c.dtw_feature)), align_path(c, el.utterance_id));
    summary[i] = {el.utterance_id, ref.utterance_id, path.total_cost, path.size()};
  });
  detail::atomic_write(align_path(c, "summary").replace_filename("summary.tsv"), [&](std::ostream& out) {
    out << "el_id\tnl_id\t" << to_string(c.dtw_feature) << "_cost\tpath_length\n";
    for (const auto& s : summary) out << s.el_id << '\t' << s.nl_id << '\t' << detail::fmt_num(s.total_cost) << '\t' << s.path_length << '\n';
  });
  ctx.log(LogLevel::Info, "aligned " + std::to_string(summary.size()) + " pairs on " + std::string(to_string(c.dtw_feature)));
  return summary;
}

// ---- training -----------------------------------------------------------------------------------

inline void log_epoch(const Context& ctx, const std::string& stage, const cdvae::EpochLoss& e) {
  std::string msg = stage + " epoch " + std::to_string(e.epoch);
  for (const auto& [k, v] : e.components) msg += " " + k + "=" + detail::fmt_num(v);
  ctx.log(LogLevel::Info, msg);
}

inline void require_compatible(const cdvae::CdvaeModel<float>& m, const PipelineConfig& c, const fs::path& path) {
  std::vector<FeatureDomain> have;
  for (const auto& b : m.domains) have.push_back(b.domain);
  if (have != c.cdvae_features)
    fail(ErrorKind::IncompatibleCheckpoint, path.string() + " holds a " + config_detail::join_set(have) + " model, config asks for " +
                                                config_detail::join_set(c.cdvae_features));
}

/// Stage 1 on the NL training manifest. An existing checkpoint is resumed up to nlvc.epochs.
inline fs::path cmd_train_nlvc(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto rows = load_manifest(c.nl_train, true);
  require(!rows.empty(), ErrorKind::InvalidManifest, "NL training manifest is empty");
  std::vector<cdvae::Stage1Utterance> corpus(rows.size());
  parallel_for(rows.size(), ctx.jobs, [&](std::size_t i) {
    auto grid = load_on_grid(c, rows[i].utterance_id);
    corpus[i].utterance_id = rows[i].utterance_id;
    corpus[i].speaker = rows[i].speaker_id;
    for (auto d : c.cdvae_features) corpus[i].features.push_back(grid.at(d));
  });

  const auto ckpt_path = nlvc_checkpoint(c);
  const auto log_path = c.out_dir / "logs" / ("nlvc_" + set_tag(c.cdvae_features) + ".tsv");
  fs::create_directories(ckpt_path.parent_path());
  fs::create_directories(log_path.parent_path());
  cdvae::Checkpoint<float> ck;
  const bool resume = fs::exists(ckpt_path);
  if (resume) {
    ck = cdvae::load_checkpoint<float>(ckpt_path);
    require_compatible(ck.model, c, ckpt_path);
    ctx.log(LogLevel::Info, "resuming stage 1 from epoch " + std::to_string(ck.state.stage1.epochs_done));
    if (ck.state.stage1.epochs_done >= c.nlvc.epochs) return ckpt_path;
  } else {
    std::set<std::string> speakers;
    for (const auto& r : rows) speakers.insert(r.speaker_id);
    std::vector<cdvae::DomainSpec> specs;
    for (auto d : c.cdvae_features) specs.push_back({d, default_dims(d)});
    ck.model = cdvae::make_model<float>(specs, {speakers.begin(), speakers.end()}, static_cast<std::uint64_t>(c.model_seed));
  }
  auto curve = cdvae::train_stage1(ck.model, corpus, c.nlvc, ck.state, [&](const cdvae::EpochLoss& e) { log_epoch(ctx, "nlvc", e); });
  cdvae::save_checkpoint(ck, ckpt_path);
  cdvae::write_loss_log(curve, log_path, resume);
  return ckpt_path;
}

/// Aligned first-domain EL/NL pairs for stage 2, from the path files written by cmd_align.
inline std::vector<cdvae::Stage2Pair> stage2_pairs(const Context& ctx, const std::vector<UtteranceManifest>& el_rows) {
  const auto& c = ctx.cfg;
  const auto nl = nl_rows(c);
  const auto first = c.cdvae_features.front();
  std::vector<cdvae::Stage2Pair> pairs(el_rows.size());
  parallel_for(el_rows.size(), ctx.jobs, [&](std::size_t i) {
    const auto& el = el_rows[i];
    require_stage2_ready(el);
    const auto& ref = counterpart(nl, el);
    const auto p = align_path(c, el.utterance_id);
    if (!fs::exists(p)) fail(ErrorKind::MissingFile, p.string() + " not found; run align first");
    auto pf = read_path(p);
    auto src = load_on_grid(c, el.utterance_id).at(first);
    auto dst = load_on_grid(c, ref.utterance_id).at(first);
    for (auto [a, b] : pf.path.pairs)
      require(a < src.frames() && b < dst.frames(), ErrorKind::InvalidInput, p.string() + ": path exceeds the feature frames");
    auto [x, y] = warp_pair(pf.path, src, dst);
    pairs[i] = {el.utterance_id, ref.speaker_id, std::move(x), std::move(y)};
  });
  return pairs;
}

/// Stage 2 on the EL training manifest, starting from the stage-1 checkpoint (NotPretrained without one).
inline fs::path cmd_train_elvc(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto ckpt_path = elvc_checkpoint(c);
  const auto log_path = c.out_dir / "logs" / ("elvc_" + cell_tag(c) + ".tsv");
  const bool resume = fs::exists(ckpt_path);
  auto ck = cdvae::load_checkpoint<float>(resume ? ckpt_path : nlvc_checkpoint(c));
  require_compatible(ck.model, c, ckpt_path);
  if (!ck.state.stage1_done) fail(ErrorKind::NotPretrained, "stage-1 training has not finished");
  if (resume && ck.state.stage2.epochs_done >= c.elvc.epochs) return ckpt_path;
  const auto rows = load_manifest(c.el_train, true);
  require(!rows.empty(), ErrorKind::InvalidManifest, "EL training manifest is empty");
  auto pairs = stage2_pairs(ctx, rows);
  auto curve = cdvae::train_stage2(ck.model, pairs, c.elvc, ck.state, [&](const cdvae::EpochLoss& e) { log_epoch(ctx, "elvc", e); });
  fs::create_directories(log_path.parent_path());
  cdvae::save_checkpoint(ck, ckpt_path);
  cdvae::write_loss_log(curve, log_path, resume);
  return ckpt_path;
}

// ---- conversion and synthesis -------------------------------------------------------------------

inline std::string target_speaker_for(const PipelineConfig& c, const std::map<std::string, UtteranceManifest>& nl,
                                      const UtteranceManifest& el) {
  if (!c.target_speaker.empty()) return c.target_speaker;
  if (!el.parallel_id) fail(ErrorKind::InvalidSpeaker, el.utterance_id + ": no target speaker configured and no parallel_id");
  return counterpart(nl, el).speaker_id;
}

/// Converts every row of `el_rows` with the stage-2 checkpoint into convert.out_domain features.
inline std::vector<fs::path> cmd_convert(const Context& ctx, const std::vector<UtteranceManifest>& el_rows) {
  const auto& c = ctx.cfg;
  auto ck = cdvae::load_checkpoint<float>(elvc_checkpoint(c));
  require_compatible(ck.model, c, elvc_checkpoint(c));
  const auto nl = nl_rows(c);
  std::vector<fs::path> out;
  for (const auto& el : el_rows) {
    const auto code = ck.model.speaker_code(target_speaker_for(c, nl, el));
    auto src = load_on_grid(c, el.utterance_id).at(c.cdvae_features.front());
    auto conv = cdvae::convert(ck.model, src, code, c.out_domain);
    conv.utterance_id = el.utterance_id;
    const auto p = converted_path(c, el.utterance_id);
    fs::create_directories(p.parent_path());
    write_features(conv, p);
    out.push_back(p);
  }
  ctx.log(LogLevel::Info, "converted " + std::to_string(out.size()) + " utterances");
  return out;
}

/// Griffin-Lim waveforms for Mel feature files, written to `out_dir`/<utterance_id>.wav.
inline std::vector<fs::path> cmd_synth(const Context& ctx, const std::vector<fs::path>& files, const fs::path& out_dir) {
  const auto& c = ctx.cfg;
  fs::create_directories(out_dir);
  std::vector<fs::path> out(files.size());
  parallel_for(files.size(), ctx.jobs, [&](std::size_t i) {
    auto mel = read_features(files[i]);
    if (mel.domain != FeatureDomain::Mel)
      fail(ErrorKind::DomainMismatch, files[i].string() + ": " + std::string(to_string(mel.domain)) +
                                          " features cannot be turned into audio without a trained vocoder; convert to Mel");
    GriffinLimOptions opt;
    opt.iterations = c.griffin_lim_iterations;
    opt.init = c.phase_init;
    opt.inversion = c.mel_inversion;
    opt.time_upsample = c.griffin_lim_upsample;
    auto r = griffin_lim(mel, StftConfig{c.mel.frame_size, mel.hop_size}, opt);
    out[i] = out_dir / (mel.utterance_id + ".wav");
    write_wav(r.audio, out[i]);
  });
  return out;
}

// ---- evaluation ---------------------------------------------------------------------------------

inline EvalConfig eval_config(const Context& ctx) {
  EvalConfig e;
  e.stft = ctx.cfg.mel;
  e.n_mels = ctx.cfg.n_mels;
  e.n_mcc = ctx.cfg.mcc_order;
  e.f0.f0_floor = ctx.cfg.f0_floor;
  e.f0.f0_ceiling = ctx.cfg.f0_ceiling;
  e.f0.hop_size = ctx.cfg.mel.hop_size;
  e.jobs = ctx.jobs;
  return e;
}

inline F0Track track_f0(const Context& ctx, const AudioBuffer& audio) {
  const auto e = eval_config(ctx);
  return estimate_f0(audio, e.f0);
}

/// MCC of a reference utterance resampled onto `hop` frames.
inline FeatureSequence reference_mcc(const Context& ctx, const AudioBuffer& audio, int hop) {
  auto mcc = compute_feature(ctx.cfg, audio, FeatureDomain::MCC);
  return mcc.hop_size == hop ? mcc : resample_frames(mcc, hop);
}

/// Scores the converted utterances of the configured system against their NL references. At waveform
/// level both sides are analysed from audio (Griffin-Lim output for the converted side); at feature
/// level MCD uses the converted Mel directly and F0 uses the synthesized audio when it exists.
inline EvalReport cmd_evaluate(const Context& ctx, const std::vector<UtteranceManifest>& el_rows) {
  const auto& c = ctx.cfg;
  const auto nl = nl_rows(c);
  for (const auto& el : el_rows) counterpart(nl, el);
  std::vector<UtteranceScore> rows(el_rows.size());
  parallel_for(el_rows.size(), ctx.jobs, [&](std::size_t i) {
    const auto& el = el_rows[i];
    const auto ref_audio = load_audio(ctx, counterpart(nl, el).audio_path);
    const auto wav = wav_path(c, el.utterance_id);
    if (c.eval_level == EvalLevel::Waveform) {
      if (!fs::exists(wav)) fail(ErrorKind::MissingFile, wav.string() + " not found; run synth first");
      rows[i] = score_audio(el.utterance_id, load_audio(ctx, wav), ref_audio, eval_config(ctx));
      return;
    }
    const auto conv = read_features(converted_path(c, el.utterance_id));
    require(conv.domain == FeatureDomain::Mel, ErrorKind::DomainMismatch, "feature-level evaluation needs Mel output");
    auto conv_mcc = mcc_from_mel(conv, c.mcc_order);
    auto m = mcd_aligned(conv_mcc, reference_mcc(ctx, ref_audio, conv.hop_size));
    UtteranceScore s{el.utterance_id, m.mcd_db, std::nullopt, std::nullopt, m.path.size()};
    if (fs::exists(wav) && conv.hop_size == c.mel.hop_size) {
      const auto f_conv = track_f0(ctx, load_audio(ctx, wav));
      const auto f_ref = track_f0(ctx, ref_audio);
      s.f0_rmse_hz = f0_rmse(f_conv, f_ref, &m.path);
      s.f0_corr = f0_corr(f_conv, f_ref, &m.path);
    }
    rows[i] = s;
  });
  auto report = summarize(std::move(rows));
  write_report(report, report_path(c));
  return report;
}

/// Unconverted EL speech against its NL reference, at the configured evaluation level.
inline EvalReport evaluate_baseline(const Context& ctx, const std::vector<UtteranceManifest>& el_rows) {
  const auto& c = ctx.cfg;
  const auto nl = nl_rows(c);
  std::vector<UtteranceScore> rows(el_rows.size());
  parallel_for(el_rows.size(), ctx.jobs, [&](std::size_t i) {
    const auto& el = el_rows[i];
    const auto el_audio = load_audio(ctx, el.audio_path);
    const auto ref_audio = load_audio(ctx, counterpart(nl, el).audio_path);
    if (c.eval_level == EvalLevel::Waveform) {
      rows[i] = score_audio(el.utterance_id, el_audio, ref_audio, eval_config(ctx));
      return;
    }
    const int hop = grid_hop(c);
    auto src = reference_mcc(ctx, el_audio, hop);
    rows[i] = score_utterance(el.utterance_id, src, track_f0(ctx, el_audio), reference_mcc(ctx, ref_audio, hop), track_f0(ctx, ref_audio));
  });
  return summarize(std::move(rows));
}

/// Each NL reference scored against itself.
inline EvalReport evaluate_self(const Context& ctx, const std::vector<UtteranceManifest>& el_rows) {
  const auto nl = nl_rows(ctx.cfg);
  std::vector<UtteranceScore> rows(el_rows.size());
  parallel_for(el_rows.size(), ctx.jobs, [&](std::size_t i) {
    const auto& ref = counterpart(nl, el_rows[i]);
    const auto audio = load_audio(ctx, ref.audio_path);
    rows[i] = score_audio(ref.utterance_id, audio, audio, eval_config(ctx));
  });
  return summarize(std::move(rows));
}

// ---- experiment ---------------------------------------------------------------------------------

struct ExperimentRow {
  std::string system;
  std::optional<EvalReport> report;  // empty when the cell failed
  std::string error;
};

/// Runs one configured system end to end on the test manifest: align, both training stages, convert,
/// synthesize, evaluate.
inline EvalReport run_system(const Context& ctx) {
  validate(ctx.cfg);
  const auto el_train = load_manifest(ctx.cfg.el_train, true);
  const auto el_test = load_manifest(ctx.cfg.el_test, true);
  cmd_align(ctx, el_train);
  cmd_train_nlvc(ctx);
  cmd_train_elvc(ctx);
  auto converted = cmd_convert(ctx, el_test);
  cmd_synth(ctx, converted, wav_path(ctx.cfg, "x").parent_path());
  return cmd_evaluate(ctx, el_test);
}

inline std::vector<UtteranceManifest> all_rows(const PipelineConfig& c) {
  std::vector<UtteranceManifest> rows;
  std::set<std::string> seen;
  for (const auto* p : {&c.nl_train, &c.nl_test, &c.el_train, &c.el_test})
    if (!p->empty())
      for (auto& r : load_manifest(*p, true))
        if (seen.insert(r.utterance_id).second) rows.push_back(std::move(r));
  return rows;
}

inline void write_experiment(const std::vector<ExperimentRow>& rows, const fs::path& path) {
  detail::atomic_write(path, [&](std::ostream& out) {
    out << kReportHeader << '\n';
    for (const auto& r : rows) {
      if (r.report)
        out << report_row({r.system, r.report->mcd_db, r.report->f0_rmse_hz, r.report->f0_corr, r.report->n_frames_compared}) << '\n';
      else
        out << r.system << "\tERROR\tERROR\tERROR\t0\n";
    }
  });
}

/// The DTW-feature x CDVAE-feature grid plus a self-evaluation control row and the unconverted EL
/// baseline. A failing cell is reported as ERROR and the remaining cells still run.
inline std::vector<ExperimentRow> cmd_experiment(const Context& ctx) {
  const auto& c = ctx.cfg;
  cmd_extract(ctx, all_rows(c));
  const auto el_test = load_manifest(c.el_test, true);
  std::vector<ExperimentRow> rows;
  for (const auto& set : c.experiment_cdvae) {
    for (auto dtw : c.experiment_dtw) {
      Context cell = ctx;
      cell.cfg.cdvae_features = set;
      cell.cfg.dtw_feature = dtw;
      cell.cfg.out_domain = FeatureDomain::Mel;
      ExperimentRow row{system_label(cell.cfg), std::nullopt, {}};
      try {
        row.report = run_system(cell);
      } catch (const std::exception& e) {
        row.error = e.what();
        ctx.log(LogLevel::Error, row.system + ": " + row.error);
      }
      rows.push_back(std::move(row));
    }
  }
  rows.push_back({"control:self", evaluate_self(ctx, el_test), {}});
  rows.push_back({"baseline:el", evaluate_baseline(ctx, el_test), {}});
  write_experiment(rows, c.out_dir / "reports" / "experiment.tsv");
  return rows;
}

}  // namespace elvc::pipeline
