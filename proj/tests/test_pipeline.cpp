#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "elvckit/pipeline.hpp"
#include "elvckit/synth_corpus.hpp"

using namespace elvc;
namespace fs = std::filesystem;

namespace {

fs::path fresh(const std::string& name) {
  auto p = fs::temp_directory_path() / ("elvckit_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorKind::InvalidInput;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(ELVCKIT_CLI) + " " + args + " >" + (log.string() + ".out") + " 2>" + log.string();
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, SaveLoadRoundTrip) {
  auto dir = fresh("cfg_rt");
  PipelineConfig c;
  c.mel = legacy_mel_config();
  c.cdvae_features = {FeatureDomain::Mel};
  c.dtw_feature = FeatureDomain::MCC;
  c.nlvc.lr = 0.000123456789;
  c.elvc.weights.latent = 2.5;
  c.elvc.unfreeze_decoder = true;
  c.mel_inversion = MelInversion::pinv;
  c.phase_init = PhaseInit::zero;
  c.griffin_lim_upsample = 2;
  c.eval_level = EvalLevel::Feature;
  c.target_speaker = "nl_b";
  c.out_dir = dir / "out";
  c.experiment_cdvae = {{FeatureDomain::SSL, FeatureDomain::Mel}, {FeatureDomain::MCC}};
  save_config(c, dir / "a.cfg");
  auto back = load_config(dir / "a.cfg");
  EXPECT_EQ(back, c);
  save_config(back, dir / "b.cfg");
  EXPECT_EQ(slurp(dir / "a.cfg"), slurp(dir / "b.cfg"));
  EXPECT_EQ(load_config(dir / "a.cfg").mel.hop_size, 256);
}

TEST(Config, IncludesResolveRelativeAndLaterKeysWin) {
  auto dir = fresh("cfg_inc");
  fs::create_directories(dir / "sub");
  std::ofstream(dir / "sub" / "base.cfg") << "nlvc.epochs = 3\ncorpus.nl_train = nl.tsv  # relative to sub/\n";
  std::ofstream(dir / "top.cfg") << "include = sub/base.cfg\nnlvc.epochs = 9\ngriffin_lim.inversion = pinv\n";
  auto c = load_config(dir / "top.cfg");
  EXPECT_EQ(c.nlvc.epochs, 9);
  EXPECT_EQ(c.nl_train, dir / "sub" / "nl.tsv");
  EXPECT_EQ(c.mel_inversion, MelInversion::pinv);

  std::ofstream(dir / "loop_a.cfg") << "include = loop_b.cfg\n";
  std::ofstream(dir / "loop_b.cfg") << "include = loop_a.cfg\n";
  EXPECT_EQ(kind_of([&] { load_config(dir / "loop_a.cfg"); }), ErrorKind::InvalidConfig);
  std::ofstream(dir / "dangling.cfg") << "include = nowhere.cfg\n";
  EXPECT_EQ(kind_of([&] { load_config(dir / "dangling.cfg"); }), ErrorKind::MissingFile);
}

TEST(Config, RejectsBadValues) {
  auto dir = fresh("cfg_bad");
  const std::vector<std::string> bad{"bogus.key = 1",
                                     "nlvc.epochs = three",
                                     "nlvc.epochs = -1",
                                     "elvc.lr = 0",
                                     "griffin_lim.inversion = lsq",
                                     "griffin_lim.phase_init = random",
                                     "griffin_lim.time_upsample = 3",
                                     "mel.n_mels = 64",
                                     "cdvae.features = Mel+SSL+MCC",
                                     "convert.out_domain = SP",
                                     "mel.preset = huge",
                                     "no equals sign"};
  for (std::size_t i = 0; i < bad.size(); ++i) {
    const auto p = dir / ("b" + std::to_string(i) + ".cfg");
    std::ofstream(p) << bad[i] << '\n';
    EXPECT_EQ(kind_of([&] { load_config(p); }), ErrorKind::InvalidConfig) << bad[i];
  }
  EXPECT_EQ(kind_of([&] { load_config(dir / "absent.cfg"); }), ErrorKind::MissingFile);
}

class Pipeline : public ::testing::Test {
 protected:
  static inline fs::path root;
  static inline pipeline::Context ctx;

  static void SetUpTestSuite() {
    root = fresh("run");
    synth::CorpusConfig cc;
    cc.seconds = 1.0;
    cc.train_sentences = 2;
    cc.test_sentences = 1;
    auto paths = synth::generate_corpus(root / "corpus", cc);
    auto& c = ctx.cfg;
    c.nl_train = paths.nl_train;
    c.nl_test = paths.nl_test;
    c.el_train = paths.el_train;
    c.el_test = paths.el_test;
    c.ssl_dir = root / "corpus" / "ssl";
    c.out_dir = root / "out";
    c.cdvae_features = {FeatureDomain::Mel};
    c.nlvc.epochs = 1;
    c.elvc.epochs = 1;
    c.griffin_lim_iterations = 4;
    c.experiment_dtw = {FeatureDomain::Mel};
    c.experiment_cdvae = {{FeatureDomain::Mel}, {FeatureDomain::SP}};
    validate(c);
  }
};

TEST_F(Pipeline, ExtractIsIdempotent) {
  auto rows = pipeline::all_rows(ctx.cfg);
  ASSERT_EQ(rows.size(), 8u);
  auto files = pipeline::cmd_extract(ctx, rows);
  ASSERT_EQ(files.size(), 24u);
  std::vector<std::string> first;
  for (const auto& f : files) first.push_back(slurp(f));
  auto again = pipeline::cmd_extract(ctx, rows);
  for (std::size_t i = 0; i < files.size(); ++i) EXPECT_EQ(slurp(again[i]), first[i]) << files[i];
  auto mel = read_features(pipeline::feature_path(ctx.cfg, rows[0].utterance_id, FeatureDomain::Mel));
  EXPECT_EQ(mel.dims(), 80);
  EXPECT_EQ(mel.hop_size, 320);
  EXPECT_EQ(mel.frames(), 50);
}

TEST_F(Pipeline, AlignmentOfIdenticalAudioCostsNothing) {
  pipeline::cmd_extract(ctx, pipeline::all_rows(ctx.cfg));
  auto nl = load_manifest(ctx.cfg.nl_train, true);
  auto twin = nl[0];
  twin.parallel_id = twin.utterance_id;
  auto summary = pipeline::cmd_align(ctx, {twin});
  ASSERT_EQ(summary.size(), 1u);
  EXPECT_EQ(summary[0].total_cost, 0.0);
  auto real = pipeline::cmd_align(ctx, load_manifest(ctx.cfg.el_train, true));
  ASSERT_EQ(real.size(), 2u);
  EXPECT_GT(real[0].total_cost, 0.0);
  EXPECT_TRUE(fs::exists(pipeline::align_path(ctx.cfg, real[0].el_id)));
}

TEST_F(Pipeline, TrainConvertSynthEvaluate) {
  auto c = ctx;
  c.cfg.out_dir = root / "chain";
  pipeline::cmd_extract(c, pipeline::all_rows(c.cfg));
  EXPECT_EQ(kind_of([&] { pipeline::cmd_train_elvc(c); }), ErrorKind::NotPretrained);
  pipeline::cmd_align(c, load_manifest(c.cfg.el_train, true));
  EXPECT_TRUE(fs::exists(pipeline::cmd_train_nlvc(c)));
  EXPECT_TRUE(fs::exists(pipeline::cmd_train_elvc(c)));

  const auto el_test = load_manifest(c.cfg.el_test, true);
  auto wrong = c;
  wrong.cfg.target_speaker = "nobody";
  EXPECT_EQ(kind_of([&] { pipeline::cmd_convert(wrong, el_test); }), ErrorKind::InvalidSpeaker);

  auto converted = pipeline::cmd_convert(c, el_test);
  ASSERT_EQ(converted.size(), 1u);
  auto conv = read_features(converted[0]);
  EXPECT_EQ(conv.domain, FeatureDomain::Mel);
  auto mcc = pipeline::feature_path(c.cfg, el_test[0].utterance_id, FeatureDomain::MCC);
  EXPECT_EQ(kind_of([&] { pipeline::cmd_synth(c, {mcc}, root / "chain" / "bad"); }), ErrorKind::DomainMismatch);

  auto wavs = pipeline::cmd_synth(c, converted, pipeline::wav_path(c.cfg, "x").parent_path());
  auto audio = read_wav(wavs[0]);
  EXPECT_EQ(audio.sample_rate, 16000);
  EXPECT_EQ(audio.size(), static_cast<std::size_t>(conv.frames()) * 320);

  auto report = pipeline::cmd_evaluate(c, el_test);
  EXPECT_TRUE(std::isfinite(report.mcd_db));
  EXPECT_GT(report.mcd_db, 0.0);
  auto back = read_report(pipeline::report_path(c.cfg));
  EXPECT_EQ(back.mcd_db, report.mcd_db);
}

TEST_F(Pipeline, ExperimentMarksFailingCells) {
  auto c = ctx;
  c.cfg.out_dir = root / "grid";
  auto rows = pipeline::cmd_experiment(c);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_TRUE(rows[0].report.has_value());
  EXPECT_FALSE(rows[1].report.has_value());
  EXPECT_FALSE(rows[1].error.empty());
  EXPECT_EQ(rows[2].system, "control:self");
  EXPECT_EQ(rows[2].report->mcd_db, 0.0);
  EXPECT_EQ(rows[3].system, "baseline:el");
  auto table = slurp(c.cfg.out_dir / "reports" / "experiment.tsv");
  EXPECT_NE(table.find(rows[1].system + "\tERROR\tERROR\tERROR\t0"), std::string::npos);
}

TEST(Cli, ExitCodesAndLogLevel) {
  auto dir = fresh("cli");
  EXPECT_NE(run_cli("", dir / "none.log"), 0);
  EXPECT_NE(run_cli("frobnicate", dir / "unknown.log"), 0);
  EXPECT_NE(run_cli("--config " + (dir / "absent.cfg").string() + " extract", dir / "absent.log"), 0);
  std::ofstream(dir / "bad.cfg") << "nlvc.epochs = -1\n";
  EXPECT_EQ(run_cli("--config " + (dir / "bad.cfg").string() + " extract", dir / "bad.log"), 1);
  EXPECT_NE(slurp(dir / "bad.log").find("nlvc"), std::string::npos);

  const auto corpus = (dir / "corpus").string();
  EXPECT_EQ(run_cli("--out " + corpus + " --seed 3 synth-corpus --train-sentences 1 --test-sentences 0 --seconds 0.5", dir / "gen.log"), 0);
  EXPECT_TRUE(fs::exists(dir / "corpus" / "elvckit.cfg"));
  EXPECT_NE(slurp(dir / "gen.log").find("[info]"), std::string::npos);
  EXPECT_NO_THROW(load_config(dir / "corpus" / "elvckit.cfg"));

  EXPECT_EQ(run_cli("--config " + corpus + "/elvckit.cfg --out " + (dir / "o").string() + " train-elvc", dir / "np.log"), 1);
  EXPECT_NE(slurp(dir / "np.log").find("no checkpoint"), std::string::npos);

  setenv("ELVCKIT_LOG", "error", 1);
  EXPECT_EQ(run_cli("--out " + (dir / "quiet").string() + " synth-corpus --train-sentences 1 --test-sentences 0 --seconds 0.5", dir / "quiet.log"), 0);
  unsetenv("ELVCKIT_LOG");
  EXPECT_EQ(slurp(dir / "quiet.log").find("[info]"), std::string::npos);
}
