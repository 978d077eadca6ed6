#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "elvckit/cdvae/train.hpp"
#include "elvckit/griffin_lim.hpp"
#include "elvckit/manifest.hpp"
#include "elvckit/stft.hpp"

namespace elvc {

enum class EvalLevel { Waveform, Feature };

struct PipelineConfig {
  int sample_rate = 16000;
  StftConfig mel{400, 320};
  int n_mels = 80;
  int sp_frame_size = 1024;
  int ssl_dims = 768;
  int ssl_hop = 320;
  int mcc_order = 24;
  double f0_floor = 70.0;
  double f0_ceiling = 400.0;
  int griffin_lim_iterations = 60;
  MelInversion mel_inversion = MelInversion::nnls;
  PhaseInit phase_init = PhaseInit::advance;
  int griffin_lim_upsample = 4;

  std::vector<FeatureDomain> extract_domains{FeatureDomain::Mel, FeatureDomain::MCC, FeatureDomain::SP};
  std::vector<FeatureDomain> cdvae_features{FeatureDomain::Mel, FeatureDomain::SSL};
  FeatureDomain dtw_feature = FeatureDomain::Mel;
  int model_seed = 7;
  cdvae::TrainConfig nlvc{4, 1e-3, 20, {}, 0.1, 128, 0, false};
  cdvae::TrainConfig elvc{4, 1e-3, 30, {}, 0.1, 128, 0, false};

  std::string target_speaker;  // empty: the speaker of each EL row's parallel utterance
  FeatureDomain out_domain = FeatureDomain::Mel;
  EvalLevel eval_level = EvalLevel::Waveform;

  std::filesystem::path nl_train, nl_test, el_train, el_test;
  std::filesystem::path ssl_dir;
  std::filesystem::path out_dir = "elvckit_out";

  std::vector<FeatureDomain> experiment_dtw{FeatureDomain::Mel, FeatureDomain::MCC};
  std::vector<std::vector<FeatureDomain>> experiment_cdvae{{FeatureDomain::Mel, FeatureDomain::SSL}, {FeatureDomain::Mel}};

  bool operator==(const PipelineConfig&) const = default;
};

/// Frame 1024 / hop 256 Mel analysis used by earlier systems.
inline StftConfig legacy_mel_config() { return {1024, 256}; }

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

inline std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename N>
N parse_number(const std::string& key, const std::string& v) {
  N out{};
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) fail(ErrorKind::InvalidConfig, key + ": not a number: '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorKind::InvalidConfig, key + ": expected true or false");
}

inline FeatureDomain parse_feature(const std::string& key, const std::string& v) {
  auto d = parse_domain(v);
  if (!d) fail(ErrorKind::InvalidConfig, key + ": unknown feature '" + v + "'");
  return *d;
}

inline std::vector<FeatureDomain> parse_set(const std::string& key, const std::string& v) {
  std::vector<FeatureDomain> out;
  for (const auto& s : split(v, '+')) out.push_back(parse_feature(key, s));
  if (out.empty()) fail(ErrorKind::InvalidConfig, key + ": empty feature set");
  return out;
}

inline std::string join_set(const std::vector<FeatureDomain>& v, char sep = '+') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(1, sep) : "") + std::string(to_string(v[i]));
  return out;
}

struct Field {
  std::string key;
  std::function<void(PipelineConfig&, const std::string&, const std::filesystem::path& base)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename N>
Field number(std::string key, N PipelineConfig::*member) {
  return {key, [key, member](PipelineConfig& c, const std::string& v, const auto&) { c.*member = parse_number<N>(key, v); },
          [member](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<N>)
              return fmt(c.*member);
            else
              return std::to_string(c.*member);
          }};
}

inline Field path(std::string key, std::filesystem::path PipelineConfig::*member) {
  return {key,
          [member](PipelineConfig& c, const std::string& v, const std::filesystem::path& base) {
            c.*member = v.empty() ? std::filesystem::path() : detail::resolve(base, v);
          },
          [member](const PipelineConfig& c) { return (c.*member).string(); }};
}

inline void add_train(std::vector<Field>& f, const std::string& p, cdvae::TrainConfig PipelineConfig::*tc) {
  auto num = [&](const std::string& name, auto getter) {
    using N = std::remove_reference_t<decltype(getter(std::declval<cdvae::TrainConfig&>()))>;
    const std::string key = p + "." + name;
    f.push_back({key, [=](PipelineConfig& c, const std::string& v, const auto&) { getter(c.*tc) = parse_number<N>(key, v); },
                 [=](const PipelineConfig& c) {
                   auto copy = c.*tc;
                   if constexpr (std::is_floating_point_v<N>)
                     return fmt(getter(copy));
                   else
                     return std::to_string(getter(copy));
                 }});
  };
  num("batch_size", [](cdvae::TrainConfig& t) -> int& { return t.batch_size; });
  num("lr", [](cdvae::TrainConfig& t) -> double& { return t.lr; });
  num("epochs", [](cdvae::TrainConfig& t) -> int& { return t.epochs; });
  num("segment_length", [](cdvae::TrainConfig& t) -> int& { return t.segment_length; });
  num("kl_warmup_fraction", [](cdvae::TrainConfig& t) -> double& { return t.kl_warmup_fraction; });
  num("seed", [](cdvae::TrainConfig& t) -> std::uint64_t& { return t.seed; });
  num("loss.recon", [](cdvae::TrainConfig& t) -> double& { return t.weights.recon; });
  num("loss.kl", [](cdvae::TrainConfig& t) -> double& { return t.weights.kl; });
  num("loss.latent", [](cdvae::TrainConfig& t) -> double& { return t.weights.latent; });
  const std::string key = p + ".unfreeze_decoder";
  f.push_back({key, [=](PipelineConfig& c, const std::string& v, const auto&) { (c.*tc).unfreeze_decoder = parse_bool(key, v); },
               [=](const PipelineConfig& c) { return std::string((c.*tc).unfreeze_decoder ? "true" : "false"); }});
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    using C = PipelineConfig;
    std::vector<Field> f;
    f.push_back(number("sample_rate", &C::sample_rate));
    f.push_back({"mel.frame_size", [](C& c, const std::string& v, const auto&) { c.mel.frame_size = parse_number<int>("mel.frame_size", v); },
                 [](const C& c) { return std::to_string(c.mel.frame_size); }});
    f.push_back({"mel.hop_size", [](C& c, const std::string& v, const auto&) { c.mel.hop_size = parse_number<int>("mel.hop_size", v); },
                 [](const C& c) { return std::to_string(c.mel.hop_size); }});
    f.push_back(number("mel.n_mels", &C::n_mels));
    f.push_back(number("sp.frame_size", &C::sp_frame_size));
    f.push_back(number("ssl.dims", &C::ssl_dims));
    f.push_back(number("ssl.hop_size", &C::ssl_hop));
    f.push_back(number("mcc_order", &C::mcc_order));
    f.push_back(number("f0.floor", &C::f0_floor));
    f.push_back(number("f0.ceiling", &C::f0_ceiling));
    f.push_back(number("griffin_lim.iterations", &C::griffin_lim_iterations));
    f.push_back({"griffin_lim.inversion",
                 [](C& c, const std::string& v, const auto&) {
                   if (v == "pinv")
                     c.mel_inversion = MelInversion::pinv;
                   else if (v == "nnls")
                     c.mel_inversion = MelInversion::nnls;
                   else
                     fail(ErrorKind::InvalidConfig, "griffin_lim.inversion: expected pinv or nnls");
                 },
                 [](const C& c) { return std::string(c.mel_inversion == MelInversion::pinv ? "pinv" : "nnls"); }});
    f.push_back({"griffin_lim.phase_init",
                 [](C& c, const std::string& v, const auto&) {
                   if (v == "zero")
                     c.phase_init = PhaseInit::zero;
                   else if (v == "advance")
                     c.phase_init = PhaseInit::advance;
                   else
                     fail(ErrorKind::InvalidConfig, "griffin_lim.phase_init: expected zero or advance");
                 },
                 [](const C& c) { return std::string(c.phase_init == PhaseInit::zero ? "zero" : "advance"); }});
    f.push_back(number("griffin_lim.time_upsample", &C::griffin_lim_upsample));
    f.push_back({"extract.features", [](C& c, const std::string& v, const auto&) { c.extract_domains = parse_set("extract.features", v); },
                 [](const C& c) { return join_set(c.extract_domains); }});
    f.push_back({"cdvae.features", [](C& c, const std::string& v, const auto&) { c.cdvae_features = parse_set("cdvae.features", v); },
                 [](const C& c) { return join_set(c.cdvae_features); }});
    f.push_back({"dtw.feature", [](C& c, const std::string& v, const auto&) { c.dtw_feature = parse_feature("dtw.feature", v); },
                 [](const C& c) { return std::string(to_string(c.dtw_feature)); }});
    f.push_back(number("cdvae.model_seed", &C::model_seed));
    add_train(f, "nlvc", &C::nlvc);
    add_train(f, "elvc", &C::elvc);
    f.push_back({"convert.target_speaker", [](C& c, const std::string& v, const auto&) { c.target_speaker = v; },
                 [](const C& c) { return c.target_speaker; }});
    f.push_back({"convert.out_domain", [](C& c, const std::string& v, const auto&) { c.out_domain = parse_feature("convert.out_domain", v); },
                 [](const C& c) { return std::string(to_string(c.out_domain)); }});
    f.push_back({"evaluate.level",
                 [](C& c, const std::string& v, const auto&) {
                   if (v == "waveform")
                     c.eval_level = EvalLevel::Waveform;
                   else if (v == "feature")
                     c.eval_level = EvalLevel::Feature;
                   else
                     fail(ErrorKind::InvalidConfig, "evaluate.level: expected waveform or feature");
                 },
                 [](const C& c) { return std::string(c.eval_level == EvalLevel::Waveform ? "waveform" : "feature"); }});
    f.push_back(path("corpus.nl_train", &C::nl_train));
    f.push_back(path("corpus.nl_test", &C::nl_test));
    f.push_back(path("corpus.el_train", &C::el_train));
    f.push_back(path("corpus.el_test", &C::el_test));
    f.push_back(path("corpus.ssl_dir", &C::ssl_dir));
    f.push_back(path("out_dir", &C::out_dir));
    f.push_back({"experiment.dtw_features",
                 [](C& c, const std::string& v, const auto&) {
                   c.experiment_dtw.clear();
                   for (const auto& s : split(v, ',')) c.experiment_dtw.push_back(parse_feature("experiment.dtw_features", s));
                 },
                 [](const C& c) { return join_set(c.experiment_dtw, ','); }});
    f.push_back({"experiment.cdvae_features",
                 [](C& c, const std::string& v, const auto&) {
                   c.experiment_cdvae.clear();
                   for (const auto& s : split(v, ',')) c.experiment_cdvae.push_back(parse_set("experiment.cdvae_features", s));
                 },
                 [](const C& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.experiment_cdvae.size(); ++i) out += (i ? "," : "") + join_set(c.experiment_cdvae[i]);
                   return out;
                 }});
    return f;
  }();
  return table;
}

}  // namespace config_detail

/// Checks value ranges and that every declared dimension matches its feature domain.
inline void validate(const PipelineConfig& c) {
  require(c.sample_rate > 0, ErrorKind::InvalidConfig, "sample_rate must be positive");
  try {
    validate(c.mel);
    validate(StftConfig{c.sp_frame_size, c.mel.hop_size});
  } catch (const Error& e) {
    fail(ErrorKind::InvalidConfig, e.what());
  }
  require(c.n_mels == default_dims(FeatureDomain::Mel), ErrorKind::InvalidConfig, "mel.n_mels must be 80");
  require(c.ssl_dims == default_dims(FeatureDomain::SSL), ErrorKind::InvalidConfig, "ssl.dims must be 768");
  require(c.mcc_order + 1 == default_dims(FeatureDomain::MCC), ErrorKind::InvalidConfig, "mcc_order must be 24");
  require(c.sp_frame_size / 2 + 1 == default_dims(FeatureDomain::SP), ErrorKind::InvalidConfig, "sp.frame_size must be 1024");
  require(c.ssl_hop > 0, ErrorKind::InvalidConfig, "ssl.hop_size must be positive");
  require(c.f0_floor > 0 && c.f0_ceiling > c.f0_floor, ErrorKind::InvalidConfig, "f0 range is empty");
  require(c.griffin_lim_iterations >= 1, ErrorKind::InvalidConfig, "griffin_lim.iterations must be >= 1");
  require(c.griffin_lim_upsample >= 1 && c.mel.hop_size % c.griffin_lim_upsample == 0, ErrorKind::InvalidConfig,
          "griffin_lim.time_upsample must divide mel.hop_size");
  require(!c.cdvae_features.empty() && c.cdvae_features.size() <= 2, ErrorKind::InvalidConfig, "cdvae.features takes one or two features");
  require(std::find(c.cdvae_features.begin(), c.cdvae_features.end(), c.out_domain) != c.cdvae_features.end(),
          ErrorKind::InvalidConfig, "convert.out_domain must be one of cdvae.features");
  for (const auto& [name, t] : {std::pair{"nlvc", &c.nlvc}, std::pair{"elvc", &c.elvc}}) {
    try {
      cdvae::validate(*t);
    } catch (const Error& e) {
      fail(ErrorKind::InvalidConfig, std::string(name) + ": " + e.what());
    }
  }
}

/// `key = value` lines; `#` starts a comment; `include = PATH` merges another file in place (relative
/// to the including file). Later assignments win.
inline void apply_config_file(PipelineConfig& c, const std::filesystem::path& file, std::set<std::filesystem::path>& stack) {
  const auto canon = std::filesystem::weakly_canonical(file);
  if (stack.count(canon)) fail(ErrorKind::InvalidConfig, "include cycle at " + file.string());
  std::ifstream in(file);
  if (!in) fail(ErrorKind::MissingFile, "cannot open config " + file.string());
  stack.insert(canon);
  const auto base = file.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = file.string() + ":" + std::to_string(lineno);
    if (eq == std::string::npos) fail(ErrorKind::InvalidConfig, where + ": expected key = value");
    const auto key = config_detail::trim(line.substr(0, eq));
    const auto value = config_detail::trim(line.substr(eq + 1));
    if (key == "include") {
      apply_config_file(c, detail::resolve(base, value), stack);
      continue;
    }
    if (key == "mel.preset") {
      if (value == "legacy")
        c.mel = legacy_mel_config();
      else if (value == "default")
        c.mel = StftConfig{400, 320};
      else
        fail(ErrorKind::InvalidConfig, where + ": mel.preset must be default or legacy");
      continue;
    }
    bool found = false;
    for (const auto& f : config_detail::fields()) {
      if (f.key == key) {
        f.set(c, value, base);
        found = true;
        break;
      }
    }
    if (!found) fail(ErrorKind::InvalidConfig, where + ": unknown key '" + key + "'");
  }
  stack.erase(canon);
}

inline PipelineConfig load_config(const std::filesystem::path& file) {
  PipelineConfig c;
  std::set<std::filesystem::path> stack;
  apply_config_file(c, file, stack);
  validate(c);
  return c;
}

inline std::string serialize_config(const PipelineConfig& c) {
  std::string out;
  for (const auto& f : config_detail::fields()) out += f.key + " = " + f.get(c) + '\n';
  return out;
}

inline void save_config(const PipelineConfig& c, const std::filesystem::path& file) {
  detail::atomic_write(file, [&](std::ostream& out) { out << serialize_config(c); });
}

}  // namespace elvc
