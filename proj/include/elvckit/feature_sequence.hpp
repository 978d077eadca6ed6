#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "elvckit/error.hpp"

namespace elvc {

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class FeatureDomain : std::uint8_t { Mel = 0, MCC = 1, SP = 2, SSL = 3 };

inline constexpr std::array<FeatureDomain, 4> kAllDomains{FeatureDomain::Mel, FeatureDomain::MCC, FeatureDomain::SP,
                                                         FeatureDomain::SSL};

constexpr std::string_view to_string(FeatureDomain d) {
  switch (d) {
    case FeatureDomain::Mel: return "Mel";
    case FeatureDomain::MCC: return "MCC";
    case FeatureDomain::SP: return "SP";
    case FeatureDomain::SSL: return "SSL";
  }
  return "?";
}

inline std::optional<FeatureDomain> parse_domain(std::string_view s) {
  for (auto d : kAllDomains)
    if (to_string(d) == s) return d;
  return std::nullopt;
}

inline FeatureDomain domain_or_throw(std::string_view s) {
  auto d = parse_domain(s);
  if (!d) fail(ErrorKind::InvalidInput, "unknown feature domain '" + std::string(s) + "'");
  return *d;
}

/// Lower-case tag used in file names (utt.mel.cdfx, utt.ssl.cdfx, ...).
inline std::string file_tag(FeatureDomain d) {
  std::string s(to_string(d));
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// Default dimensionality of each domain: 80 Mel, 24 MCC + energy, 513 SP, 768 SSL.
constexpr int default_dims(FeatureDomain d) {
  switch (d) {
    case FeatureDomain::Mel: return 80;
    case FeatureDomain::MCC: return 25;
    case FeatureDomain::SP: return 513;
    case FeatureDomain::SSL: return 768;
  }
  return 0;
}

/// Time-major feature matrix tagged with its domain and frame grid.
struct FeatureSequence {
  FeatureDomain domain = FeatureDomain::Mel;
  FeatureMatrix data;  // frames x dims
  int hop_size = 320;
  int sample_rate = 16000;
  std::string utterance_id;

  Eigen::Index frames() const { return data.rows(); }
  Eigen::Index dims() const { return data.cols(); }
};

inline bool all_finite(const FeatureMatrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (!std::isfinite(m.data()[i])) return false;
  return true;
}

/// Throws DomainMismatch when strict and dims differ from the domain default, InvalidData on non-finite values.
inline void validate(const FeatureSequence& seq, bool strict_dims) {
  require(seq.hop_size > 0 && seq.sample_rate > 0, ErrorKind::InvalidData, "hop_size and sample_rate must be positive");
  if (strict_dims && seq.dims() != default_dims(seq.domain))
    fail(ErrorKind::DomainMismatch, std::string(to_string(seq.domain)) + " expects " +
                                        std::to_string(default_dims(seq.domain)) + " dims, got " +
                                        std::to_string(seq.dims()));
  require(all_finite(seq.data), ErrorKind::InvalidData, "feature matrix contains non-finite values");
}

}  // namespace elvc
