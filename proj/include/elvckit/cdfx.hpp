#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>

#include "elvckit/audio.hpp"
#include "elvckit/feature_sequence.hpp"

namespace elvc {

// CDFX layout (little endian):
//   "CDFX" | u32 version=1 | u8 domain | u32 dims | u32 frames | u32 hop | u32 sample_rate | f32[frames*dims]
inline constexpr std::uint32_t kCdfxVersion = 1;
inline constexpr std::size_t kCdfxHeaderBytes = 25;

inline void write_features(const FeatureSequence& seq, const std::filesystem::path& path) {
  require(seq.hop_size > 0 && seq.sample_rate > 0, ErrorKind::InvalidInput, "hop_size and sample_rate must be positive");
  require(all_finite(seq.data), ErrorKind::InvalidData, path.string() + ": refusing to write non-finite features");
  detail::atomic_write(path, [&](std::ostream& out) {
    out.write("CDFX", 4);
    detail::put_le<std::uint32_t>(out, kCdfxVersion);
    detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(seq.domain));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.dims()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.frames()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.hop_size));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.sample_rate));
    for (Eigen::Index i = 0; i < seq.data.size(); ++i)
      detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(seq.data.data()[i]));
  });
}

inline FeatureSequence read_features(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::IoError, "no such file " + path.string());
  auto bytes = detail::read_all_bytes(path);
  auto corrupt = [&](const std::string& why) { fail(ErrorKind::CorruptFile, path.string() + ": " + why); };
  if (bytes.size() < kCdfxHeaderBytes) corrupt("shorter than the CDFX header");
  if (std::string(bytes.begin(), bytes.begin() + 4) != "CDFX") corrupt("bad magic");
  if (detail::get_le<std::uint32_t>(bytes, 4) != kCdfxVersion) corrupt("unsupported version");
  auto domain = bytes[8];
  if (domain > 3) corrupt("unknown domain code " + std::to_string(domain));
  auto dims = detail::get_le<std::uint32_t>(bytes, 9);
  auto frames = detail::get_le<std::uint32_t>(bytes, 13);
  auto hop = detail::get_le<std::uint32_t>(bytes, 17);
  auto rate = detail::get_le<std::uint32_t>(bytes, 21);
  if (hop == 0 || rate == 0) corrupt("zero hop or sample rate");
  const std::uint64_t payload = static_cast<std::uint64_t>(dims) * frames * 4;
  if (bytes.size() - kCdfxHeaderBytes != payload) corrupt("payload length does not match dims x frames");

  FeatureSequence seq;
  seq.domain = static_cast<FeatureDomain>(domain);
  seq.hop_size = static_cast<int>(hop);
  seq.sample_rate = static_cast<int>(rate);
  seq.utterance_id = path.filename().string();
  if (auto dot = seq.utterance_id.find('.'); dot != std::string::npos) seq.utterance_id.resize(dot);
  seq.data.resize(frames, dims);
  for (Eigen::Index i = 0; i < seq.data.size(); ++i)
    seq.data.data()[i] =
        std::bit_cast<float>(detail::get_le<std::uint32_t>(bytes, kCdfxHeaderBytes + 4 * static_cast<std::size_t>(i)));
  require(all_finite(seq.data), ErrorKind::InvalidData, path.string() + ": non-finite payload");
  return seq;
}

/// Loads externally produced self-supervised embeddings and checks them against the expected framing.
inline FeatureSequence ingest_ssl(const std::filesystem::path& path, int expected_hop = 320, int expected_dims = 768) {
  auto seq = read_features(path);
  if (seq.domain != FeatureDomain::SSL)
    fail(ErrorKind::DomainMismatch, path.string() + ": domain " + std::string(to_string(seq.domain)) + ", expected SSL");
  if (seq.dims() != expected_dims)
    fail(ErrorKind::DomainMismatch,
         path.string() + ": " + std::to_string(seq.dims()) + " dims, expected " + std::to_string(expected_dims));
  if (seq.hop_size != expected_hop)
    fail(ErrorKind::HopMismatch,
         path.string() + ": hop " + std::to_string(seq.hop_size) + ", expected " + std::to_string(expected_hop));
  return seq;
}

}  // namespace elvc
