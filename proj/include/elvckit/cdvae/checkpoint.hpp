#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "elvckit/audio.hpp"
#include "elvckit/cdvae/train.hpp"

namespace elvc::cdvae {

// Versioned little-endian binary: "CDVK" u32 version, architecture, speakers, domain blocks with their
// normalisation statistics, named shape-tagged f32 tensor blocks, then optimiser progress.
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct Checkpoint {
  CdvaeModel<T> model;
  TrainingState<T> state;
};

namespace detail {

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& out) : out_(out) {}
  void u8(std::uint8_t v) { elvc::detail::put_le(out_, v); }
  void u32(std::uint32_t v) { elvc::detail::put_le(out_, v); }
  void i32(std::int32_t v) { elvc::detail::put_le(out_, static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { elvc::detail::put_le(out_, static_cast<std::uint64_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { elvc::detail::put_le(out_, std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  template <typename T>
  void tensor(const std::string& name, const Tensor<T>& t) {
    str(name);
    u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) u32(static_cast<std::uint32_t>(d));
    for (auto v : t.values()) f32(static_cast<float>(v));
  }

 private:
  std::ostream& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}
  std::uint8_t u8() { return take<std::uint8_t>(); }
  std::uint32_t u32() { return take<std::uint32_t>(); }
  std::int32_t i32() { return static_cast<std::int32_t>(take<std::uint32_t>()); }
  std::int64_t i64() { return static_cast<std::int64_t>(take<std::uint64_t>()); }
  float f32() { return std::bit_cast<float>(take<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(take<std::uint64_t>()); }
  std::string str() {
    auto n = u32();
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  template <typename T>
  std::pair<std::string, Tensor<T>> tensor() {
    auto name = str();
    auto rank = u32();
    if (rank == 0 || rank > 8) bad("tensor " + name + " has invalid rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape.push_back(u32());
      if (shape.back() == 0) bad("tensor " + name + " has a zero dimension");
    }
    const auto n = ad::shape_size(shape);
    need(4 * n);
    std::vector<T> values(n);
    for (auto& v : values) v = static_cast<T>(f32());
    return {name, Tensor<T>(shape, std::move(values))};
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  [[noreturn]] static void bad(const std::string& why) { fail(ErrorKind::IncompatibleCheckpoint, why); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) bad("checkpoint is truncated");
  }
  template <typename U>
  U take() {
    need(sizeof(U));
    auto v = elvc::detail::get_le<U>(bytes_, pos_);
    pos_ += sizeof(U);
    return v;
  }
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
void write_progress(ByteWriter& w, const StageProgress<T>& p) {
  w.i32(p.epochs_done);
  w.i64(p.optimizer.step);
  w.f64(p.optimizer.lr);
  w.f64(p.optimizer.beta1);
  w.f64(p.optimizer.beta2);
  w.f64(p.optimizer.eps);
  w.u32(static_cast<std::uint32_t>(p.optimizer.m.size()));
  for (std::size_t i = 0; i < p.optimizer.m.size(); ++i) {
    w.tensor("m", p.optimizer.m[i]);
    w.tensor("v", p.optimizer.v[i]);
  }
}

template <typename T>
StageProgress<T> read_progress(ByteReader& r) {
  StageProgress<T> p;
  p.epochs_done = r.i32();
  p.optimizer.step = r.i64();
  p.optimizer.lr = r.f64();
  p.optimizer.beta1 = r.f64();
  p.optimizer.beta2 = r.f64();
  p.optimizer.eps = r.f64();
  auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    p.optimizer.m.push_back(r.tensor<T>().second);
    p.optimizer.v.push_back(r.tensor<T>().second);
  }
  return p;
}

template <typename T>
void write_stack(ByteWriter& w, const ConvStack<T>& s) {
  for (std::size_t l = 0; l < s.layers(); ++l) {
    w.tensor(s.weights[l].name, s.weights[l].value);
    w.tensor(s.biases[l].name, s.biases[l].value);
  }
}

template <typename T>
void fill_stack(ConvStack<T>& s, std::map<std::string, Tensor<T>>& blocks) {
  for (auto* p : s.parameters()) {
    auto it = blocks.find(p->name);
    if (it == blocks.end()) ByteReader::bad("missing tensor " + p->name);
    if (it->second.shape() != p->value.shape())
      ByteReader::bad("tensor " + p->name + " has shape " + ad::shape_str(it->second.shape()) + ", architecture expects " +
                      ad::shape_str(p->value.shape()));
    p->value = std::move(it->second);
    blocks.erase(it);
  }
}

}  // namespace detail

template <typename T>
void save_checkpoint(const Checkpoint<T>& ckpt, const std::filesystem::path& path) {
  const auto& m = ckpt.model;
  elvc::detail::atomic_write(path, [&](std::ostream& out) {
    detail::ByteWriter w(out);
    out.write("CDVK", 4);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(m.arch.encoder_hidden.size()));
    for (int v : m.arch.encoder_hidden) w.i32(v);
    w.u32(static_cast<std::uint32_t>(m.arch.decoder_hidden.size()));
    for (int v : m.arch.decoder_hidden) w.i32(v);
    w.i32(m.arch.latent_dim);
    w.i32(m.arch.kernel);
    w.f32(m.arch.slope);
    w.u32(static_cast<std::uint32_t>(m.speakers.size()));
    for (const auto& s : m.speakers) w.str(s);
    w.u32(static_cast<std::uint32_t>(m.domains.size()));
    for (const auto& b : m.domains) {
      w.u8(static_cast<std::uint8_t>(b.domain));
      w.i32(b.dims);
      for (float v : b.mean) w.f32(v);
      for (float v : b.stddev) w.f32(v);
    }
    w.u8(m.el_encoder ? 1 : 0);
    for (const auto& b : m.domains) {
      detail::write_stack(w, b.encoder);
      detail::write_stack(w, b.decoder);
    }
    if (m.el_encoder) detail::write_stack(w, *m.el_encoder);
    w.u8(ckpt.state.stage1_done ? 1 : 0);
    detail::write_progress(w, ckpt.state.stage1);
    detail::write_progress(w, ckpt.state.stage2);
  });
}

template <typename T = float>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::NotPretrained, "no checkpoint at " + path.string());
  auto bytes = elvc::detail::read_all_bytes(path);
  if (bytes.size() < 8 || std::string(bytes.begin(), bytes.begin() + 4) != "CDVK")
    detail::ByteReader::bad(path.string() + ": bad checkpoint magic");
  detail::ByteReader r(std::vector<unsigned char>(bytes.begin() + 4, bytes.end()));
  if (r.u32() != kCheckpointVersion) detail::ByteReader::bad(path.string() + ": unsupported checkpoint version");

  Architecture arch;
  auto read_widths = [&] {
    std::vector<int> v(r.u32());
    if (v.size() > 64) detail::ByteReader::bad("implausible layer count");
    for (auto& x : v) {
      x = r.i32();
      if (x <= 0) detail::ByteReader::bad("non-positive layer width");
    }
    return v;
  };
  arch.encoder_hidden = read_widths();
  arch.decoder_hidden = read_widths();
  arch.latent_dim = r.i32();
  arch.kernel = r.i32();
  arch.slope = r.f32();
  if (arch.latent_dim <= 0 || arch.kernel <= 0 || arch.kernel % 2 == 0) detail::ByteReader::bad("invalid architecture header");
  std::vector<std::string> speakers(r.u32());
  for (auto& s : speakers) s = r.str();
  auto n_domains = r.u32();
  if (n_domains < 1 || n_domains > 2) detail::ByteReader::bad("checkpoint must hold one or two domains");
  std::vector<DomainSpec> specs;
  std::vector<std::pair<std::vector<float>, std::vector<float>>> stats;
  for (std::uint32_t i = 0; i < n_domains; ++i) {
    auto code = r.u8();
    if (code > 3) detail::ByteReader::bad("unknown domain code");
    auto dims = r.i32();
    if (dims <= 0 || dims > 1 << 20) detail::ByteReader::bad("invalid domain dims");
    specs.push_back({static_cast<FeatureDomain>(code), dims});
    std::vector<float> mean(static_cast<std::size_t>(dims)), sd(static_cast<std::size_t>(dims));
    for (auto& v : mean) v = r.f32();
    for (auto& v : sd) v = r.f32();
    stats.emplace_back(std::move(mean), std::move(sd));
  }
  const bool has_el = r.u8() != 0;

  Checkpoint<T> ckpt;
  try {
    ckpt.model = make_model<T>(specs, speakers, 0, arch);
  } catch (const Error& e) {
    detail::ByteReader::bad(std::string("checkpoint metadata rejected: ") + e.what());
  }
  if (has_el) init_el_encoder(ckpt.model);
  // Architecture gives the expected shapes; blocks are consumed by name.
  std::size_t expected = 0;
  for (auto& b : ckpt.model.domains) expected += b.encoder.parameters().size() + b.decoder.parameters().size();
  if (has_el) expected += ckpt.model.el_encoder->parameters().size();
  std::map<std::string, Tensor<T>> blocks;
  for (std::size_t i = 0; i < expected; ++i) {
    auto [name, t] = r.template tensor<T>();
    blocks.emplace(std::move(name), std::move(t));
  }
  for (std::size_t i = 0; i < ckpt.model.domains.size(); ++i) {
    auto& b = ckpt.model.domains[i];
    b.mean = stats[i].first;
    b.stddev = stats[i].second;
    detail::fill_stack(b.encoder, blocks);
    detail::fill_stack(b.decoder, blocks);
  }
  if (has_el) detail::fill_stack(*ckpt.model.el_encoder, blocks);
  if (!blocks.empty()) detail::ByteReader::bad("unexpected tensor " + blocks.begin()->first);
  ckpt.state.stage1_done = r.u8() != 0;
  ckpt.state.stage1 = detail::read_progress<T>(r);
  ckpt.state.stage2 = detail::read_progress<T>(r);
  if (!r.at_end()) detail::ByteReader::bad("trailing bytes after checkpoint payload");
  return ckpt;
}

/// Raw float bytes of a stack; equal strings mean bit-identical parameters.
template <typename T>
std::string parameter_bytes(const ConvStack<T>& s) {
  std::ostringstream out;
  detail::ByteWriter w(out);
  detail::write_stack(w, s);
  return out.str();
}

}  // namespace elvc::cdvae
