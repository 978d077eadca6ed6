#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "elvckit/dtw.hpp"
#include "oracles.hpp"

using namespace elvc;
namespace fs = std::filesystem;

namespace {

FeatureSequence random_seq(int frames, int dims, std::mt19937_64& rng, FeatureDomain d = FeatureDomain::Mel) {
  std::normal_distribution<float> n01;
  FeatureSequence s;
  s.domain = d;
  s.data.resize(frames, dims);
  for (Eigen::Index i = 0; i < s.data.size(); ++i) s.data.data()[i] = n01(rng);
  return s;
}

double oracle_cost(const FeatureSequence& a, const FeatureSequence& b) {
  return oracle::exhaustive_dtw(static_cast<int>(a.frames()), static_cast<int>(b.frames()), [&](int i, int j) {
    double s = 0;
    for (Eigen::Index d = 0; d < a.dims(); ++d) {
      const double diff = double(a.data(i, d)) - double(b.data(j, d));
      s += diff * diff;
    }
    return s / double(a.dims());
  });
}

double path_cost(const AlignmentPath& p, const FeatureSequence& a, const FeatureSequence& b) {
  double s = 0;
  for (auto [i, j] : p.pairs) s += frame_distance(row_span(a.data, i), row_span(b.data, j));
  return s;
}

void expect_monotone(const AlignmentPath& p, int m, int n) {
  ASSERT_FALSE(p.pairs.empty());
  EXPECT_EQ(p.pairs.front(), std::make_pair(0, 0));
  EXPECT_EQ(p.pairs.back(), std::make_pair(m - 1, n - 1));
  for (std::size_t k = 1; k < p.size(); ++k) {
    const int di = p.pairs[k].first - p.pairs[k - 1].first, dj = p.pairs[k].second - p.pairs[k - 1].second;
    EXPECT_TRUE((di == 1 && dj == 1) || (di == 1 && dj == 0) || (di == 0 && dj == 1)) << "step " << k;
  }
  EXPECT_GE(p.size(), static_cast<std::size_t>(std::max(m, n)));
  EXPECT_LE(p.size(), static_cast<std::size_t>(m + n - 1));
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

}  // namespace

TEST(Dtw, MatchesExhaustiveEnumeration) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 60; ++t) {
    const int m = 1 + static_cast<int>(rng() % 6), n = 1 + static_cast<int>(rng() % 6), d = 1 + static_cast<int>(rng() % 4);
    auto a = random_seq(m, d, rng), b = random_seq(n, d, rng);
    auto p = dtw(a, b);
    EXPECT_NEAR(p.total_cost, oracle_cost(a, b), 1e-12);
    expect_monotone(p, m, n);
    EXPECT_NEAR(path_cost(p, a, b), p.total_cost, 1e-12);
  }
}

TEST(Dtw, IdenticalSequencesGiveDiagonalAtZeroCost) {
  std::mt19937_64 rng(22);
  auto a = random_seq(30, 8, rng);
  auto p = dtw(a, a);
  EXPECT_EQ(p.total_cost, 0.0);
  ASSERT_EQ(p.size(), 30u);
  for (int k = 0; k < 30; ++k) EXPECT_EQ(p.pairs[k], std::make_pair(k, k));
}

TEST(Dtw, RepeatedFramesAreAbsorbed) {
  std::mt19937_64 rng(23);
  auto a = random_seq(10, 4, rng);
  FeatureSequence slow = a;
  slow.data.resize(20, 4);
  for (int k = 0; k < 20; ++k) slow.data.row(k) = a.data.row(k / 2);
  auto p = dtw(a, slow);
  EXPECT_EQ(p.total_cost, 0.0);
  expect_monotone(p, 10, 20);
}

TEST(Dtw, Errors) {
  std::mt19937_64 rng(24);
  auto a = random_seq(4, 3, rng);
  auto wide = random_seq(4, 5, rng);
  auto mcc = random_seq(4, 3, rng, FeatureDomain::MCC);
  FeatureSequence empty;
  empty.data.resize(0, 3);
  EXPECT_EQ(kind_of([&] { dtw(a, wide); }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([&] { dtw(a, mcc); }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([&] { dtw(a, empty); }), ErrorKind::InvalidInput);
}

TEST(SegmentAlign, PathStaysInsideWordPairs) {
  std::mt19937_64 rng(25);
  auto src = random_seq(40, 6, rng), tgt = random_seq(50, 6, rng);
  src.hop_size = tgt.hop_size = 320;
  WordBoundaries sb{{{320, 3200, "a"}, {4000, 9600, "b"}}};
  WordBoundaries tb{{{0, 4800, "a"}, {6400, 16000, "b"}}};
  auto p = segment_align(src, tgt, sb, tb);
  std::size_t split = 0;
  while (split < p.size() && p.pairs[split].first < 12) ++split;
  ASSERT_GT(split, 0u);
  ASSERT_LT(split, p.size());
  EXPECT_EQ(p.pairs.front(), std::make_pair(1, 0));
  EXPECT_EQ(p.pairs[split - 1], std::make_pair(9, 14));
  EXPECT_EQ(p.pairs[split], std::make_pair(12, 20));
  EXPECT_EQ(p.pairs.back(), std::make_pair(29, 49));
  auto part1 = dtw(detail::slice_frames(src, 1, 10), detail::slice_frames(tgt, 0, 15));
  auto part2 = dtw(detail::slice_frames(src, 12, 30), detail::slice_frames(tgt, 20, 50));
  EXPECT_NEAR(p.total_cost, part1.total_cost + part2.total_cost, 1e-12);
}

TEST(SegmentAlign, Errors) {
  std::mt19937_64 rng(26);
  auto src = random_seq(10, 3, rng), tgt = random_seq(10, 3, rng);
  WordBoundaries one{{{0, 1000, "a"}}};
  WordBoundaries two{{{0, 1000, "a"}, {1000, 2000, "b"}}};
  WordBoundaries none;
  WordBoundaries late{{{5000, 6000, "a"}}};
  EXPECT_EQ(kind_of([&] { segment_align(src, tgt, one, two); }), ErrorKind::BoundaryMismatch);
  EXPECT_EQ(kind_of([&] { segment_align(src, tgt, none, none); }), ErrorKind::BoundaryMismatch);
  EXPECT_EQ(kind_of([&] { segment_align(src, tgt, late, one); }), ErrorKind::InvalidInput);
}

TEST(Warp, PairsRowsAlongThePath) {
  std::mt19937_64 rng(27);
  auto src = random_seq(5, 2, rng), tgt = random_seq(7, 3, rng, FeatureDomain::MCC);
  AlignmentPath p{{{0, 0}, {1, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {4, 6}}, 0.0};
  auto joined = apply_alignment(p, src, tgt);
  ASSERT_EQ(joined.rows(), 7);
  ASSERT_EQ(joined.cols(), 5);
  for (std::size_t k = 0; k < p.size(); ++k) {
    EXPECT_EQ(joined.row(k).head(2), src.data.row(p.pairs[k].first));
    EXPECT_EQ(joined.row(k).tail(3), tgt.data.row(p.pairs[k].second));
  }
  auto [ws, wt] = warp_pair(p, src, tgt);
  EXPECT_EQ(ws.frames(), 7);
  EXPECT_EQ(wt.frames(), 7);
  EXPECT_EQ(wt.domain, FeatureDomain::MCC);
  AlignmentPath bad{{{0, 0}, {5, 1}}, 0.0};
  EXPECT_EQ(kind_of([&] { apply_alignment(bad, src, tgt); }), ErrorKind::InvalidInput);
}

TEST(PathFile, RoundTrip) {
  auto dir = fs::temp_directory_path() / "elvckit_align_pathfile";
  fs::remove_all(dir);
  std::mt19937_64 rng(28);
  auto a = random_seq(13, 4, rng), b = random_seq(17, 4, rng);
  auto p = dtw(a, b);
  write_path(p, "Mel", dir / "x.path");
  auto r = read_path(dir / "x.path");
  EXPECT_EQ(r.feature, "Mel");
  EXPECT_EQ(r.path, p);
  std::ofstream(dir / "bad.path") << "feature\tMel\n0\t0\n";
  EXPECT_EQ(kind_of([&] { read_path(dir / "bad.path"); }), ErrorKind::CorruptFile);
  EXPECT_EQ(kind_of([&] { read_path(dir / "absent.path"); }), ErrorKind::MissingFile);
}
