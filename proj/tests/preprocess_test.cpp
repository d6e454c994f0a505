#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>

#include "oracles/gaussian_golden.hpp"
#include "spikelab/dataset.hpp"
#include "spikelab/engine.hpp"
#include "spikelab/error.hpp"
#include "spikelab/preprocess.hpp"

using namespace spikelab;

namespace {

CurrentMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> d(-1, 1);
  CurrentMatrix m;
  m.samples = Matrix(rows, cols);
  for (auto& x : m.samples.values()) x = d(g);
  for (std::size_t r = 0; r < rows; ++r) m.channels.push_back("c" + std::to_string(r));
  m.dt = 10.0;
  return m;
}

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

}  // namespace

TEST(Preprocess, ConfigValidation) {
  PreprocessConfig c;
  EXPECT_NO_THROW(c.validate());
  c.upsample_factor = 0;
  EXPECT_THROW(c.validate(), Error);
  c.upsample_factor = 1;
  c.filter_enabled = true;
  c.filter_sigma = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Preprocess, ConfigJsonRoundTripAndUnknownField) {
  PreprocessConfig c;
  c.filter_enabled = true;
  c.filter_sigma = 2.5;
  c.upsample_factor = 7;
  nlohmann::json j = c;
  EXPECT_EQ(j.get<PreprocessConfig>(), c);
  j["bogus"] = 1;
  EXPECT_THROW(j.get<PreprocessConfig>(), Error);
}

TEST(Preprocess, UpsampleLengthDtAndKnots) {
  const auto m = random_matrix(3, 20, 1);
  for (std::size_t f : {1u, 2u, 7u, 100u}) {
    const auto up = upsample(m, f);
    EXPECT_EQ(up.length(), (m.length() - 1) * f + 1);
    EXPECT_DOUBLE_EQ(up.dt, m.dt / f);
    EXPECT_NEAR((up.length() - 1) * up.dt, (m.length() - 1) * m.dt, 1e-9 * m.length() * m.dt);
    for (std::size_t c = 0; c < 3; ++c)
      EXPECT_TRUE(bitwise_equal(decimate_for_display(up.samples.row(c), f), m.samples.row(c)));
  }
}

TEST(Preprocess, UpsampleIsLinear) {
  CurrentMatrix m;
  m.samples = Matrix::from_rows({{0.0, 1.0, -1.0}});
  m.channels = {"x"};
  const auto up = upsample(m, 4);
  const std::vector<double> expect{0.0, 0.25, 0.5, 0.75, 1.0, 0.5, 0.0, -0.5, -1.0};
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(up.samples(0, i), expect[i], 1e-15);
}

TEST(Preprocess, UpsampleRejectsSingleSample) {
  const auto m = random_matrix(2, 1, 3);
  EXPECT_NO_THROW(upsample(m, 1));
  try {
    upsample(m, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_input);
  }
}

TEST(Preprocess, SplitSignedConservesExactly) {
  const auto m = random_matrix(12, 50, 2);
  const auto s = split_signed(m);
  ASSERT_EQ(s.channel_count(), 24u);
  EXPECT_EQ(s.channels[0], "c0+");
  EXPECT_EQ(s.channels[1], "c0-");
  for (std::size_t c = 0; c < 12; ++c)
    for (std::size_t t = 0; t < 50; ++t) {
      const double pos = s.samples(2 * c, t), neg = s.samples(2 * c + 1, t);
      EXPECT_GE(pos, 0.0);
      EXPECT_GE(neg, 0.0);
      EXPECT_EQ(pos - neg, m.samples(c, t));
    }
}

TEST(Preprocess, ZeroOffsetAndScale) {
  auto m = random_matrix(2, 10, 4);
  const auto z = zero_offset(m);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_EQ(z.samples(c, 0), 0.0);
    EXPECT_EQ(z.samples(c, 5), m.samples(c, 5) - m.samples(c, 0));
  }
  const auto zero = scale(m, 0.0);
  for (double x : zero.samples.values()) EXPECT_EQ(x, 0.0);
}

TEST(Preprocess, GaussianMatchesReferenceFilter) {
  CurrentMatrix m;
  m.channels = {"x"};
  m.samples = Matrix::from_rows({std::vector<double>(oracle::kSmoothInput.begin(), oracle::kSmoothInput.end())});
  for (const auto& tc : oracle::kSmoothCases) {
    SCOPED_TRACE(tc.sigma);
    const auto out = smooth(m, tc.sigma);
    for (std::size_t i = 0; i < tc.expected.size(); ++i) EXPECT_NEAR(out.samples(0, i), tc.expected[i], 1e-12);
  }
  const auto w = gaussian_kernel(1.0);
  EXPECT_EQ(w.size(), 9u);
  double sum = 0;
  for (double x : w) sum += x;
  EXPECT_NEAR(sum, 1.0, 1e-15);
}

TEST(Preprocess, NormalizeIdempotentAndBounded) {
  const auto d = synthesize_example(2, 3, 5, 80, 99);
  auto scaled = d;
  for (auto& t : scaled.trials)
    for (auto& x : t.data.values()) x *= 3.7;
  const auto n1 = normalize_dataset(scaled);
  const auto n2 = normalize_dataset(n1);
  for (std::size_t i = 0; i < n1.trials.size(); ++i) {
    const auto a = n1.trials[i].data.values(), b = n2.trials[i].data.values();
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_LE(std::abs(a[k]), 1.0);
      EXPECT_NEAR(a[k], b[k], 1e-12);
    }
  }
  const auto st = compute_stats(n1);
  for (double m : st.max_abs) EXPECT_NEAR(m, 1.0, 1e-12);
}

TEST(Preprocess, EmptyDatasetStats) {
  TrialDataset d;
  d.channel_names = {"a"};
  try {
    compute_stats(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_dataset);
  }
}

TEST(Preprocess, IdentityPipelineReturnsNormalizedTrial) {
  const auto d = synthesize_example(1, 1, 4, 30, 5);
  const auto stats = compute_stats(d);
  const auto out = apply(PreprocessConfig{}, d.trials[0], stats);
  const auto norm = normalize_dataset(d);
  EXPECT_EQ(out.samples, norm.trials[0].data);
  EXPECT_DOUBLE_EQ(out.dt, 1000.0 / d.sample_rate_hz);
}

TEST(Preprocess, FullPipelineShapeAndDeterminism) {
  const auto d = synthesize_example(1, 1, 12, 40, 5);
  const auto stats = compute_stats(d);
  PreprocessConfig c;
  c.filter_enabled = true;
  c.zero_offset = true;
  c.split_signed = true;
  c.scale = 2.0;
  c.upsample_factor = 5;
  const auto a = apply(c, d.trials[0], stats);
  const auto b = apply(c, d.trials[0], stats);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.channel_count(), 24u);
  EXPECT_EQ(output_channel_count(c, 12), 24u);
  EXPECT_EQ(a.length(), 39u * 5 + 1);
  for (std::size_t ch = 0; ch < 24; ++ch) EXPECT_EQ(a.samples(ch, 0), 0.0);
}

TEST(Preprocess, ControlsCoverScaleUpsampleSigma) {
  std::vector<std::string> names;
  for (const auto& p : preprocess_controls()) names.push_back(p.name);
  EXPECT_NE(std::find(names.begin(), names.end(), "scale"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "upsample_factor"), names.end());
}

namespace {

CurrentMatrix row(std::vector<double> x) {
  CurrentMatrix m;
  m.channels = {"x"};
  m.samples = Matrix::from_rows({std::move(x)});
  return m;
}

std::vector<double> values_of(const CurrentMatrix& m, std::size_t r = 0) {
  auto s = m.samples.row(r);
  return {s.begin(), s.end()};
}

TrialDataset one_sensor(std::vector<std::vector<double>> trials) {
  TrialDataset d;
  d.sample_rate_hz = 1000;
  d.channel_names = {"s0"};
  std::int64_t rep = 0;
  for (auto& t : trials) d.trials.push_back(Trial{"A", rep++, Matrix::from_rows({t})});
  return d;
}

}  // namespace

TEST(Preprocess, NormalizeExamples) {
  auto n = normalize_dataset(one_sensor({{1, 2}, {4, -2}}));
  EXPECT_EQ(n.trials[0].data.to_rows()[0], (std::vector<double>{0.25, 0.5}));
  EXPECT_EQ(n.trials[1].data.to_rows()[0], (std::vector<double>{1.0, -0.5}));
  n = normalize_dataset(one_sensor({{0, 0, 0}}));
  EXPECT_EQ(n.trials[0].data.to_rows()[0], (std::vector<double>{0, 0, 0}));
  n = normalize_dataset(one_sensor({{-3}}));
  EXPECT_EQ(n.trials[0].data.to_rows()[0], (std::vector<double>{-1}));
}

TEST(Preprocess, ZeroOffsetExamples) {
  EXPECT_EQ(values_of(zero_offset(row({2, 3, 4}))), (std::vector<double>{0, 1, 2}));
  EXPECT_EQ(values_of(zero_offset(row({0, 0}))), (std::vector<double>{0, 0}));
  EXPECT_EQ(values_of(zero_offset(row({-1, 1}))), (std::vector<double>{0, 2}));
}

TEST(Preprocess, SplitExamples) {
  auto s = split_signed(row({0.5, -0.3}));
  EXPECT_EQ(values_of(s, 0), (std::vector<double>{0.5, 0}));
  EXPECT_EQ(values_of(s, 1), (std::vector<double>{0, 0.3}));
  s = split_signed(row({0, 1, 2}));
  EXPECT_EQ(values_of(s, 0), (std::vector<double>{0, 1, 2}));
  EXPECT_EQ(values_of(s, 1), (std::vector<double>{0, 0, 0}));
}

TEST(Preprocess, SmoothingExamples) {
  for (double x : values_of(smooth(row({5, 5, 5, 5}), 1.0))) EXPECT_NEAR(x, 5.0, 1e-12);

  std::vector<double> impulse(21, 0.0);
  impulse[10] = 1.0;
  const auto out = values_of(smooth(row(impulse), 1.0));
  double sum = 0;
  for (double x : out) sum += x;
  EXPECT_NEAR(sum, 1.0, 1e-9);
  for (int k = 1; k <= 4; ++k) {
    EXPECT_EQ(out[10 - k], out[10 + k]);
    EXPECT_NEAR(out[10 + k] / out[10], std::exp(-0.5 * k * k), 1e-12);
  }

  std::vector<double> ramp(40);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.25 * i - 3;
  const auto sm = values_of(smooth(row(ramp), 1.5));
  const std::size_t radius = static_cast<std::size_t>(4 * 1.5 + 0.5);
  for (std::size_t i = radius; i + radius < ramp.size(); ++i) EXPECT_NEAR(sm[i], ramp[i], 1e-9);
}

TEST(Preprocess, UpsampleExamples) {
  EXPECT_EQ(values_of(upsample(row({0, 3}), 3)), (std::vector<double>{0, 1, 2, 3}));
  EXPECT_EQ(values_of(upsample(row({1, 1, 1}), 4)), std::vector<double>(9, 1.0));
  const auto m = row({0.1, 0.7});
  EXPECT_EQ(upsample(m, 1), m);
}
