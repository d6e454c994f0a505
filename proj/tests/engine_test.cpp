#include <gtest/gtest.h>

#include <cmath>

#include "oracles/reference_neuron.hpp"
#include "spikelab/dataset.hpp"
#include "spikelab/engine.hpp"
#include "spikelab/error.hpp"

using namespace spikelab;

namespace {

CurrentMatrix constant(std::vector<double> levels, std::size_t n, double dt) {
  CurrentMatrix m;
  m.dt = dt;
  m.samples = Matrix(levels.size(), n);
  for (std::size_t c = 0; c < levels.size(); ++c) {
    m.channels.push_back("c" + std::to_string(c));
    for (std::size_t t = 0; t < n; ++t) m.samples(c, t) = levels[c];
  }
  return m;
}

CurrentMatrix ramp(std::size_t channels, std::size_t n, double dt) {
  CurrentMatrix m = constant(std::vector<double>(channels, 0.0), n, dt);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t t = 0; t < n; ++t) m.samples(c, t) = 0.5 + 2.5 * std::sin(0.01 * t * (c + 1));
  return m;
}

double first_spike_ms(const SimulationResult& r, std::size_t channel = 0) {
  for (const auto& e : r.spike_raster.events)
    if (e.channel == channel) return (e.step + 1) * r.dt_sim;
  return NAN;
}

}  // namespace

TEST(Engine, LifFirstSpikeNearAnalytic) {
  const double t_star = oracle::lif_first_spike_ms(oracle::Lif{}, 1.5L);
  const auto r = simulate(LifParams{}, constant({1.5}, 3000, 0.01), {}, 1);
  EXPECT_NEAR(first_spike_ms(r), t_star, 0.02 * t_star);
}

TEST(Engine, LifConvergesAsDtShrinks) {
  const double t_star = oracle::lif_first_spike_ms(oracle::Lif{}, 1.5L);
  // Strict improvement while above the 2% floor; once under it, it stays there.
  double prev = INFINITY;
  for (double dt : {2.56, 1.28, 0.64, 0.32, 0.16, 0.08, 0.04, 0.02}) {
    const auto r = simulate(LifParams{}, constant({1.5}, static_cast<std::size_t>(40 / dt), dt), {}, 1);
    const double err = std::abs(first_spike_ms(r) - t_star) / t_star;
    if (prev > 0.02) EXPECT_LT(err, prev) << dt;
    else EXPECT_LT(err, 0.02) << dt;
    prev = err;
  }
  EXPECT_LT(prev, 0.02);
}

TEST(Engine, LifRateMatchesPeriod) {
  // Period with reset to rest: T = tau * ln(rI / (rI - v_th)).
  const double I = 2.0, T = 10.0 * std::log(I / (I - 1.0));
  const double dt = 0.01;
  const auto r = simulate(LifParams{}, constant({I}, 100000, dt), {}, 1);
  const auto stats = spike_statistics(r.spike_raster, r.dt_sim);
  EXPECT_NEAR(stats.rates_hz[0], 1000.0 / T, 0.05 * 1000.0 / T);
}

TEST(Engine, MatchesReferenceSpikeTimesAtSameDt) {
  const double dt = 0.1;
  oracle::Mn ref;
  ref.a = 0.005;
  const auto expected = oracle::spike_times(ref, 2.0L, 300.0L, dt);
  MnParams p;
  p.a = 0.005;
  const auto r = simulate(p, constant({2.0}, 3000, dt), {}, 1);
  ASSERT_EQ(r.spike_raster.events.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i)
    EXPECT_NEAR((r.spike_raster.events[i].step + 1) * dt, expected[i], 1e-9);
}

TEST(Engine, DisplayTracesAreKnotSamples) {
  RunOptions o;
  o.record_full_traces = true;
  const std::size_t f = 7;
  const auto r = simulate(IzhikevichParams{}, ramp(3, 20 * f + 1, 0.1), {}, f, o);
  for (std::size_t v = 0; v < 2; ++v)
    for (std::size_t c = 0; c < 3; ++c) {
      const auto& full = r.full_traces[v][c];
      const auto& disp = r.state_traces[v][c];
      ASSERT_EQ(disp.size(), 21u);
      for (std::size_t i = 0; i < disp.size(); ++i) ASSERT_EQ(disp[i], full[i * f]);
    }
}

TEST(Engine, EventsCoincideWithResets) {
  RunOptions o;
  o.record_full_traces = true;
  auto cur = ramp(4, 4000, 0.1);
  for (auto& x : cur.samples.values()) x += 8.0;
  const auto r = simulate(IzhikevichParams{}, cur, {}, 1, o);
  ASSERT_FALSE(r.spike_raster.events.empty());
  EXPECT_NO_THROW(r.spike_raster.validate());
  for (const auto& e : r.spike_raster.events) EXPECT_EQ(r.full_traces[0][e.channel][e.step], -65.0);
}

TEST(Engine, MaskDoesNotAffectOtherChannels) {
  const auto cur = ramp(5, 2000, 0.1);
  const auto all = simulate(MnParams{}, cur, {}, 1);
  const auto some = simulate(MnParams{}, cur, {true, false, true, false, false}, 1);
  EXPECT_EQ(some.state_traces[0][0], all.state_traces[0][0]);
  EXPECT_EQ(some.state_traces[3][2], all.state_traces[3][2]);
  EXPECT_TRUE(some.state_traces[0][1].empty());
  for (const auto& e : some.spike_raster.events) EXPECT_TRUE(e.channel == 0 || e.channel == 2);
}

TEST(Engine, DeterministicAcrossIsaAndThreads) {
  const auto cur = ramp(13, 1500, 0.1);
  RunOptions scalar;
  scalar.isa = kernels::Isa::scalar;
  const auto ref = simulate(IzhikevichParams{}, cur, {}, 1, scalar);
  for (unsigned threads : {1u, 3u, 8u}) {
    RunOptions o;
    o.threads = threads;
    o.batch_steps = 97;
    const auto r = simulate(IzhikevichParams{}, cur, {}, 1, o);
    EXPECT_EQ(r.state_traces, ref.state_traces) << threads;
    EXPECT_EQ(r.spike_raster, ref.spike_raster) << threads;
  }
}

TEST(Engine, DivergentChannelIsDropped) {
  auto cur = ramp(3, 500, 0.1);
  // Finite but huge negative drive: V overflows through the quadratic term.
  for (std::size_t t = 0; t < 500; ++t) cur.samples(1, t) = -1e300;
  const auto r = simulate(IzhikevichParams{}, cur, {}, 1);
  ASSERT_EQ(r.channel_errors.size(), 1u);
  EXPECT_EQ(r.channel_errors[0].channel, 1u);
  EXPECT_TRUE(r.failed());
  EXPECT_TRUE(r.state_traces[0][1].empty());
  for (const auto& e : r.spike_raster.events) EXPECT_NE(e.channel, 1u);
  EXPECT_EQ(r.state_traces[0][0].size(), 500u);
}

TEST(Engine, CancellationStopsRun) {
  std::atomic<bool> cancel{true};
  RunOptions o;
  o.cancel = &cancel;
  try {
    simulate(LifParams{}, ramp(2, 5000, 0.1), {}, 1, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::cancelled);
  }
}

TEST(Engine, RejectsBadShapes) {
  EXPECT_THROW(simulate(LifParams{}, ramp(2, 10, 0.1), {}, 4), Error);
  EXPECT_THROW(simulate(LifParams{}, ramp(2, 10, 0.1), {true}, 1), Error);
}

TEST(Engine, RunEchoesConfig) {
  const auto ds = synthesize_example(2, 2, 4, 50, 3);
  RunConfig c;
  c.model_id = "izhikevich";
  c.params = {{"d", 2.0}};
  c.preprocess.split_signed = true;
  c.preprocess.upsample_factor = 10;
  c.preprocess.scale = 10.0;
  c.selector = {"B", 1};
  const auto r = run(c, ds);
  EXPECT_EQ(r.param_echo.at("d"), 2.0);
  EXPECT_EQ(r.param_echo.size(), 5u);
  EXPECT_EQ(r.preprocess, c.preprocess);
  EXPECT_EQ(r.selector, c.selector);
  EXPECT_EQ(r.channels.size(), 8u);
  EXPECT_EQ(r.state_traces[0][0].size(), 50u);
  EXPECT_DOUBLE_EQ(r.dt_sim, 1.0);
  EXPECT_EQ(r.spike_raster.n_steps, 491u);
  EXPECT_EQ(r.run_id, derive_run_id(c, ds));
  EXPECT_EQ(run(c, ds).spike_raster, r.spike_raster);
}

TEST(Engine, RunValidation) {
  const auto ds = synthesize_example(2, 2, 4, 50, 3);
  RunConfig c;
  c.selector = {"A", 0};
  c.params = {{"tau_mem", 10.05}};
  EXPECT_THROW(run(c, ds), Error);
  c.params = {};
  c.channel_mask = {true, true};
  try {
    run(c, ds);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.field(), "channel_mask");
  }
  c.channel_mask = {};
  c.selector = {"Q", 0};
  EXPECT_THROW(run(c, ds), Error);
}

TEST(Engine, DecimateAndStatistics) {
  const std::vector<double> x{0, 1, 2, 3, 4, 5, 6};
  EXPECT_EQ(decimate_for_display(x, 3), (std::vector<double>{0, 3, 6}));
  SpikeRaster r{{{0, 0}, {5, 0}, {5, 1}}, 1000, 2};
  const auto s = spike_statistics(r, 0.5);
  EXPECT_EQ(s.counts, (std::vector<std::size_t>{2, 1}));
  EXPECT_DOUBLE_EQ(s.rates_hz[0], 4.0);
}

TEST(Engine, RasterValidateCatchesDisorder) {
  SpikeRaster r{{{5, 0}, {1, 0}}, 10, 1};
  EXPECT_THROW(r.validate(), Error);
  r.events = {{1, 0}, {1, 0}};
  EXPECT_THROW(r.validate(), Error);
  r.events = {{1, 3}};
  EXPECT_THROW(r.validate(), Error);
}

namespace {

TrialDataset constant_trial(double level, std::size_t samples, double rate_hz) {
  TrialDataset d;
  d.name = "const";
  d.sample_rate_hz = rate_hz;
  d.channel_names = {"x"};
  d.trials.push_back(Trial{std::nullopt, std::nullopt, Matrix(1, samples, level)});
  return d;
}

}  // namespace

TEST(Engine, ZeroInputStaysAtRest) {
  const auto r = run(RunConfig{}, constant_trial(0.0, 100, 1000));
  EXPECT_TRUE(r.spike_raster.events.empty());
  for (double v : r.state_traces[0][0]) EXPECT_EQ(v, 0.0);
}

TEST(Engine, RunLevelLifTiming) {
  // Normalized constant 1.0 times scale 1.5; 1 kHz upsampled by 100 gives dt = 0.01 ms.
  RunConfig c;
  c.preprocess.scale = 1.5;
  c.preprocess.upsample_factor = 100;
  const auto r = run(c, constant_trial(0.3, 30, 1000));
  EXPECT_DOUBLE_EQ(r.dt_sim, 0.01);
  const double t_star = 10.0 * std::log(3.0);
  EXPECT_NEAR(first_spike_ms(r), t_star, 0.02 * t_star);
}

TEST(Engine, AllChannelsMaskedOff) {
  const auto r = simulate(LifParams{}, ramp(3, 100, 0.1), {false, false, false}, 1);
  EXPECT_TRUE(r.spike_raster.events.empty());
  for (const auto& var : r.state_traces)
    for (const auto& ch : var) EXPECT_TRUE(ch.empty());
}

TEST(Engine, DecimateAndStatisticsExamples) {
  EXPECT_EQ(decimate_for_display(std::vector<double>(9, 1.0), 4).size(), 3u);
  const std::vector<double> x{1, 2, 3};
  EXPECT_EQ(decimate_for_display(x, 1), x);
  const auto empty = spike_statistics(SpikeRaster{{}, 1000, 3}, 1.0);
  EXPECT_EQ(empty.counts, (std::vector<std::size_t>{0, 0, 0}));
  EXPECT_EQ(empty.rates_hz, (std::vector<double>{0, 0, 0}));
  SpikeRaster r{{{10, 2}, {200, 2}, {400, 2}, {600, 2}, {999, 2}}, 1000, 3};
  EXPECT_DOUBLE_EQ(spike_statistics(r, 1.0).rates_hz[2], 5.0);
}
