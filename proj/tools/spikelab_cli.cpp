// spikelab: batch encoding, parameter sweeps, synthetic data and the service.
//
// Exit codes: 0 ok, 1 usage, 2 data, 3 numerical divergence.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include "spikelab/audio.hpp"
#include "spikelab/dataset.hpp"
#include "spikelab/engine.hpp"
#include "spikelab/error.hpp"
#include "spikelab/model_registry.hpp"
#include "spikelab/serialization.hpp"
#include "spikelab/server.hpp"
#include "spikelab/sweep.hpp"

namespace fs = std::filesystem;
using namespace spikelab;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDivergence = 3;

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::invalid_parameter:
    case ErrorCode::not_found:
    case ErrorCode::invalid_input: return kExitUsage;
    case ErrorCode::numerical_divergence: return kExitDivergence;
    default: return kExitData;
  }
}

void report(const Error& e) {
  std::cerr << nlohmann::json{{"error", {{"code", to_string(e.code())}, {"message", e.what()}, {"field", e.field()}}}}.dump()
            << '\n';
}

// Flags shared by encode and sweep.
struct RunFlags {
  std::string dataset;
  std::string model = "lif";
  std::optional<std::string> class_label;
  std::optional<std::int64_t> repetition;
  std::vector<std::string> params;
  std::string preset;
  std::optional<std::string> preset_file;
  std::vector<std::size_t> channels;
  PreprocessConfig preprocess;
  unsigned threads = 1;

  void attach(CLI::App& cmd) {
    cmd.add_option("--dataset", dataset, "Dataset JSON file")->required();
    cmd.add_option("--model", model, "lif | izhikevich | mn")->capture_default_str();
    cmd.add_option("--class", class_label, "Trial class label");
    cmd.add_option("--repetition", repetition, "Trial repetition index");
    cmd.add_option("--param", params, "Parameter override NAME=VALUE (repeatable)");
    cmd.add_option("--preset", preset, "Start from a named preset");
    cmd.add_option("--preset-file", preset_file, "Extra preset JSON file");
    cmd.add_option("--channels", channels, "Enabled channel indices after preprocessing (default all)")
        ->delimiter(',');
    cmd.add_flag("--filter_enabled,--filter-enabled", preprocess.filter_enabled, "Gaussian smoothing");
    cmd.add_option("--filter_sigma,--filter-sigma", preprocess.filter_sigma, "Filter sigma in samples")
        ->capture_default_str();
    cmd.add_flag("--zero_offset,--zero-offset", preprocess.zero_offset, "Start every channel at zero");
    cmd.add_flag("--split_signed,--split-signed", preprocess.split_signed, "Split into +/- channels");
    cmd.add_option("--upsample,--upsample_factor", preprocess.upsample_factor, "Integer up-sampling factor")
        ->capture_default_str();
    cmd.add_option("--scale", preprocess.scale, "Input gain")->capture_default_str();
    cmd.add_option("--threads", threads, "Simulation worker threads")->capture_default_str();
  }

  ModelRegistry registry() const {
    return preset_file ? ModelRegistry::with_preset_file(*preset_file) : ModelRegistry::bundled();
  }

  RunConfig config(const ModelRegistry& reg, const TrialDataset& ds) const {
    RunConfig c;
    c.model_id = model;
    reg.describe(model);
    if (!preset.empty()) c.params = reg.preset(model, preset);
    for (const auto& p : params) {
      const auto eq = p.find('=');
      if (eq == std::string::npos || eq == 0)
        throw Error(ErrorCode::invalid_parameter, "--param expects NAME=VALUE, got '" + p + "'", p);
      const std::string name = p.substr(0, eq);
      try {
        std::size_t used = 0;
        const double v = std::stod(p.substr(eq + 1), &used);
        if (used != p.size() - eq - 1) throw std::invalid_argument(p);
        c.params[name] = v;
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::invalid_parameter, "--param " + name + ": not a number", name);
      }
    }
    c.preprocess = preprocess;
    c.selector = {class_label, repetition};
    if (!channels.empty()) {
      c.channel_mask.assign(output_channel_count(preprocess, ds.channel_names.size()), false);
      for (auto ch : channels) {
        if (ch >= c.channel_mask.size())
          throw Error(ErrorCode::invalid_parameter,
                      "--channels index " + std::to_string(ch) + " out of range", "channels");
        c.channel_mask[ch] = true;
      }
    }
    return c;
  }
};

struct AudioFlags {
  AudioConfig config;
  void attach(CLI::App& cmd) {
    cmd.add_option("--audio-rate", config.sample_rate_hz, "Audio sample rate (Hz)")->capture_default_str();
    cmd.add_option("--tick-ms", config.tick_duration_ms, "Tick duration (ms)")->capture_default_str();
    cmd.add_option("--tick-hz", config.tick_frequency_hz, "Sawtooth frequency (Hz)")->capture_default_str();
    cmd.add_option("--time-scale", config.playback_time_scale, "Playback slow-down factor")
        ->capture_default_str();
    cmd.add_option("--gain", config.master_gain, "Master gain in (0, 1]")->capture_default_str();
  }
};

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
}

nlohmann::json echo_flags(const std::vector<std::string>& args) { return {{"argv", args}}; }

int cmd_encode(const RunFlags& flags, const AudioFlags& audio, const std::string& out_dir,
               const std::optional<std::string>& audio_path, const std::vector<std::string>& args) {
  const auto reg = flags.registry();
  const TrialDataset ds = load(flags.dataset);
  RunConfig config = flags.config(reg, ds);
  if (audio_path) audio.config.validate();

  RunOptions opts;
  opts.registry = &reg;
  opts.threads = flags.threads;
  SimulationResult r = run(config, ds, opts);
  r.metadata = echo_flags(args);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  write_file(dir / "result.json", to_json(r).dump() + "\n");
  write_file(dir / "raster.csv", raster_csv(r.spike_raster, r.dt_sim));
  std::cout << (dir / "result.json").string() << '\n' << (dir / "raster.csv").string() << '\n';
  if (audio_path) {
    const auto wav = encode_wav(render(r.spike_raster, r.dt_sim, audio.config));
    write_file(*audio_path, std::string_view(reinterpret_cast<const char*>(wav.data()), wav.size()));
    std::cout << *audio_path << '\n';
  }
  if (r.failed()) {
    for (const auto& e : r.channel_errors) report(DivergenceError(e.step, e.variable, e.channel));
    return kExitDivergence;
  }
  return 0;
}

int cmd_sweep(const RunFlags& flags, const SweepSpec& spec, const std::optional<std::string>& out) {
  const auto reg = flags.registry();
  const TrialDataset ds = load(flags.dataset);
  const RunConfig base = flags.config(reg, ds);
  RunOptions opts;
  opts.registry = &reg;
  opts.threads = flags.threads;
  const SweepResult result = run_sweep(base, spec, ds, opts);
  const std::string csv = sweep_csv(result);
  if (out) {
    write_file(*out, csv);
    std::cout << *out << '\n';
  } else {
    std::cout << csv;
  }
  return 0;
}

int cmd_serve(ServerConfig config) {
  // Block termination signals before any thread starts; the main thread
  // waits for them below.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  HttpServer server(std::move(config));
  const int port = server.start();
  std::cout << port << std::endl;
  std::cerr << "listening on port " << port << '\n';
  int sig = 0;
  sigwait(&set, &sig);
  std::cerr << "stopping (signal " << sig << ")\n";
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spike-train encoding workbench"};
  app.require_subcommand(1);
  const std::vector<std::string> args(argv + 1, argv + argc);

  auto* encode = app.add_subcommand("encode", "Encode one trial and write result.json / raster.csv");
  RunFlags encode_flags;
  AudioFlags encode_audio;
  std::string out_dir;
  std::optional<std::string> audio_path;
  encode_flags.attach(*encode);
  encode_audio.attach(*encode);
  encode->add_option("--out", out_dir, "Output directory")->required();
  encode->add_option("--audio", audio_path, "Also render the raster to this WAV file");

  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter and tabulate spike statistics");
  RunFlags sweep_flags;
  SweepSpec spec;
  std::optional<std::string> sweep_out;
  sweep_flags.attach(*sweep);
  sweep->add_option("--sweep-param,--sweep", spec.parameter, "Parameter to sweep")->required();
  sweep->add_option("--from", spec.from, "First value")->required();
  sweep->add_option("--to", spec.to, "Last value")->required();
  sweep->add_option("--steps", spec.steps, "Number of values (endpoints included)")->required();
  sweep->add_option("--out", sweep_out, "CSV output file (default stdout)");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::size_t classes = 2, repetitions = 3, channels = 12, samples = 200;
  std::uint64_t seed = 7;
  double sample_rate = 100.0;
  std::string synth_out;
  synth->add_option("--classes", classes)->capture_default_str();
  synth->add_option("--repetitions", repetitions)->capture_default_str();
  synth->add_option("--channels", channels)->capture_default_str();
  synth->add_option("--samples", samples)->capture_default_str();
  synth->add_option("--seed", seed)->capture_default_str();
  synth->add_option("--sample-rate", sample_rate, "Sampling rate (Hz)")->capture_default_str();
  synth->add_option("--out", synth_out, "Output dataset JSON")->required();

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  ServerConfig server_config;
  std::optional<std::string> server_presets;
  double session_ttl_s = 1800.0;
  serve->add_option("--host", server_config.host)->capture_default_str();
  serve->add_option("--port", server_config.port, "0 picks a free port")
      ->envname("SPIKELAB_PORT")
      ->capture_default_str();
  serve->add_option("--preset-file", server_presets)->envname("SPIKELAB_PRESET_FILE");
  serve->add_option("--max-upload-mb", server_config.max_upload_mb)
      ->envname("SPIKELAB_MAX_UPLOAD_MB")
      ->capture_default_str();
  serve->add_option("--session-ttl-s", session_ttl_s)->capture_default_str();
  serve->add_option("--threads", server_config.service.sim_threads, "Simulation threads per run")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*encode) return cmd_encode(encode_flags, encode_audio, out_dir, audio_path, args);
    if (*sweep) return cmd_sweep(sweep_flags, spec, sweep_out);
    if (*synth) {
      const auto ds = synthesize_example(classes, repetitions, channels, samples, seed, sample_rate);
      const fs::path out(synth_out);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      save(ds, out);
      std::cout << out.string() << '\n';
      return 0;
    }
    if (*serve) {
      if (server_presets) server_config.preset_file = *server_presets;
      server_config.service.session_ttl =
          std::chrono::milliseconds(static_cast<std::int64_t>(session_ttl_s * 1000.0));
      return cmd_serve(std::move(server_config));
    }
  } catch (const DivergenceError& e) {
    report(e);
    return kExitDivergence;
  } catch (const Error& e) {
    report(e);
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
