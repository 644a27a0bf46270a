#include "qjump_cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "qjump/error.hpp"
#include "qjump/histogram_io.hpp"
#include "qjump/random.hpp"
#include "qjump/synth.hpp"
#include "qjump_cli/report.hpp"

namespace qjump::cli {
namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

void cmd_simulate(const RunConfig& c, const std::filesystem::path& out) {
  if (!c.cascade) throw ConfigError("simulate needs a [cascade] section");
  if (!c.grid) throw ConfigError("simulate needs a [grid] section");
  const CorrelationCurve curve = pair_correlation(*c.cascade, *c.grid);
  std::ofstream f = open_output(out);
  f << "dt_ps,correlation" << (c.monitor ? ",monitor" : "") << '\n';
  for (std::size_t i = 0; i < curve.values.size(); ++i) {
    const double t = curve.grid.at(i);
    f << fmt(t / kPicosecond) << ',' << fmt(curve.values[i]);
    if (c.monitor) f << ',' << fmt(monitor(t, *c.monitor));
    f << '\n';
  }
  if (!f) throw ConfigError("write failed for " + out.string());
}

CalibrationSummary cmd_calibrate(const RunConfig& c, const std::filesystem::path& raw,
                                 const std::filesystem::path& out) {
  const Histogram h = read_histogram_csv(raw);
  std::optional<BackgroundFloor> floor;
  if (c.response.floor) floor = BackgroundFloor{c.response.floor_half_window};
  const DetectorResponse g = normalize_response(h, floor);

  CalibrationSummary s;
  s.bins = g.size();
  double sum = 0.0;
  double first = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    sum += h.counts[i];
    first += h.counts[i] * h.center(i);
  }
  s.raw_centroid = first / sum;
  s.fwhm = g.fwhm();
  s.stddev = g.stddev();
  s.support = g.support();

  std::ofstream f = open_output(out);
  write_response_csv(f, g);
  if (!f) throw ConfigError("write failed for " + out.string());
  return s;
}

void cmd_generate(const RunConfig& c, const std::filesystem::path& out,
                  const std::optional<std::filesystem::path>& response_file) {
  SynthConfig synth = c.synth.value_or(SynthConfig{});
  synth.monitor = resolve_monitor(c);
  synth.seed = derive_seed(c.seed, "generate");
  synth.validate();
  DetectorResponse g;
  if (response_file) {
    std::optional<BackgroundFloor> floor;
    if (c.response.floor) floor = BackgroundFloor{c.response.floor_half_window};
    g = read_response_csv(*response_file, floor);
  } else {
    g = resolve_response(c, synth.bin_width);
  }
  const Histogram h = sample_events(synth, g, c.threads);
  std::ofstream f = open_output(out);
  write_histogram_csv(f, h);
  if (!f) throw ConfigError("write failed for " + out.string());
}

FitSpec build_fit_spec(const RunConfig& c, const Histogram& hist, const DetectorResponse& g) {
  FitSpec spec;
  spec.free = c.fit.free;
  spec.initial = auto_initial_guess(hist, g);
  for (const Param p : kAllParams) {
    if (const auto v = c.fit.initial[static_cast<std::size_t>(p)]) spec.initial[p] = *v;
  }
  if (!c.fit.initial[static_cast<std::size_t>(Param::kTau)]) {
    spec.initial[Param::kTau] =
        fit_tail(hist, g, spec.initial[Param::kDelay], spec.initial[Param::kBackground]).tau;
  }
  spec.lower = default_lower_bounds();
  spec.upper = default_upper_bounds();
  spec.weight_mode = c.fit.weights;
  spec.window_lo = c.fit.window_lo.value_or(hist.center(0));
  spec.window_hi = c.fit.window_hi.value_or(hist.center(hist.size() - 1));
  spec.oversample = c.fit.oversample;
  spec.max_iterations = c.fit.max_iterations;
  return spec;
}

FitOutcome cmd_fit(const RunConfig& c, const std::filesystem::path& data,
                   const std::filesystem::path& response, const std::filesystem::path& report,
                   const std::optional<std::filesystem::path>& residuals) {
  const Histogram hist = read_histogram_csv(data);
  std::optional<BackgroundFloor> floor;
  if (c.response.floor) floor = BackgroundFloor{c.response.floor_half_window};
  const DetectorResponse g = read_response_csv(response, floor);
  const FitSpec spec = build_fit_spec(c, hist, g);

  FitOutcome outcome{fit(hist, g, spec), std::nullopt};
  if (c.fit.bootstrap > 0) {
    outcome.bootstrap = bootstrap_uncertainty(hist, g, spec, c.fit.bootstrap,
                                              derive_seed(c.seed, "bootstrap"), c.threads);
  }

  ReportInputs inputs;
  inputs.data = {data.string(), sha256_file(data)};
  inputs.response = {response.string(), sha256_file(response)};
  inputs.seed = c.seed;
  {
    std::ofstream f = open_output(report);
    f << fit_report_json(outcome.result, spec, outcome.bootstrap, hist, inputs) << '\n';
    if (!f) throw ConfigError("write failed for " + report.string());
  }
  if (residuals) {
    std::ofstream f = open_output(*residuals);
    write_residual_csv(f, hist, model_curve(outcome.result.estimates, g, hist.grid(), spec.oversample));
    if (!f) throw ConfigError("write failed for " + residuals->string());
  }
  return outcome;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quantum-jump timescale estimation from photon-pair coincidence histograms", "qjump"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> oversample;
  std::optional<unsigned> threads;
  const auto common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "run configuration file");
    if (config_required) opt->required();
    sub->add_option("--seed", seed, "override [run] seed");
    sub->add_option("--oversample", oversample,
                    "model sub-samples per bin (0 = exact bin average)");
    sub->add_option("--threads", threads, "worker threads (0 = hardware concurrency)");
  };

  std::string out_path;
  std::string raw_path;
  std::string data_path;
  std::string response_path;
  std::string report_path;
  std::string residual_path;
  std::string response_override;

  auto* simulate = app.add_subcommand("simulate", "pair correlation and monitor curves");
  common(simulate, true);
  simulate->add_option("output", out_path, "output CSV")->required();

  auto* calibrate = app.add_subcommand("calibrate", "normalize a detector response histogram");
  common(calibrate, false);
  calibrate->add_option("input", raw_path, "raw response histogram CSV")->required();
  calibrate->add_option("output", out_path, "normalized response CSV")->required();

  auto* generate = app.add_subcommand("generate", "synthetic coincidence histogram");
  common(generate, true);
  generate->add_option("output", out_path, "histogram CSV")->required();
  generate->add_option("--response", response_override, "response CSV instead of [response]");

  auto* fit_cmd = app.add_subcommand("fit", "fit the convolved monitor model to a histogram");
  common(fit_cmd, true);
  fit_cmd->add_option("data", data_path, "histogram CSV")->required();
  fit_cmd->add_option("response", response_path, "detector response CSV")->required();
  fit_cmd->add_option("report", report_path, "JSON report")->required();
  fit_cmd->add_option("residuals", residual_path, "residual CSV");

  std::vector<const char*> argv;
  argv.push_back("qjump");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) c.seed = *seed;
    if (oversample) c.fit.oversample = *oversample;
    if (threads) c.threads = *threads;

    if (simulate->parsed()) {
      cmd_simulate(c, out_path);
    } else if (calibrate->parsed()) {
      const CalibrationSummary s = cmd_calibrate(c, raw_path, out_path);
      out << "bins " << s.bins << '\n'
          << "raw_centroid_ps " << fmt(s.raw_centroid / kPicosecond) << '\n'
          << "fwhm_ps " << fmt(s.fwhm / kPicosecond) << '\n'
          << "stddev_ps " << fmt(s.stddev / kPicosecond) << '\n'
          << "support_ps " << fmt(s.support / kPicosecond) << '\n';
    } else if (generate->parsed()) {
      std::optional<std::filesystem::path> r;
      if (!response_override.empty()) r = response_override;
      cmd_generate(c, out_path, r);
    } else if (fit_cmd->parsed()) {
      std::optional<std::filesystem::path> r;
      if (!residual_path.empty()) r = residual_path;
      const FitOutcome o = cmd_fit(c, data_path, response_path, report_path, r);
      const FitResult& f = o.result;
      out << "alpha_ps " << fmt(f.estimates[Param::kAlpha] / kPicosecond) << " +- "
          << fmt(f.errors[Param::kAlpha] / kPicosecond) << '\n'
          << "rise_time_ps " << fmt(f.rise_time / kPicosecond) << " +- "
          << fmt(f.rise_time_error / kPicosecond) << '\n'
          << "chi2/dof " << fmt(f.chi2 / f.dof) << '\n';
    }
    return kExitOk;
  } catch (const InputError& e) {
    err << "qjump: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "qjump: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "qjump: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "qjump: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace qjump::cli
