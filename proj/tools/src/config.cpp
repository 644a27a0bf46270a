#include "qjump_cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "qjump/error.hpp"
#include "qjump/histogram_io.hpp"
#include "qjump_cli/units.hpp"

namespace qjump::cli {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"run", {"seed", "threads"}},
      {"cascade",
       {"omega01", "omega12", "delta1", "delta2", "adiabaticity", "delta_eff", "omega_eff",
        "gamma23", "gamma30", "e2", "e3"}},
      {"monitor", {"alpha", "tau"}},
      {"grid", {"start", "stop", "step"}},
      {"synth",
       {"n_pairs", "dt0", "background", "t_min", "t_max", "bin_width", "beat_amplitude",
        "beat_frequency", "beat_phase"}},
      {"response", {"model", "fwhm", "file", "floor", "floor_window"}},
      {"fit",
       {"free", "weights", "window_lo", "window_hi", "A", "Y0", "dt0", "alpha", "tau",
        "oversample", "max_iterations", "bootstrap"}},
  };
  return keys;
}

// Read-only view of one section with typed accessors.
class Section {
 public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  [[nodiscard]] bool present() const { return tree_ != nullptr; }
  [[nodiscard]] bool has(const std::string& key) const {
    return tree_ != nullptr && tree_->find(key) != tree_->not_found();
  }

  [[nodiscard]] std::optional<std::string> text(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return tree_->get<std::string>(key);
  }

  [[nodiscard]] std::optional<double> quantity(const std::string& key, Dimension d) const {
    const auto t = text(key);
    if (!t) return std::nullopt;
    try {
      return parse_quantity(*t, d);
    } catch (const ConfigError& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  [[nodiscard]] double require(const std::string& key, Dimension d) const {
    const auto v = quantity(key, d);
    if (!v) throw ConfigError("missing " + where(key));
    return *v;
  }

  [[nodiscard]] std::optional<double> number(const std::string& key) const {
    const auto t = text(key);
    if (!t) return std::nullopt;
    try {
      return parse_number(*t);
    } catch (const ConfigError& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  [[nodiscard]] std::optional<std::uint64_t> count(const std::string& key) const {
    const auto v = number(key);
    if (!v) return std::nullopt;
    if (*v < 0.0 || std::floor(*v) != *v || *v > 1.8e19) {
      throw ConfigError(where(key) + " must be a non-negative integer");
    }
    return static_cast<std::uint64_t>(*v);
  }

  [[nodiscard]] std::optional<bool> flag(const std::string& key) const {
    const auto t = text(key);
    if (!t) return std::nullopt;
    if (*t == "on" || *t == "true" || *t == "yes" || *t == "1") return true;
    if (*t == "off" || *t == "false" || *t == "no" || *t == "0") return false;
    throw ConfigError(where(key) + " must be on/off");
  }

  [[nodiscard]] std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

 private:
  std::string name_;
  const pt::ptree* tree_;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    if (first != std::string::npos) out.push_back(item.substr(first, last - first + 1));
  }
  return out;
}

Param param_from_name(const std::string& name) {
  for (const Param p : kAllParams) {
    if (param_name(p) == name) return p;
  }
  throw ConfigError("[fit] free: unknown parameter '" + name + "' (A, Y0, dt0, alpha, tau)");
}

CascadeParams read_cascade(const Section& s) {
  const bool bare = s.has("omega01") || s.has("omega12") || s.has("delta1") || s.has("delta2");
  const bool effective = s.has("delta_eff") || s.has("omega_eff");
  if (bare == effective) {
    throw ConfigError(
        "[cascade] needs exactly one of the bare pump parameters (omega01, omega12, delta1, "
        "delta2) or the effective ones (delta_eff, omega_eff)");
  }
  const DecayRates gammas{s.require("gamma23", Dimension::kRate),
                          s.require("gamma30", Dimension::kRate)};
  const LevelEnergies energies{s.quantity("e2", Dimension::kEnergy).value_or(0.0),
                               s.quantity("e3", Dimension::kEnergy).value_or(0.0)};
  if (bare) {
    if (s.has("adiabaticity") && !s.has("delta1")) {
      throw ConfigError("[cascade] adiabaticity given without bare pump parameters");
    }
    const BarePumpParams b{s.require("omega01", Dimension::kAngularFrequency),
                           s.require("omega12", Dimension::kAngularFrequency),
                           s.require("delta1", Dimension::kAngularFrequency),
                           s.require("delta2", Dimension::kAngularFrequency)};
    const double factor = s.number("adiabaticity").value_or(kDefaultAdiabaticityFactor);
    return effective_params(b, gammas, energies, factor);
  }
  if (s.has("adiabaticity")) throw ConfigError("[cascade] adiabaticity applies to bare parameters only");
  CascadeParams p;
  p.delta_eff = s.require("delta_eff", Dimension::kAngularFrequency);
  p.omega_eff = s.require("omega_eff", Dimension::kAngularFrequency);
  p.gamma23 = gammas.gamma23;
  p.gamma30 = gammas.gamma30;
  p.e2 = energies.e2;
  p.e3 = energies.e3;
  p.validate();
  return p;
}

SynthConfig read_synth(const Section& s) {
  SynthConfig c;
  if (const auto v = s.count("n_pairs")) c.n_pairs = *v;
  if (const auto v = s.quantity("dt0", Dimension::kTime)) c.dt0 = *v;
  if (const auto v = s.number("background")) c.background_rate = *v;
  if (const auto v = s.quantity("t_min", Dimension::kTime)) c.t_min = *v;
  if (const auto v = s.quantity("t_max", Dimension::kTime)) c.t_max = *v;
  if (const auto v = s.quantity("bin_width", Dimension::kTime)) c.bin_width = *v;
  if (s.has("beat_amplitude") || s.has("beat_frequency") || s.has("beat_phase")) {
    BeatParams beat;
    beat.amplitude = s.number("beat_amplitude").value_or(0.0);
    beat.frequency = s.require("beat_frequency", Dimension::kFrequency);
    beat.phase = s.quantity("beat_phase", Dimension::kAngle).value_or(0.0);
    c.beat = beat;
  }
  return c;
}

ResponseConfig read_response(const Section& s, const std::filesystem::path& base) {
  ResponseConfig r;
  if (const auto m = s.text("model")) {
    if (*m == "gaussian") {
      r.model = ResponseConfig::Model::kGaussian;
    } else if (*m == "delta") {
      r.model = ResponseConfig::Model::kDelta;
    } else if (*m == "file") {
      r.model = ResponseConfig::Model::kFile;
    } else {
      throw ConfigError("[response] model must be gaussian, delta or file");
    }
  }
  if (const auto v = s.quantity("fwhm", Dimension::kTime)) r.fwhm = *v;
  if (const auto f = s.text("file")) {
    r.file = std::filesystem::path(*f);
    if (r.file.is_relative()) r.file = base / r.file;
  }
  if (const auto f = s.flag("floor")) r.floor = *f;
  if (const auto v = s.quantity("floor_window", Dimension::kTime)) r.floor_half_window = *v;
  if (r.model == ResponseConfig::Model::kFile && r.file.empty()) {
    throw ConfigError("[response] model = file needs a file");
  }
  if (r.model == ResponseConfig::Model::kGaussian && !(r.fwhm > 0.0)) {
    throw ConfigError("[response] fwhm must be > 0");
  }
  return r;
}

FitConfig read_fit(const Section& s) {
  FitConfig f;
  if (const auto list = s.text("free")) {
    f.free.fill(false);
    for (const std::string& name : split_list(*list)) f.free[static_cast<std::size_t>(param_from_name(name))] = true;
  }
  if (const auto w = s.text("weights")) {
    if (*w == "poisson") {
      f.weights = WeightMode::kPoisson;
    } else if (*w == "uniform") {
      f.weights = WeightMode::kUniform;
    } else {
      throw ConfigError("[fit] weights must be poisson or uniform");
    }
  }
  f.window_lo = s.quantity("window_lo", Dimension::kTime);
  f.window_hi = s.quantity("window_hi", Dimension::kTime);
  f.initial[static_cast<std::size_t>(Param::kAmplitude)] = s.number("A");
  f.initial[static_cast<std::size_t>(Param::kBackground)] = s.number("Y0");
  f.initial[static_cast<std::size_t>(Param::kDelay)] = s.quantity("dt0", Dimension::kTime);
  f.initial[static_cast<std::size_t>(Param::kAlpha)] = s.quantity("alpha", Dimension::kTime);
  f.initial[static_cast<std::size_t>(Param::kTau)] = s.quantity("tau", Dimension::kTime);
  if (const auto v = s.count("oversample")) f.oversample = static_cast<unsigned>(*v);
  if (const auto v = s.count("max_iterations")) f.max_iterations = static_cast<int>(*v);
  if (const auto v = s.count("bootstrap")) f.bootstrap = static_cast<int>(*v);
  if (f.max_iterations <= 0) throw ConfigError("[fit] max_iterations must be > 0");
  if (f.bootstrap != 0 && f.bootstrap < 100) throw ConfigError("[fit] bootstrap needs 0 or >= 100 resamples");
  return f;
}

}  // namespace

RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) {
      if (!body.data().empty()) throw ConfigError("key '" + section + "' outside of any section");
      throw ConfigError("unknown config section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      if (!it->second.contains(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    }
  }
  const auto section = [&](const std::string& name) {
    const auto child = tree.get_child_optional(name);
    return Section(name, child ? &*child : nullptr);
  };

  RunConfig c;
  c.base_dir = base_dir;
  const Section run = section("run");
  if (const auto v = run.count("seed")) c.seed = *v;
  if (const auto v = run.count("threads")) c.threads = static_cast<unsigned>(*v);

  if (const Section s = section("cascade"); s.present()) c.cascade = read_cascade(s);
  if (const Section s = section("monitor"); s.present()) {
    MonitorParams m;
    m.alpha = s.require("alpha", Dimension::kTime);
    if (const auto tau = s.quantity("tau", Dimension::kTime)) {
      m.tau = *tau;
    } else if (c.cascade) {
      const PopulationDecayRates rates = population_decay_rates(*c.cascade);
      m.tau = 1.0 / rates.level3;
    } else {
      throw ConfigError("[monitor] tau missing and no [cascade] to derive it from");
    }
    m.validate();
    c.monitor = m;
  }
  if (const Section s = section("grid"); s.present()) {
    const double start = s.require("start", Dimension::kTime);
    const double stop = s.require("stop", Dimension::kTime);
    const double step = s.require("step", Dimension::kTime);
    if (!(step > 0.0) || !(stop >= start)) throw ConfigError("[grid] needs step > 0 and stop >= start");
    const double n = std::floor((stop - start) / step + 1e-9);
    c.grid = UniformGrid{start, step, static_cast<std::size_t>(n) + 1};
  }
  if (const Section s = section("synth"); s.present()) c.synth = read_synth(s);
  c.response = read_response(section("response"), base_dir);
  c.fit = read_fit(section("fit"));
  return c;
}

RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir) {
  std::istringstream in(text);
  return parse_config(in, base_dir);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.parent_path());
}

std::string format_cascade_section(const CascadeParams& p) {
  std::string s = "[cascade]\n";
  s += "delta_eff = " + format_quantity(p.delta_eff, Dimension::kAngularFrequency) + "\n";
  s += "omega_eff = " + format_quantity(p.omega_eff, Dimension::kAngularFrequency) + "\n";
  s += "gamma23 = " + format_quantity(p.gamma23, Dimension::kRate) + "\n";
  s += "gamma30 = " + format_quantity(p.gamma30, Dimension::kRate) + "\n";
  s += "e2 = " + format_quantity(p.e2, Dimension::kEnergy) + "\n";
  s += "e3 = " + format_quantity(p.e3, Dimension::kEnergy) + "\n";
  return s;
}

MonitorParams resolve_monitor(const RunConfig& c) {
  if (c.monitor) return *c.monitor;
  throw ConfigError("a [monitor] section is required");
}

DetectorResponse resolve_response(const RunConfig& c, double bin_width) {
  const ResponseConfig& r = c.response;
  switch (r.model) {
    case ResponseConfig::Model::kDelta:
      return delta_response(bin_width);
    case ResponseConfig::Model::kGaussian:
      return gaussian_response(r.fwhm, bin_width);
    case ResponseConfig::Model::kFile: {
      std::optional<BackgroundFloor> floor;
      if (r.floor) floor = BackgroundFloor{r.floor_half_window};
      DetectorResponse g = read_response_csv(r.file, floor);
      if (std::abs(g.bin_width - bin_width) > 1e-9 * bin_width) {
        throw GridMismatch("response file bin width differs from the histogram bin width");
      }
      return g;
    }
  }
  throw ConfigError("unknown response model");
}

}  // namespace qjump::cli
