#include "qjump_cli/report.hpp"

#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>

#include <json.hpp>
#include <openssl/evp.h>

#include "qjump/error.hpp"
#include "qjump/histogram_io.hpp"
#include "qjump_cli/commands.hpp"

namespace qjump::cli {
namespace {

using Json = nlohmann::ordered_json;

// Report unit per parameter: times in ps, amplitudes in counts per bin.
double report_scale(Param p) {
  switch (p) {
    case Param::kDelay:
    case Param::kAlpha:
    case Param::kTau: return 1.0 / kPicosecond;
    default: return 1.0;
  }
}

const char* report_unit(Param p) { return report_scale(p) == 1.0 ? "counts/bin" : "ps"; }

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 initialization failed");
  }
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    char b[3];
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

std::string fit_report_json(const FitResult& r, const FitSpec& spec,
                            const std::optional<BootstrapResult>& bootstrap, const Histogram& hist,
                            const ReportInputs& inputs) {
  Json j;
  j["converged"] = r.converged;
  j["iterations"] = r.n_iter;
  j["chi2"] = r.chi2;
  j["dof"] = r.dof;
  j["chi2_per_dof"] = r.dof > 0 ? r.chi2 / r.dof : 0.0;

  Json params = Json::object();
  for (const Param p : kAllParams) {
    const std::size_t i = static_cast<std::size_t>(p);
    Json e;
    e["value"] = r.estimates[p] * report_scale(p);
    e["error"] = r.errors[p] * report_scale(p);
    e["unit"] = report_unit(p);
    e["free"] = r.free[i];
    e["at_bound"] = r.at_bound[i];
    params[std::string(param_name(p))] = e;
  }
  j["parameters"] = params;

  Json order = Json::array();
  for (const Param p : r.free_params) order.push_back(std::string(param_name(p)));
  Json matrix = Json::array();
  for (Eigen::Index a = 0; a < r.covariance.rows(); ++a) {
    Json row = Json::array();
    for (Eigen::Index b = 0; b < r.covariance.cols(); ++b) {
      row.push_back(r.covariance(a, b) * report_scale(r.free_params[static_cast<std::size_t>(a)]) *
                    report_scale(r.free_params[static_cast<std::size_t>(b)]));
    }
    matrix.push_back(row);
  }
  j["covariance"] = {{"order", order}, {"matrix", matrix}};
  j["rise_time_ps"] = {{"value", r.rise_time / kPicosecond},
                       {"error", r.rise_time_error / kPicosecond}};

  if (bootstrap) {
    Json b;
    b["resamples"] = bootstrap->resamples;
    b["failed"] = bootstrap->failed;
    Json spread = Json::object();
    for (const Param p : r.free_params) {
      spread[std::string(param_name(p))] = bootstrap->spread[p] * report_scale(p);
    }
    b["spread"] = spread;
    b["rise_time_spread_ps"] = rise_time_10_90(bootstrap->spread[Param::kAlpha]) / kPicosecond;
    j["bootstrap"] = b;
  }

  j["window"] = {{"first_bin_ps", hist.center(r.window_first) / kPicosecond},
                 {"last_bin_ps", hist.center(r.window_first + r.window_size - 1) / kPicosecond},
                 {"bins", r.window_size}};
  j["settings"] = {{"weights", spec.weight_mode == WeightMode::kPoisson ? "poisson" : "uniform"},
                   {"oversample", spec.oversample},
                   {"max_iterations", spec.max_iterations},
                   {"seed", inputs.seed}};
  j["objective_history"] = r.objective_history;
  j["inputs"] = {{"data", {{"path", inputs.data.path}, {"sha256", inputs.data.sha256}}},
                 {"response", {{"path", inputs.response.path}, {"sha256", inputs.response.sha256}}}};
  return j.dump(2);
}

void write_residual_csv(std::ostream& out, const Histogram& hist, std::span<const double> fitted) {
  out << "bin_center_ps,observed,fitted,residual\n";
  char buf[128];
  for (std::size_t i = 0; i < hist.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g\n", hist.center(i) / kPicosecond,
                  hist.counts[i], fitted[i], hist.counts[i] - fitted[i]);
    out << buf;
  }
}

}  // namespace qjump::cli
