#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddwave/estimator.hpp"
#include "ddwave/optimizer.hpp"
#include "ddwave/version.hpp"

namespace ddwave {

using ordered_json = nlohmann::ordered_json;

struct RunOptions {
  std::string out_dir;  ///< overrides config "output_dir" when non-empty
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool quiet = false;
};

namespace expcfg {

/// Reads and parses a config file, reporting parse failures as
/// "<file>:<line>:<col>: <reason>".
inline ordered_json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = e.byte > 0 ? e.byte - 1 : 0;
    for (std::size_t i = 0; i < stop && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": " + e.what());
  }
}

/// Path-aware view of one JSON object. Accessors mark keys as consumed;
/// finish() rejects anything left over, so unknown keys fail loudly with
/// their full dotted path.
class Section {
 public:
  Section(const ordered_json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError("field \"" + path_ + "\" must be an object");
  }

  bool has(const std::string& key) const { return j_->contains(key); }

  const ordered_json& raw(const std::string& key) {
    auto it = j_->find(key);
    if (it == j_->end()) {
      throw ConfigError("missing required field \"" + dotted(key) + "\"");
    }
    seen_.insert(key);
    return *it;
  }

  double num(const std::string& key) {
    const ordered_json& v = raw(key);
    if (!v.is_number()) throw ConfigError("field \"" + dotted(key) + "\" must be a number");
    return v.get<double>();
  }

  double num_or(const std::string& key, double fallback) {
    return has(key) ? num(key) : fallback;
  }

  std::optional<double> num_opt(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return num(key);
  }

  long long integer(const std::string& key) {
    const ordered_json& v = raw(key);
    if (!v.is_number_integer()) {
      throw ConfigError("field \"" + dotted(key) + "\" must be an integer");
    }
    return v.get<long long>();
  }

  long long integer_or(const std::string& key, long long fallback) {
    return has(key) ? integer(key) : fallback;
  }

  std::uint64_t unsigned_or(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const ordered_json& v = raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError("field \"" + dotted(key) + "\" must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  std::string str(const std::string& key) {
    const ordered_json& v = raw(key);
    if (!v.is_string()) throw ConfigError("field \"" + dotted(key) + "\" must be a string");
    return v.get<std::string>();
  }

  std::string str_or(const std::string& key, const std::string& fallback) {
    return has(key) ? str(key) : fallback;
  }

  std::vector<double> num_array(const std::string& key) {
    const ordered_json& v = raw(key);
    if (!v.is_array() || v.empty()) {
      throw ConfigError("field \"" + dotted(key) + "\" must be a non-empty array of numbers");
    }
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
      if (!e.is_number()) {
        throw ConfigError("field \"" + dotted(key) + "\" must contain only numbers");
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  Section child(const std::string& key) { return Section(raw(key), dotted(key)); }

  std::optional<Section> child_opt(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return child(key);
  }

  void finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError("unknown field \"" + dotted(it.key()) + "\"");
      }
    }
  }

  std::string dotted(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const ordered_json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline SystemConfig parse_system(Section& root, bool need_fs, bool need_b) {
  Section sys = root.child("system");
  const double t0 = sys.num("T0_s");
  std::optional<double> fs = sys.num_opt("fs_hz");
  std::optional<double> b = sys.num_opt("B_hz");
  if (need_fs && !fs) throw ConfigError("missing required field \"system.fs_hz\"");
  if (need_b && !b) throw ConfigError("missing required field \"system.B_hz\"");
  if (!need_fs && fs) throw ConfigError("field \"system.fs_hz\" is derived by this sweep; remove it");
  if (!need_b && b) throw ConfigError("field \"system.B_hz\" is derived by this sweep; remove it");
  const double p = sys.num_or("P_w", 1.0);
  const cplx gamma(sys.num_or("gamma_re", 1.0), sys.num_or("gamma_im", 0.0));
  // Placeholder rate/bandwidth get substituted by the sweep before use.
  const double fs_v = fs ? *fs : *b;
  const double b_v = b ? *b : *fs;
  const double n0 = sys.num_or("N0_w_per_hz", p / b_v);
  sys.finish();
  return make_config(t0, fs_v, b_v, n0, p, gamma);
}

inline ParamPrior parse_prior(Section& root) {
  Section pr = root.child("prior");
  const ParamPrior prior = make_prior(pr.num("sigma_tau_s"), pr.num("sigma_nu_hz"));
  pr.finish();
  return prior;
}

inline EstimatorConfig parse_estimator(Section& root) {
  EstimatorConfig ec;
  if (auto est = root.child_opt("estimator")) {
    ec.span_sigmas_tau = est->num_or("span_sigmas_tau", ec.span_sigmas_tau);
    ec.span_sigmas_nu = est->num_or("span_sigmas_nu", ec.span_sigmas_nu);
    ec.points_tau = static_cast<int>(est->integer_or("points_tau", ec.points_tau));
    ec.points_nu = static_cast<int>(est->integer_or("points_nu", ec.points_nu));
    ec.refine_rounds = static_cast<int>(est->integer_or("refine_rounds", ec.refine_rounds));
    ec.refine_contraction =
        static_cast<int>(est->integer_or("refine_contraction", ec.refine_contraction));
    est->finish();
  }
  check_estimator_config(ec);
  return ec;
}

inline int parse_quadrature(Section& root) {
  const int order = static_cast<int>(root.integer_or("quadrature_order", 10));
  if (order < 1) throw ConfigError("field \"quadrature_order\" must be >= 1");
  return order;
}

inline std::vector<double> parse_snr(Section& root) {
  auto snr = root.num_array("snr_db");
  return snr;
}

}  // namespace expcfg

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag));
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& header) {
    out_.open(path);
    if (!out_) throw ConfigError("cannot write output file " + path.string());
    out_ << header << "\n";
    out_ << std::setprecision(17);
  }

  template <typename... Ts>
  void row(const Ts&... vals) {
    bool first = true;
    ((out_ << (first ? "" : ","), first = false, out_ << vals), ...);
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

inline void write_spectrum_csv(const std::filesystem::path& path, const SystemConfig& c,
                               const Spectrum& x) {
  CsvWriter w(path, "harmonic_k,re,im");
  for (int j = 0; j < c.K; ++j) {
    w.row(c.harmonic(j), x.coefficients[j].real(), x.coefficients[j].imag());
  }
}

inline Spectrum read_spectrum_csv(const std::string& path, const SystemConfig& c) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open spectrum file");
  std::string line;
  if (!std::getline(in, line) || line != "harmonic_k,re,im") {
    throw ConfigError(path + ": expected header \"harmonic_k,re,im\"");
  }
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(c.K);
  int count = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string k_s, re_s, im_s;
    if (!std::getline(ss, k_s, ',') || !std::getline(ss, re_s, ',') ||
        !std::getline(ss, im_s)) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed row");
    }
    int k = 0;
    double re = 0, im = 0;
    try {
      k = std::stoi(k_s);
      re = std::stod(re_s);
      im = std::stod(im_s);
    } catch (const std::invalid_argument&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed number");
    } catch (const std::out_of_range&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": number out of range");
    }
    if (k < -c.K / 2 || k >= c.K / 2) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": harmonic " +
                        std::to_string(k) + " outside [-K/2, K/2)");
    }
    x[k + c.K / 2] = cplx(re, im);
    ++count;
  }
  if (count != c.K) {
    throw ConfigError(path + ": expected " + std::to_string(c.K) + " coefficients, got " +
                      std::to_string(count));
  }
  return Spectrum{std::move(x)};
}

inline std::filesystem::path prepare_out_dir(const ordered_json& cfg, const RunOptions& opts) {
  std::string dir = opts.out_dir;
  if (dir.empty() && cfg.contains("output_dir") && cfg["output_dir"].is_string()) {
    dir = cfg["output_dir"].get<std::string>();
  }
  if (dir.empty()) dir = "out";
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create output directory " + p.string());
  return p;
}

inline void write_summary(const std::filesystem::path& path, const ordered_json& resolved,
                          ordered_json extra) {
  ordered_json summary;
  summary["library_version"] = kVersion;
  summary["resolved_config"] = resolved;
  for (auto& [k, v] : extra.items()) summary[k] = v;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write output file " + path.string());
  out << summary.dump(2) << "\n";
}

inline void progress(const RunOptions& opts, const std::string& msg) {
  if (!opts.quiet) std::cerr << msg << "\n";
}

}  // namespace detail

/// Sweep family of a pareto/simulate experiment: bandwidths B = rho * fs at
/// fixed rate, or rates fs = B / kappa at fixed bandwidth.
struct SweepSpec {
  bool is_rho = true;
  std::vector<double> values;
  int alpha_grid = 33;
};

namespace expcfg {

inline SweepSpec parse_sweep(Section& root, bool scalar) {
  Section sw = root.child("sweep");
  SweepSpec spec;
  const bool has_rho = sw.has("rho");
  const bool has_kappa = sw.has("kappa");
  if (has_rho == has_kappa) {
    throw ConfigError("field \"sweep\" must contain exactly one of \"rho\" or \"kappa\"");
  }
  spec.is_rho = has_rho;
  const std::string key = has_rho ? "rho" : "kappa";
  if (scalar) {
    spec.values = {sw.num(key)};
  } else if (sw.raw(key).is_array()) {
    spec.values = sw.num_array(key);
  } else {
    spec.values = {sw.num(key)};
  }
  for (double v : spec.values) {
    if (!(v > 0)) throw ConfigError("field \"sweep." + key + "\" values must be positive");
  }
  spec.alpha_grid = static_cast<int>(sw.integer_or("alpha_grid", 33));
  if (spec.alpha_grid < 2) throw ConfigError("field \"sweep.alpha_grid\" must be >= 2");
  sw.finish();
  return spec;
}

/// Optimized/reference config pair for one sweep value. The reference is the
/// conventional full-rate system: B_ref = fs_ref = fs for a rho sweep, = B
/// for a kappa sweep.
struct SystemPair {
  SystemConfig optimized;
  double reference_rate = 0;
};

inline SystemPair sweep_configs(const SystemConfig& base, const SweepSpec& spec, double value) {
  SystemPair pair;
  try {
    if (spec.is_rho) {
      pair.optimized =
          make_config(base.T0, base.fs, value * base.fs, base.N0, base.P, base.gamma);
      pair.reference_rate = base.fs;
    } else {
      pair.optimized =
          make_config(base.T0, base.B / value, base.B, base.N0, base.P, base.gamma);
      pair.reference_rate = base.B;
    }
  } catch (const ConfigError& e) {
    throw ConfigError("sweep value " + std::to_string(value) + ": " + e.what());
  }
  return pair;
}

}  // namespace expcfg

// ---------------------------------------------------------------------------
// Runners. Each validates its config section-by-section, computes, and writes
// CSV results plus a JSON summary sidecar into the output directory.
// ---------------------------------------------------------------------------

inline void run_bcrlb(const ordered_json& cfg, const RunOptions& opts) {
  expcfg::Section root(cfg, "");
  SystemConfig sys = expcfg::parse_system(root, true, true);
  const ParamPrior prior = expcfg::parse_prior(root);
  const int order = expcfg::parse_quadrature(root);
  const std::vector<double> snr_db = expcfg::parse_snr(root);
  root.unsigned_or("seed", 1);  // accepted for config uniformity; unused here

  std::string source = "rect";
  std::string spec_path;
  std::optional<double> opt_alpha;
  if (auto sp = root.child_opt("spectrum")) {
    source = sp->str_or("source", "rect");
    if (source == "file") spec_path = sp->str("path");
    if (source == "optimize") opt_alpha = sp->num("alpha");
    sp->finish();
  }
  if (root.has("output_dir")) root.str("output_dir");
  root.finish();

  const auto out_dir = detail::prepare_out_dir(cfg, opts);
  SystemConfig unit = sys;
  unit.N0 = sys.P / sys.B;
  const NoiseCovariance cov = noise_covariance(unit);
  const SensitivitySet sens = sensitivity_set(unit, cov, prior, order, opts.threads);

  Spectrum x = zero_spectrum(unit);
  if (source == "rect") {
    if (std::abs(unit.B - unit.fs) <= 1e-9 * unit.fs) {
      x = reference_rect(unit);
    } else {
      // Conventional full-rate waveform (B = fs band) embedded in the wider
      // modeled band: outer harmonics carry no power.
      const SystemConfig inner =
          make_config(unit.T0, unit.fs, unit.fs, unit.N0, unit.P, unit.gamma);
      const Spectrum ref = reference_rect(inner);
      for (int j = 0; j < inner.K; ++j) {
        x.coefficients[inner.harmonic(j) + unit.K / 2] = ref.coefficients[j];
      }
    }
  } else if (source == "zero") {
    // keep zeros
  } else if (source == "file") {
    x = detail::read_spectrum_csv(spec_path, unit);
  } else if (source == "optimize") {
    const double a = *opt_alpha;
    if (a < 0 || a > 1) throw ConfigError("field \"spectrum.alpha\" must lie in [0, 1]");
    const double s_tau = 1.0 / (sens.g11 + sens.g11.adjoint()).trace().real();
    const double s_nu = 1.0 / (sens.g22 + sens.g22.adjoint()).trace().real();
    Weighting w;
    w.m = Eigen::Matrix2d::Zero();
    w.m(0, 0) = a * s_tau;
    w.m(1, 1) = (1.0 - a) * s_nu;
    x = optimize_spectrum(sens, w, unit.P);
  } else {
    throw ConfigError("field \"spectrum.source\" must be one of rect, zero, file, optimize");
  }

  const InfoMatrix jd_unit = efim(sens, x);
  const InfoMatrix pim = prior_information(prior);
  detail::CsvWriter csv(out_dir / "bcrlb.csv",
                        "snr_db,bcrlb_tau_s2,bcrlb_nu_hz2,bcrlb_tau_norm,bcrlb_nu_norm");
  for (double db : snr_db) {
    const double snr = std::pow(10.0, db / 10.0);
    const Eigen::Matrix2d bound = bcrlb(bim(InfoMatrix(snr * jd_unit), pim));
    csv.row(db, bound(0, 0), bound(1, 1), bound(0, 0) / (prior.sigma_tau * prior.sigma_tau),
            bound(1, 1) / (prior.sigma_nu * prior.sigma_nu));
  }
  detail::write_spectrum_csv(out_dir / "bcrlb_spectrum.csv", unit, x);
  detail::write_summary(out_dir / "bcrlb_summary.json", cfg,
                        ordered_json{{"command", "bcrlb"},
                                     {"spectrum_source", source},
                                     {"N", unit.N},
                                     {"K", unit.K}});
  detail::progress(opts, "[bcrlb] wrote " + (out_dir / "bcrlb.csv").string());
}

inline void run_pareto(const ordered_json& cfg, const RunOptions& opts) {
  expcfg::Section root(cfg, "");
  const SweepSpec sweep = [&] {
    expcfg::Section probe(cfg, "");
    return expcfg::parse_sweep(probe, false);
  }();
  SystemConfig base = expcfg::parse_system(root, sweep.is_rho, !sweep.is_rho);
  const ParamPrior prior = expcfg::parse_prior(root);
  const int order = expcfg::parse_quadrature(root);
  root.child("sweep");  // consumed above via the probe section
  if (root.has("output_dir")) root.str("output_dir");
  root.finish();

  const auto out_dir = detail::prepare_out_dir(cfg, opts);
  detail::CsvWriter csv(out_dir / "pareto.csv",
                        "rho_or_kappa,alpha,chi_tau_db,chi_nu_db,objective");
  detail::CsvWriter spectra(out_dir / "pareto_spectra.csv",
                            "rho_or_kappa,alpha,harmonic_k,re,im");

  std::map<double, ReferenceSystem> ref_cache;
  ordered_json sweep_summaries = ordered_json::array();
  for (double value : sweep.values) {
    const auto pair = expcfg::sweep_configs(base, sweep, value);
    detail::progress(opts, "[pareto] " + std::string(sweep.is_rho ? "rho" : "kappa") + "=" +
                               std::to_string(value) + " (N=" + std::to_string(pair.optimized.N) +
                               ", K=" + std::to_string(pair.optimized.K) + ")");
    auto it = ref_cache.find(pair.reference_rate);
    if (it == ref_cache.end()) {
      it = ref_cache
               .emplace(pair.reference_rate,
                        make_reference_system(pair.optimized, pair.reference_rate, prior,
                                              order, opts.threads))
               .first;
    }
    const NoiseCovariance cov = noise_covariance(pair.optimized);
    const SensitivitySet sens =
        sensitivity_set(pair.optimized, cov, prior, order, opts.threads);
    const auto points = pareto_sweep(sens, it->second, sweep.alpha_grid, opts.threads);
    for (const auto& p : points) {
      csv.row(value, p.alpha, p.chi_tau_db, p.chi_nu_db, p.objective);
      for (int j = 0; j < pair.optimized.K; ++j) {
        spectra.row(value, p.alpha, pair.optimized.harmonic(j),
                    p.spectrum.coefficients[j].real(), p.spectrum.coefficients[j].imag());
      }
    }
    sweep_summaries.push_back(ordered_json{{"value", value},
                                           {"points", points.size()},
                                           {"N", pair.optimized.N},
                                           {"K", pair.optimized.K}});
  }
  detail::write_summary(out_dir / "pareto_summary.json", cfg,
                        ordered_json{{"command", "pareto"}, {"sweeps", sweep_summaries}});
  detail::progress(opts, "[pareto] wrote " + (out_dir / "pareto.csv").string());
}

inline void run_simulate(const ordered_json& cfg, const RunOptions& opts) {
  expcfg::Section root(cfg, "");
  const SweepSpec sweep = [&] {
    expcfg::Section probe(cfg, "");
    return expcfg::parse_sweep(probe, true);
  }();
  SystemConfig base = expcfg::parse_system(root, sweep.is_rho, !sweep.is_rho);
  const ParamPrior prior = expcfg::parse_prior(root);
  const int order = expcfg::parse_quadrature(root);
  const std::vector<double> snr_db = expcfg::parse_snr(root);
  const int trials = static_cast<int>(root.integer("trials"));
  if (trials < 1) throw ConfigError("field \"trials\" must be >= 1");
  const std::uint64_t seed = opts.seed ? *opts.seed : root.unsigned_or("seed", 1);
  const EstimatorConfig ec = expcfg::parse_estimator(root);
  root.child("sweep");
  std::string source = "optimize";
  std::string spec_path;
  if (auto sp = root.child_opt("spectrum")) {
    source = sp->str_or("source", "optimize");
    if (source == "file") spec_path = sp->str("path");
    sp->finish();
  }
  if (root.has("output_dir")) root.str("output_dir");
  root.finish();

  const auto pair = expcfg::sweep_configs(base, sweep, sweep.values[0]);
  const SystemConfig opt_sys = pair.optimized;
  const auto out_dir = detail::prepare_out_dir(cfg, opts);

  detail::progress(opts, "[simulate] building sensitivities and reference");
  const ReferenceSystem ref =
      make_reference_system(opt_sys, pair.reference_rate, prior, order, opts.threads);

  Spectrum design = zero_spectrum(opt_sys);
  ordered_json design_info;
  if (source == "optimize") {
    const NoiseCovariance cov = noise_covariance(opt_sys);
    const SensitivitySet sens = sensitivity_set(opt_sys, cov, prior, order, opts.threads);
    const auto points = pareto_sweep(sens, ref, sweep.alpha_grid, opts.threads);
    const std::size_t pick = select_max_distance(points);
    design = points[pick].spectrum;
    design_info = ordered_json{{"selection", "max_distance_to_origin"},
                               {"alpha", points[pick].alpha},
                               {"chi_tau_db", points[pick].chi_tau_db},
                               {"chi_nu_db", points[pick].chi_nu_db},
                               {"objective", points[pick].objective}};
  } else if (source == "file") {
    design = detail::read_spectrum_csv(spec_path, opt_sys);
    design_info = ordered_json{{"selection", "file"}, {"path", spec_path}};
  } else {
    throw ConfigError("field \"spectrum.source\" must be one of optimize, file");
  }

  detail::progress(opts, "[simulate] optimized system: " + std::to_string(trials) +
                             " trials x " + std::to_string(snr_db.size()) + " SNRs");
  const auto rows_opt =
      monte_carlo_nmse(opt_sys, prior, design, ec, snr_db, trials,
                       detail::derive_seed(seed, 1), opts.threads, order, cplx(1, 0));
  detail::progress(opts, "[simulate] reference system");
  const auto rows_ref =
      monte_carlo_nmse(ref.config, prior, ref.spectrum, ec, snr_db, trials,
                       detail::derive_seed(seed, 2), opts.threads, order, cplx(1, 0));

  detail::CsvWriter csv(out_dir / "simulate.csv",
                        "snr_db,system,nmse_tau,nmse_nu,bcrlb_tau_norm,bcrlb_nu_norm");
  for (std::size_t i = 0; i < snr_db.size(); ++i) {
    csv.row(rows_opt[i].snr_db, "optimized", rows_opt[i].nmse_tau, rows_opt[i].nmse_nu,
            rows_opt[i].bcrlb_tau_norm, rows_opt[i].bcrlb_nu_norm);
    csv.row(rows_ref[i].snr_db, "reference", rows_ref[i].nmse_tau, rows_ref[i].nmse_nu,
            rows_ref[i].bcrlb_tau_norm, rows_ref[i].bcrlb_nu_norm);
  }
  detail::write_spectrum_csv(out_dir / "simulate_spectrum.csv", opt_sys, design);
  detail::write_summary(out_dir / "simulate_summary.json", cfg,
                        ordered_json{{"command", "simulate"},
                                     {"design", design_info},
                                     {"seed", seed},
                                     {"optimized_N", opt_sys.N},
                                     {"optimized_K", opt_sys.K},
                                     {"reference_N", ref.config.N}});
  detail::progress(opts, "[simulate] wrote " + (out_dir / "simulate.csv").string());
}

inline void run_optimize(const ordered_json& cfg, const RunOptions& opts) {
  expcfg::Section root(cfg, "");
  SystemConfig sys = expcfg::parse_system(root, true, true);
  const ParamPrior prior = expcfg::parse_prior(root);
  const int order = expcfg::parse_quadrature(root);
  std::optional<double> ref_rate;
  if (root.has("reference_rate_hz")) ref_rate = root.num("reference_rate_hz");

  expcfg::Section weighting_sec = root.child("weighting");
  std::optional<double> alpha;
  Eigen::Matrix2d raw_m = Eigen::Matrix2d::Zero();
  bool raw = false;
  if (weighting_sec.has("alpha")) {
    alpha = weighting_sec.num("alpha");
    if (*alpha < 0 || *alpha > 1) {
      throw ConfigError("field \"weighting.alpha\" must lie in [0, 1]");
    }
  } else {
    raw = true;
    raw_m(0, 0) = weighting_sec.num("m11");
    raw_m(1, 1) = weighting_sec.num("m22");
    raw_m(0, 1) = raw_m(1, 0) = weighting_sec.num_or("m12", 0.0);
  }
  weighting_sec.finish();
  if (root.has("output_dir")) root.str("output_dir");
  root.finish();

  const auto out_dir = detail::prepare_out_dir(cfg, opts);
  SystemConfig unit = sys;
  unit.N0 = sys.P / sys.B;
  const NoiseCovariance cov = noise_covariance(unit);
  const SensitivitySet sens = sensitivity_set(unit, cov, prior, order, opts.threads);

  Weighting w;
  if (raw) {
    w.m = raw_m;
  } else {
    const double s_tau = 1.0 / (sens.g11 + sens.g11.adjoint()).trace().real();
    const double s_nu = 1.0 / (sens.g22 + sens.g22.adjoint()).trace().real();
    w.m = Eigen::Matrix2d::Zero();
    w.m(0, 0) = *alpha * s_tau;
    w.m(1, 1) = (1.0 - *alpha) * s_nu;
  }
  const Eigen::MatrixXcd gamma_w = weighted_sensitivity(sens, w);
  const PrincipalDesign d = principal_eigen_design(gamma_w);
  const Spectrum x{std::sqrt(unit.P) * d.vector};

  ordered_json extra{{"command", "optimize"},
                     {"objective", unit.P * d.lambda_max},
                     {"lambda_max", d.lambda_max},
                     {"power", x.power()},
                     {"N", unit.N},
                     {"K", unit.K}};
  if (ref_rate) {
    const ReferenceSystem ref =
        make_reference_system(unit, *ref_rate, prior, order, opts.threads);
    const ChiPair chi = chi_relative(sens, x, ref);
    extra["chi_tau_db"] = chi.chi_tau_db;
    extra["chi_nu_db"] = chi.chi_nu_db;
  }
  detail::write_spectrum_csv(out_dir / "spectrum.csv", unit, x);
  detail::write_summary(out_dir / "optimize_summary.json", cfg, extra);
  detail::progress(opts, "[optimize] wrote " + (out_dir / "spectrum.csv").string());
}

}  // namespace ddwave
