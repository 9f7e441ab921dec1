#pragma once

// Experiment driver behind the `coherence_forge` command line tool. Every
// command is a function of an ExperimentConfig; all randomness derives from
// its master seed.

#include <coherence_forge/baselines.hpp>
#include <coherence_forge/binary_construct.hpp>
#include <coherence_forge/error.hpp>
#include <coherence_forge/optimizer.hpp>
#include <coherence_forge/parallel.hpp>
#include <coherence_forge/recovery.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace coherence_forge {

enum ExitCode : int {
  exit_success = 0,
  exit_validation = 2,
  exit_runtime = 3,
};

struct MatrixSource {
  enum class Kind { proposed, devore, random, file };
  Kind kind = Kind::proposed;
  std::string id;
  int p = 5;
  int degree = 3;
  std::optional<std::uint64_t> seed; // random / proposed; defaults from master
  std::string path;
};

struct ExperimentConfig {
  std::string mode; // generate | evaluate | compare
  Index m = 25;
  Index n = 625;
  int r = 5;
  OptimizerConfig optimizer;
  bool optimizer_seed_set = false;
  int retry_duplicates = 0;

  std::vector<int> k_range = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  std::vector<double> snr_list = {std::numeric_limits<double>::infinity()};
  int trials = 200;
  std::string out = "out";
  std::uint64_t seed = 1;

  std::string matrix_file;           // evaluate
  std::vector<MatrixSource> matrices; // compare
  double fig1_snr = std::numeric_limits<double>::infinity();
  int fig2_k = 6;
  std::vector<double> fig2_snrs = {0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  double fig3_snr = 35.0;
  unsigned threads = 0;
};

// ---------------------------------------------------------------------------
// Parsing helpers shared by the JSON loader and the command line.

namespace detail {

[[noreturn]] inline void invalid(const std::string &what) {
  throw Error(Errc::validation, what);
}

inline double parse_real(const std::string &tok) {
  if (tok == "inf" || tok == "+inf" || tok == "noiseless")
    return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception &) {
    invalid("expected a number, got '" + tok + "'");
  }
  if (used != tok.size())
    invalid("expected a number, got '" + tok + "'");
  return v;
}

inline long long parse_integer(const std::string &tok) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(tok, &used);
  } catch (const std::exception &) {
    invalid("expected an integer, got '" + tok + "'");
  }
  if (used != tok.size())
    invalid("expected an integer, got '" + tok + "'");
  return v;
}

inline std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep))
    if (!cur.empty())
      out.push_back(cur);
  return out;
}

} // namespace detail

/// "1:15" (inclusive), "1:2:15" (start:step:stop), or "1,2,5".
inline std::vector<int> parse_int_list(const std::string &text) {
  std::vector<int> out;
  for (const auto &part : detail::split(text, ',')) {
    const auto bits = detail::split(part, ':');
    if (bits.size() == 1) {
      out.push_back(static_cast<int>(detail::parse_integer(bits[0])));
    } else if (bits.size() == 2 || bits.size() == 3) {
      const long long lo = detail::parse_integer(bits[0]);
      const long long step = bits.size() == 3 ? detail::parse_integer(bits[1]) : 1;
      const long long hi = detail::parse_integer(bits.back());
      if (step <= 0 || hi < lo)
        detail::invalid("bad integer range '" + part + "'");
      for (long long v = lo; v <= hi; v += step)
        out.push_back(static_cast<int>(v));
    } else {
      detail::invalid("bad integer range '" + part + "'");
    }
  }
  if (out.empty())
    detail::invalid("empty integer list '" + text + "'");
  return out;
}

/// "inf,35" or "0:10:100" (start:step:stop, inclusive).
inline std::vector<double> parse_real_list(const std::string &text) {
  std::vector<double> out;
  for (const auto &part : detail::split(text, ',')) {
    const auto bits = detail::split(part, ':');
    if (bits.size() == 1) {
      out.push_back(detail::parse_real(bits[0]));
    } else if (bits.size() == 3) {
      const double lo = detail::parse_real(bits[0]);
      const double step = detail::parse_real(bits[1]);
      const double hi = detail::parse_real(bits[2]);
      if (!(step > 0) || !(hi >= lo) || !std::isfinite(hi))
        detail::invalid("bad real range '" + part + "'");
      const long long count = std::llround(std::floor((hi - lo) / step + 1e-9));
      for (long long i = 0; i <= count; ++i)
        out.push_back(lo + static_cast<double>(i) * step);
    } else {
      detail::invalid("bad real range '" + part + "'");
    }
  }
  if (out.empty())
    detail::invalid("empty real list '" + text + "'");
  return out;
}

/// proposed[:SEED] | devore:P:DEGREE | random[:SEED] | file:PATH, with an
/// optional `NAME=` prefix that sets the column label in figure files.
inline MatrixSource parse_matrix_source(const std::string &text) {
  MatrixSource src;
  std::string body = text;
  std::string name;
  if (const auto eq = text.find('='); eq != std::string::npos) {
    name = text.substr(0, eq);
    body = text.substr(eq + 1);
  }
  const auto colon = body.find(':');
  const std::string kind = body.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : body.substr(colon + 1);
  if (kind == "proposed") {
    src.kind = MatrixSource::Kind::proposed;
    if (!rest.empty())
      src.seed = static_cast<std::uint64_t>(detail::parse_integer(rest));
  } else if (kind == "devore") {
    src.kind = MatrixSource::Kind::devore;
    const auto bits = detail::split(rest, ':');
    if (bits.size() == 2) {
      src.p = static_cast<int>(detail::parse_integer(bits[0]));
      src.degree = static_cast<int>(detail::parse_integer(bits[1]));
    } else if (!bits.empty()) {
      detail::invalid("devore source must be devore:P:DEGREE");
    }
  } else if (kind == "random") {
    src.kind = MatrixSource::Kind::random;
    if (!rest.empty())
      src.seed = static_cast<std::uint64_t>(detail::parse_integer(rest));
  } else if (kind == "file") {
    src.kind = MatrixSource::Kind::file;
    src.path = rest;
    if (src.path.empty())
      detail::invalid("file source needs a path");
  } else {
    detail::invalid("unknown matrix source '" + text + "'");
  }
  src.id = name.empty() ? kind : name;
  if (src.kind == MatrixSource::Kind::file && name.empty())
    src.id = std::filesystem::path(src.path).stem().stem().string();
  return src;
}

// ---------------------------------------------------------------------------
// JSON config. Keys mirror the command line flag names with dashes turned
// into underscores.

namespace detail {

inline std::vector<int> json_int_list(const nlohmann::json &j) {
  if (j.is_string())
    return parse_int_list(j.get<std::string>());
  if (j.is_number_integer())
    return {j.get<int>()};
  if (!j.is_array())
    invalid("expected a list of integers, got " + j.dump());
  std::vector<int> out;
  for (const auto &v : j) {
    if (!v.is_number_integer())
      invalid("expected an integer, got " + v.dump());
    out.push_back(v.get<int>());
  }
  return out;
}

inline double json_real(const nlohmann::json &j) {
  if (j.is_string())
    return parse_real(j.get<std::string>());
  if (!j.is_number())
    invalid("expected a number, got " + j.dump());
  return j.get<double>();
}

inline std::vector<double> json_real_list(const nlohmann::json &j) {
  if (j.is_string())
    return parse_real_list(j.get<std::string>());
  if (j.is_number())
    return {j.get<double>()};
  if (!j.is_array())
    invalid("expected a list of numbers, got " + j.dump());
  std::vector<double> out;
  for (const auto &v : j)
    out.push_back(json_real(v));
  return out;
}

} // namespace detail

namespace detail {

inline long long json_integer(const nlohmann::json &j) {
  if (j.is_string())
    return parse_integer(j.get<std::string>());
  if (!j.is_number_integer())
    invalid("expected an integer, got " + j.dump());
  return j.get<long long>();
}

inline std::string json_string(const nlohmann::json &j) {
  if (!j.is_string())
    invalid("expected a string, got " + j.dump());
  return j.get<std::string>();
}

inline std::uint64_t json_seed(const nlohmann::json &j) {
  if (j.is_number_unsigned())
    return j.get<std::uint64_t>();
  const long long v = json_integer(j);
  if (v < 0)
    invalid("seeds must be nonnegative");
  return static_cast<std::uint64_t>(v);
}

inline std::vector<MatrixSource> json_sources(const nlohmann::json &j) {
  std::vector<MatrixSource> out;
  if (j.is_string()) {
    for (const auto &part : split(j.get<std::string>(), ','))
      out.push_back(parse_matrix_source(part));
    return out;
  }
  for (const auto &v : j)
    out.push_back(parse_matrix_source(json_string(v)));
  return out;
}

} // namespace detail

/// Overlays the keys of `j` onto cfg. Keys may use dashes or underscores;
/// values may be JSON numbers or strings in command line syntax.
inline void apply_json(ExperimentConfig &cfg, const nlohmann::json &j) {
  if (!j.is_object())
    detail::invalid("config must be a JSON object");
  using detail::json_integer;
  for (const auto &[raw_key, value] : j.items()) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '-', '_');
    try {
      if (key == "mode") cfg.mode = detail::json_string(value);
      else if (key == "m") cfg.m = static_cast<Index>(json_integer(value));
      else if (key == "n") cfg.n = static_cast<Index>(json_integer(value));
      else if (key == "r") cfg.r = static_cast<int>(json_integer(value));
      else if (key == "seed") cfg.seed = detail::json_seed(value);
      else if (key == "trials") cfg.trials = static_cast<int>(json_integer(value));
      else if (key == "out") cfg.out = detail::json_string(value);
      else if (key == "alpha_bar") cfg.optimizer.alpha_bar = detail::json_real(value);
      else if (key == "beta") cfg.optimizer.beta = detail::json_real(value);
      else if (key == "sigma") cfg.optimizer.sigma = detail::json_real(value);
      else if (key == "tau") cfg.optimizer.tau = detail::json_real(value);
      else if (key == "max_iters")
        cfg.optimizer.max_iters = static_cast<int>(json_integer(value));
      else if (key == "max_backtracks")
        cfg.optimizer.max_backtracks = static_cast<int>(json_integer(value));
      else if (key == "alpha_ladder")
        cfg.optimizer.alpha_ladder = detail::json_real_list(value);
      else if (key == "optimizer_seed") {
        cfg.optimizer.seed = detail::json_seed(value);
        cfg.optimizer_seed_set = true;
      } else if (key == "retry_duplicates")
        cfg.retry_duplicates = static_cast<int>(json_integer(value));
      else if (key == "k") cfg.k_range = detail::json_int_list(value);
      else if (key == "snr") cfg.snr_list = detail::json_real_list(value);
      else if (key == "matrix_file") cfg.matrix_file = detail::json_string(value);
      else if (key == "matrix") cfg.matrices = detail::json_sources(value);
      else if (key == "fig1_snr") cfg.fig1_snr = detail::json_real(value);
      else if (key == "fig2_k") cfg.fig2_k = static_cast<int>(json_integer(value));
      else if (key == "fig2_snr") cfg.fig2_snrs = detail::json_real_list(value);
      else if (key == "fig3_snr") cfg.fig3_snr = detail::json_real(value);
      else detail::invalid("unknown config key '" + raw_key + "'");
    } catch (const nlohmann::json::exception &e) {
      detail::invalid("config key '" + raw_key + "': " + e.what());
    }
  }
}

inline ExperimentConfig load_config_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(Errc::validation, "cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw Error(Errc::parse, path + ": " + e.what());
  }
  ExperimentConfig cfg;
  apply_json(cfg, j);
  return cfg;
}

// ---------------------------------------------------------------------------
// Validation. Runs before any computation starts.

namespace detail {

inline void validate_grid(const ExperimentConfig &cfg) {
  if (cfg.trials < 1)
    invalid("trials must be >= 1");
  if (cfg.k_range.empty())
    invalid("k list is empty");
  for (int k : cfg.k_range)
    if (k < 0)
      invalid("sparsity must be >= 0");
  for (double s : cfg.snr_list)
    if (std::isnan(s) || (std::isinf(s) && s < 0))
      invalid("input SNR must be finite or inf");
}

inline void validate_output_dir(const std::string &out) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out))
    invalid("cannot create output directory " + out);
  const fs::path probe = fs::path(out) / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f)
      invalid("output directory " + out + " is not writable");
  }
  fs::remove(probe, ec);
}

inline void validate_shape(Index m, Index n, int r) {
  if (!(1 <= r && r < m && m < n))
    invalid("need 1 <= r < m < n, got m=" + std::to_string(m) +
            " n=" + std::to_string(n) + " r=" + std::to_string(r));
}

inline void check_k_fits(const std::vector<int> &ks, Index m,
                         const std::string &id) {
  for (int k : ks)
    if (k > m)
      invalid("sparsity " + std::to_string(k) + " exceeds m=" +
              std::to_string(m) + " of matrix " + id);
}

inline void write_file(const std::filesystem::path &path,
                       const std::string &content) {
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw Error(Errc::io, "cannot write " + path.string());
  f << content;
  if (!f)
    throw Error(Errc::io, "failed writing " + path.string());
}

} // namespace detail

inline std::uint64_t proposed_seed(const ExperimentConfig &cfg) {
  return cfg.optimizer_seed_set ? cfg.optimizer.seed : cfg.seed;
}

// ---------------------------------------------------------------------------
// generate

inline nlohmann::json coherence_json(const Construction &c, std::uint64_t seed,
                                     int attempts) {
  nlohmann::json j;
  j["m"] = c.matrix.m();
  j["n"] = c.matrix.n();
  j["r"] = c.matrix.r();
  j["seed"] = seed;
  j["attempts"] = attempts;
  j["coherence"] = c.report.coherence;
  j["welch"] = c.report.welch;
  j["rip_order"] = c.report.rip_order;
  j["rip_constant_bound"] = c.report.rip_constant_bound;
  j["argmax_pair"] = {c.report.argmax_pair.first, c.report.argmax_pair.second};
  j["duplicate_pairs"] = c.duplicates.size();
  j["optimizer_status"] = to_string(c.trace.status);
  j["iterations"] = c.trace.records.size();
  j["final_objective"] =
      c.trace.records.empty() ? 0.0 : c.trace.records.back().objective;
  j["warnings"] = c.trace.warnings;
  return j;
}

/// Builds the proposed matrix, retrying with derived seeds while duplicate
/// columns remain and retries are left.
inline Construction build_proposed(Index m, Index n, int r,
                                   OptimizerConfig opt, int retry_duplicates,
                                   int *attempts_out = nullptr) {
  const std::uint64_t base = opt.seed;
  int attempt = 0;
  for (;;) {
    opt.seed = attempt == 0 ? base : derive_seed(base, static_cast<std::uint64_t>(attempt));
    Construction c = construct(m, n, r, opt);
    if (c.duplicates.empty() || attempt >= retry_duplicates) {
      if (attempts_out != nullptr)
        *attempts_out = attempt + 1;
      return c;
    }
    ++attempt;
  }
}

inline int cmd_generate(const ExperimentConfig &cfg, std::ostream &log) {
  namespace fs = std::filesystem;
  try {
    detail::validate_shape(cfg.m, cfg.n, cfg.r);
    cfg.optimizer.validate();
    if (cfg.retry_duplicates < 0)
      detail::invalid("retry_duplicates must be >= 0");
    detail::validate_output_dir(cfg.out);
  } catch (const Error &e) {
    log << "error: " << e.what() << '\n';
    return exit_validation;
  }
  OptimizerConfig opt = cfg.optimizer;
  opt.seed = proposed_seed(cfg);
  const fs::path dir(cfg.out);
  try {
    int attempts = 1;
    Construction c = build_proposed(cfg.m, cfg.n, cfg.r, opt,
                                    cfg.retry_duplicates, &attempts);
    std::ostringstream dense, sparse, trace;
    write_dense(dense, c.matrix);
    write_sparse(sparse, c.matrix);
    c.trace.write_csv(trace);
    detail::write_file(dir / "matrix.dense.txt", dense.str());
    detail::write_file(dir / "matrix.sparse.txt", sparse.str());
    detail::write_file(dir / "trace.csv", trace.str());
    detail::write_file(dir / "coherence.json",
                       coherence_json(c, opt.seed, attempts).dump(2) + "\n");
    for (const auto &w : c.trace.warnings)
      log << "warning: " << w << '\n';
    log << "coherence " << format_real(c.report.coherence) << " (welch "
        << format_real(c.report.welch) << ")\n";
    return exit_success;
  } catch (const OptimizationFailure &e) {
    std::ostringstream trace;
    e.trace().write_csv(trace);
    try {
      detail::write_file(dir / "trace.csv", trace.str());
    } catch (const Error &) {
    }
    log << "error: " << e.what() << '\n';
    return exit_runtime;
  } catch (const Error &e) {
    log << "error: " << e.what() << '\n';
    return exit_runtime;
  }
}

// ---------------------------------------------------------------------------
// evaluate

inline BinaryMatrix load_matrix_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(Errc::io, "cannot open matrix file " + path);
  try {
    return read_matrix(in);
  } catch (const Error &e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

inline int cmd_evaluate(const ExperimentConfig &cfg, std::ostream &log) {
  namespace fs = std::filesystem;
  BinaryMatrix a;
  try {
    detail::validate_grid(cfg);
    if (cfg.matrix_file.empty())
      detail::invalid("evaluate needs --matrix-file");
    a = load_matrix_file(cfg.matrix_file);
    detail::check_k_fits(cfg.k_range, a.m(), cfg.matrix_file);
    detail::validate_output_dir(cfg.out);
  } catch (const Error &e) {
    log << "error: " << e.what() << '\n';
    return exit_validation;
  }
  try {
    const std::string id = fs::path(cfg.matrix_file).stem().stem().string();
    const RecoveryReport rep = run_experiment(a, cfg.k_range, cfg.snr_list,
                                              cfg.trials, cfg.seed, id,
                                              cfg.threads);
    std::ostringstream csv;
    write_report_csv(csv, rep);
    detail::write_file(fs::path(cfg.out) / "report.csv", csv.str());
    return exit_success;
  } catch (const Error &e) {
    log << "error: " << e.what() << '\n';
    return exit_runtime;
  }
}

// ---------------------------------------------------------------------------
// compare

struct LoadedMatrix {
  std::string id;
  BinaryMatrix matrix;
};

/// Resolves every matrix source. Random and proposed sources without an
/// explicit seed use seeds derived from the master seed.
inline std::vector<LoadedMatrix> load_sources(const ExperimentConfig &cfg,
                                              std::ostream &log) {
  std::vector<LoadedMatrix> out;
  for (std::size_t i = 0; i < cfg.matrices.size(); ++i) {
    const MatrixSource &src = cfg.matrices[i];
    switch (src.kind) {
    case MatrixSource::Kind::devore:
      out.push_back({src.id, devore_matrix({src.p, src.degree})});
      break;
    case MatrixSource::Kind::random:
      out.push_back({src.id, random_binary_matrix(
                                 cfg.m, cfg.n, cfg.r,
                                 src.seed.value_or(derive_seed(cfg.seed, 0x5241ULL, i)))});
      break;
    case MatrixSource::Kind::file:
      out.push_back({src.id, load_matrix_file(src.path)});
      break;
    case MatrixSource::Kind::proposed: {
      OptimizerConfig opt = cfg.optimizer;
      opt.seed = src.seed.value_or(proposed_seed(cfg));
      Construction c =
          build_proposed(cfg.m, cfg.n, cfg.r, opt, cfg.retry_duplicates);
      for (const auto &w : c.trace.warnings)
        log << "warning: " << src.id << ": " << w << '\n';
      out.push_back({src.id, std::move(c.matrix)});
      break;
    }
    }
  }
  return out;
}

inline std::string figure_header(const ExperimentConfig &cfg,
                                 const std::string &what) {
  return "# " + what + "; trials=" + std::to_string(cfg.trials) +
         " seed=" + std::to_string(cfg.seed) + "\n";
}

inline int cmd_compare(const ExperimentConfig &cfg, std::ostream &log) {
  namespace fs = std::filesystem;
  std::vector<LoadedMatrix> mats;
  try {
    if (cfg.matrices.size() < 2)
      detail::invalid("compare needs at least two matrix sources");
    std::vector<std::string> ids;
    for (const auto &src : cfg.matrices) {
      if (std::find(ids.begin(), ids.end(), src.id) != ids.end())
        detail::invalid("duplicate matrix id '" + src.id + "'");
      ids.push_back(src.id);
      if (src.kind == MatrixSource::Kind::proposed)
        detail::validate_shape(cfg.m, cfg.n, cfg.r);
      if (src.kind == MatrixSource::Kind::random && !(1 <= cfg.r && cfg.r <= cfg.m))
        detail::invalid("random source needs 1 <= r <= m");
      if (src.kind == MatrixSource::Kind::devore) {
        if (!is_prime(src.p))
          throw Error(Errc::invalid_field, std::to_string(src.p) + " is not prime");
        if (src.degree < 1 || src.degree >= src.p)
          throw Error(Errc::degree_too_large, "devore degree must lie in [1, p)");
      }
      if (src.kind == MatrixSource::Kind::file && !fs::exists(src.path))
        throw Error(Errc::io, "matrix file " + src.path + " does not exist");
    }
    cfg.optimizer.validate();
    detail::validate_grid(cfg);
    if (cfg.fig2_k < 0)
      detail::invalid("fig2_k must be >= 0");
    detail::validate_output_dir(cfg.out);
  } catch (const Error &e) {
    log << "error: " << e.what() << '\n';
    return exit_validation;
  }

  try {
    mats = load_sources(cfg, log);
  } catch (const OptimizationFailure &e) {
    log << "error: " << e.what() << '\n';
    return exit_runtime;
  } catch (const Error &e) {
    log << "error: " << e.what() << '\n';
    return e.code() == Errc::parse || e.code() == Errc::io ? exit_validation
                                                          : exit_runtime;
  }
  try {
    for (const auto &lm : mats) {
      detail::check_k_fits(cfg.k_range, lm.matrix.m(), lm.id);
      detail::check_k_fits({cfg.fig2_k}, lm.matrix.m(), lm.id);
    }
  } catch (const Error &e) {
    log << "error: " << e.what() << '\n';
    return exit_validation;
  }

  try {
    // Grid: fig1 (k list x fig1 SNR), fig2 (fig2 k x fig2 SNRs), fig3 (k list x
    // fig3 SNR), plus the user SNR list over the k list.
    std::map<std::pair<int, double>, char> grid;
    for (int k : cfg.k_range) {
      grid[{k, cfg.fig1_snr}] = 1;
      grid[{k, cfg.fig3_snr}] = 1;
      for (double s : cfg.snr_list)
        grid[{k, s}] = 1;
    }
    for (double s : cfg.fig2_snrs)
      grid[{cfg.fig2_k, s}] = 1;

    std::vector<RecoveryReport> reports;
    for (const auto &lm : mats) {
      RecoveryReport merged;
      merged.matrix_id = lm.id;
      merged.seed = cfg.seed;
      for (const auto &[cell, unused] : grid) {
        (void)unused;
        RecoveryReport one = run_experiment(lm.matrix, {cell.first},
                                            {cell.second}, cfg.trials, cfg.seed,
                                            lm.id, cfg.threads);
        merged.cells.push_back(one.cells.front());
      }
      reports.push_back(std::move(merged));
    }

    std::ostringstream combined;
    write_report_header(combined);
    for (const auto &rep : reports)
      write_report_rows(combined, rep);

    auto series = [&](const std::string &what, const std::string &xname,
                      const std::vector<std::pair<int, double>> &cells,
                      bool x_is_k, bool recovery) {
      std::ostringstream os;
      os << figure_header(cfg, what);
      os << xname;
      for (const auto &rep : reports)
        os << ',' << rep.matrix_id;
      os << '\n';
      for (const auto &[k, snr] : cells) {
        os << (x_is_k ? std::to_string(k) : format_real(snr));
        for (const auto &rep : reports) {
          const RecoveryCell &c = rep.cell(k, snr);
          os << ',' << format_real(recovery ? c.recovery_pct : c.mean_output_snr_db);
        }
        os << '\n';
      }
      return os.str();
    };
    std::vector<std::pair<int, double>> fig1, fig2, fig3;
    for (int k : cfg.k_range) {
      fig1.push_back({k, cfg.fig1_snr});
      fig3.push_back({k, cfg.fig3_snr});
    }
    for (double s : cfg.fig2_snrs)
      fig2.push_back({cfg.fig2_k, s});

    const fs::path dir(cfg.out);
    detail::write_file(dir / "combined.csv", combined.str());
    detail::write_file(
        dir / "fig1_recovery_vs_k.csv",
        series("recovery percentage vs sparsity; input_snr_db=" +
                   format_real(cfg.fig1_snr),
               "k", fig1, true, true));
    detail::write_file(
        dir / "fig2_output_snr_vs_input_snr.csv",
        series("mean output SNR (dB) vs input SNR; k=" + std::to_string(cfg.fig2_k),
               "input_snr_db", fig2, false, false));
    detail::write_file(
        dir / "fig3_output_snr_vs_k.csv",
        series("mean output SNR (dB) vs sparsity; input_snr_db=" +
                   format_real(cfg.fig3_snr),
               "k", fig3, true, false));
    return exit_success;
  } catch (const Error &e) {
    log << "error: " << e.what() << '\n';
    return exit_runtime;
  }
}

} // namespace coherence_forge
