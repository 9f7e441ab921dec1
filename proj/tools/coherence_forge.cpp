// coherence_forge: generate low-coherence binary sensing matrices and
// benchmark them with OMP.
//
//   coherence_forge generate --m 25 --n 625 --r 5 --seed 1 --out out/
//   coherence_forge evaluate --matrix-file out/matrix.sparse.txt --k 1:15
//   coherence_forge compare --matrix proposed --matrix devore:5:3
//       --matrix random --trials 200 --out figs/

#include <coherence_forge/harness.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace cf = coherence_forge;

namespace {

struct Flag {
  const char *name;
  const char *help;
};

// Every flag maps onto the config key of the same name.
constexpr Flag kFlags[] = {
    {"m", "rows"},
    {"n", "columns"},
    {"r", "column weight"},
    {"seed", "master seed"},
    {"trials", "trials per (k, SNR) cell"},
    {"out", "output directory"},
    {"alpha-bar", "initial Armijo step"},
    {"beta", "backtracking factor in (0,1)"},
    {"sigma", "sufficient decrease constant in (0,1)"},
    {"tau", "gradient norm tolerance"},
    {"max-iters", "iteration cap per sharpness rung"},
    {"max-backtracks", "backtracking cap per line search"},
    {"alpha-ladder", "sharpness rungs, e.g. 50,200,800"},
    {"optimizer-seed", "seed of the optimizer's starting point"},
    {"retry-duplicates", "rebuild up to N times while duplicate columns remain"},
    {"k", "sparsity list, e.g. 1:15 or 1,2,4"},
    {"snr", "input SNR list in dB, e.g. inf,35 or 0:10:100"},
    {"matrix-file", "matrix file to evaluate"},
    {"fig1-snr", "input SNR of the recovery vs sparsity curve"},
    {"fig2-k", "sparsity of the output vs input SNR curve"},
    {"fig2-snr", "input SNR list of the output vs input SNR curve"},
    {"fig3-snr", "input SNR of the output SNR vs sparsity curve"},
};

struct Parsed {
  std::string config;
  std::map<std::string, std::string> values;
  std::vector<std::string> matrices;
};

void add_flags(CLI::App *sub, Parsed &p) {
  sub->add_option("--config", p.config, "JSON config file; flags override it");
  for (const Flag &f : kFlags)
    sub->add_option(std::string("--") + f.name, p.values[f.name], f.help);
  sub->add_option("--matrix", p.matrices,
                  "matrix source: [NAME=]proposed[:SEED] | devore:P:D | "
                  "random[:SEED] | file:PATH (repeatable)");
}

cf::ExperimentConfig resolve(const std::string &mode, CLI::App *sub,
                             const Parsed &p) {
  cf::ExperimentConfig cfg =
      p.config.empty() ? cf::ExperimentConfig{} : cf::load_config_file(p.config);
  if (!cfg.mode.empty() && cfg.mode != mode)
    throw cf::Error(cf::Errc::validation, "config mode '" + cfg.mode +
                                              "' does not match command '" +
                                              mode + "'");
  nlohmann::json overlay = nlohmann::json::object();
  for (const Flag &f : kFlags)
    if (sub->count(std::string("--") + f.name) > 0)
      overlay[f.name] = p.values.at(f.name);
  if (!p.matrices.empty())
    overlay["matrix"] = p.matrices;
  cf::apply_json(cfg, overlay);
  cfg.mode = mode;
  cfg.threads = cf::thread_count_from_env();
  return cfg;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Low-coherence binary sensing matrices and OMP benchmarks"};
  app.require_subcommand(1);
  Parsed gen, eval, cmp;
  CLI::App *g = app.add_subcommand("generate", "optimize and binarize a matrix");
  CLI::App *e = app.add_subcommand("evaluate", "benchmark one matrix file");
  CLI::App *c = app.add_subcommand("compare", "benchmark several matrices");
  add_flags(g, gen);
  add_flags(e, eval);
  add_flags(c, cmp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &err) {
    return app.exit(err);
  } catch (const CLI::ParseError &err) {
    app.exit(err);
    return cf::exit_validation;
  }

  try {
    if (g->parsed())
      return cf::cmd_generate(resolve("generate", g, gen), std::cerr);
    if (e->parsed())
      return cf::cmd_evaluate(resolve("evaluate", e, eval), std::cerr);
    return cf::cmd_compare(resolve("compare", c, cmp), std::cerr);
  } catch (const cf::Error &err) {
    std::cerr << "error: " << err.what() << '\n';
    return cf::exit_validation;
  } catch (const std::exception &err) {
    std::cerr << "error: " << err.what() << '\n';
    return cf::exit_runtime;
  }
}
