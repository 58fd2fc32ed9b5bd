// Command-line front end. Links only the C API.
#include <cstdio>
#include <cstring>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "thzrsma/thzrsma.h"

namespace {

// Exit code = status + 1, so usage errors exit with 2.
int exit_code(thz_status s) { return s == THZ_OK ? 0 : static_cast<int>(s) + 1; }

int report(thz_status s) {
  if (s != THZ_OK) std::fprintf(stderr, "error[%s]: %s\n", thz_status_name(s), thz_last_error());
  return exit_code(s);
}

int usage_error(const std::string& msg) {
  std::fprintf(stderr, "error[%s]: %s\n", thz_status_name(THZ_ERR_INVALID_ARGUMENT), msg.c_str());
  return exit_code(THZ_ERR_INVALID_ARGUMENT);
}

struct ScenarioDeleter {
  void operator()(thz_scenario* s) const { thz_scenario_free(s); }
};
struct ResultDeleter {
  void operator()(thz_result* r) const { thz_result_free(r); }
};
using ScenarioPtr = std::unique_ptr<thz_scenario, ScenarioDeleter>;
using ResultPtr = std::unique_ptr<thz_result, ResultDeleter>;

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string seed;
  std::string threads;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("-c,--config", o.config, "Scenario JSON file")->check(CLI::ExistingFile);
  app->add_option("-s,--set", o.overrides, "Override KEY=VALUE (dotted path, repeatable)");
  app->add_option("--seed", o.seed, "Base seed");
  app->add_option("-j,--threads", o.threads, "Worker threads (0 = all cores)");
}

thz_status load(const CommonOptions& o, ScenarioPtr& out) {
  thz_scenario* raw = nullptr;
  const thz_status s =
      o.config.empty() ? thz_scenario_from_json("{}", &raw) : thz_scenario_from_file(o.config.c_str(), &raw);
  if (s != THZ_OK) return s;
  out.reset(raw);
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    const thz_status st = thz_scenario_set(out.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (st != THZ_OK) return st;
  }
  if (!o.seed.empty()) {
    if (thz_status st = thz_scenario_set(out.get(), "seed", o.seed.c_str()); st != THZ_OK) return st;
  }
  if (!o.threads.empty()) {
    if (thz_status st = thz_scenario_set(out.get(), "threads", o.threads.c_str()); st != THZ_OK) return st;
  }
  return thz_scenario_validate(out.get());
}

bool parse_formats(const std::string& text, unsigned& formats) {
  formats = 0;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "csv") formats |= THZ_FORMAT_CSV;
    else if (item == "plot") formats |= THZ_FORMAT_PLOT;
    else if (item == "cdf") formats |= THZ_FORMAT_CDF;
    else if (item == "meta") formats |= THZ_FORMAT_META;
    else if (item == "all") formats |= THZ_FORMAT_ALL;
    else return false;
  }
  return formats != 0;
}

int finish_result(thz_result* raw, const std::string& out_dir, const std::string& format_text,
                  bool print) {
  ResultPtr result(raw);
  unsigned formats = 0;
  if (!parse_formats(format_text, formats)) return usage_error("unknown --format '" + format_text + "'");
  if (thz_status s = thz_result_write(result.get(), out_dir.c_str(), formats); s != THZ_OK) {
    return report(s);
  }
  if (print) std::fputs(thz_result_csv(result.get()), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIS-aided THz MIMO-OFDM RSMA link simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(thz_version()));

  CommonOptions run_opts;
  std::string run_out = "out";
  std::string run_format = "all";
  std::string run_trials;
  bool run_print = false;
  auto* run = app.add_subcommand("run", "Run a Monte-Carlo sweep and write results");
  add_common(run, run_opts);
  run->add_option("-o,--out", run_out, "Output directory");
  run->add_option("-f,--format", run_format, "Comma list of csv, plot, cdf, meta, all");
  run->add_option("-t,--trials", run_trials, "Trials per sweep point");
  run->add_flag("-p,--print", run_print, "Also print results.csv to stdout");

  CommonOptions exp_opts;
  std::string exp_out;
  std::size_t n_train = 2048, n_val = 256, n_test = 256;
  auto* exp = app.add_subcommand("export-dataset", "Write channel datasets in the interchange format");
  add_common(exp, exp_opts);
  exp->add_option("-o,--out", exp_out, "Dataset directory")->required();
  exp->add_option("--train", n_train, "Training samples");
  exp->add_option("--val", n_val, "Validation samples");
  exp->add_option("--test", n_test, "Test samples");

  CommonOptions eval_opts;
  std::string eval_dataset, eval_artifacts, eval_out = "out", eval_format = "all";
  bool eval_print = false;
  auto* eval = app.add_subcommand("eval-external", "Score external artifacts on a dataset's test split");
  add_common(eval, eval_opts);
  eval->add_option("-d,--dataset", eval_dataset, "Dataset directory")->required();
  eval->add_option("-a,--artifacts", eval_artifacts, "Artifacts directory");
  eval->add_option("-o,--out", eval_out, "Output directory");
  eval->add_option("-f,--format", eval_format, "Comma list of csv, plot, cdf, meta, all");
  eval->add_flag("-p,--print", eval_print, "Also print results.csv to stdout");

  CommonOptions val_opts;
  std::string val_artifacts;
  bool val_print_spec = false;
  auto* val = app.add_subcommand("validate", "Check a scenario and, optionally, an artifacts directory");
  add_common(val, val_opts);
  val->add_option("-a,--artifacts", val_artifacts, "Artifacts directory");
  val->add_flag("--print-scenario", val_print_spec, "Print the resolved scenario JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code(THZ_ERR_INVALID_ARGUMENT);
  }

  for (const CommonOptions* o : {&run_opts, &exp_opts, &eval_opts, &val_opts}) {
    for (const std::string& kv : o->overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) return usage_error("--set expects KEY=VALUE, got '" + kv + "'");
    }
  }

  ScenarioPtr scenario;
  if (run->parsed()) {
    if (!run_trials.empty()) run_opts.overrides.push_back("trials=" + run_trials);
    if (thz_status s = load(run_opts, scenario); s != THZ_OK) return report(s);
    thz_result* result = nullptr;
    if (thz_status s = thz_scenario_run(scenario.get(), &result); s != THZ_OK) return report(s);
    return finish_result(result, run_out, run_format, run_print);
  }
  if (exp->parsed()) {
    if (thz_status s = load(exp_opts, scenario); s != THZ_OK) return report(s);
    return report(thz_export_dataset(scenario.get(), n_train, n_val, n_test, exp_out.c_str()));
  }
  if (eval->parsed()) {
    if (thz_status s = load(eval_opts, scenario); s != THZ_OK) return report(s);
    thz_result* result = nullptr;
    const thz_status s = thz_eval_external(scenario.get(), eval_dataset.c_str(),
                                           eval_artifacts.empty() ? nullptr : eval_artifacts.c_str(),
                                           &result);
    if (s != THZ_OK) return report(s);
    return finish_result(result, eval_out, eval_format, eval_print);
  }
  if (thz_status s = load(val_opts, scenario); s != THZ_OK) return report(s);
  if (val_print_spec) std::printf("%s\n", thz_scenario_json(scenario.get()));
  if (!val_artifacts.empty()) {
    std::vector<char> buf(1 << 16);
    const thz_status s = thz_validate_artifacts(scenario.get(), val_artifacts.c_str(), buf.data(), buf.size());
    if (s != THZ_OK) return report(s);
    std::fputs(buf.data(), stdout);
  }
  std::printf("ok\n");
  return 0;
}
