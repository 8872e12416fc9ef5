#include <complex>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "bergman/lab.hpp"

namespace {

bergman::ChartPoint parse_point(const std::string& s) {
  // CHART:RE,IM
  const auto colon = s.find(':');
  const auto comma = s.find(',', colon);
  if (colon == std::string::npos || comma == std::string::npos)
    throw CLI::ValidationError("--point", "expected CHART:RE,IM");
  bergman::ChartPoint x;
  x.chart = std::stoi(s.substr(0, colon));
  x.z = bergman::Complex(std::stod(s.substr(colon + 1, comma - colon - 1)),
                         std::stod(s.substr(comma + 1)));
  return x;
}

int finish(const bergman::ExperimentReport& rep, bool quiet = false) {
  for (const auto& [id, v] : rep.verdicts) {
    if (!quiet)
      std::cout << (v.pass ? "PASS " : "FAIL ") << id << " (measured " << v.measured
                << ", tolerance " << v.tolerance << ")\n";
  }
  return rep.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bergman-lab: kernel functions and asymptotic experiments on the model manifold"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", cache_dir;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("--config", config_path, "experiment config (JSON)");
    if (need_config) opt->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--cache", cache_dir, "gram cache directory (BERGMAN_CACHE overrides)");
  };

  auto* self = app.add_subcommand("selftest", "run the built-in verification suite");
  add_common(self, false);

  auto* decay = app.add_subcommand("decay", "partial-kernel decay rates near the divisor");
  add_common(decay, true);
  auto* ratio = app.add_subcommand("ratio", "singular-kernel ratio statistic on probe schedules");
  add_common(ratio, true);
  auto* localize = app.add_subcommand("localize", "full vs partial kernel agreement on compact sets");
  add_common(localize, true);
  auto* expand = app.add_subcommand("expand", "two-term expansion coefficients");
  add_common(expand, true);
  auto* t0cmd = app.add_subcommand("t0", "positivity threshold estimator");
  add_common(t0cmd, true);

  auto* kernel = app.add_subcommand("kernel", "evaluate one kernel value");
  std::string metric_path, t_str = "1/4", point_str = "0:0.5,0.0", mode = "full",
              backend = "quadrature";
  int p = 10;
  kernel->add_option("--metric", metric_path, "metric spec (JSON file)");
  kernel->add_option("--p", p, "tensor power")->required();
  kernel->add_option("--t", t_str, "vanishing fraction as a rational n/d");
  kernel->add_option("--point", point_str, "evaluation point CHART:RE,IM")->required();
  kernel->add_option("--mode", mode, "full|partial|singular");
  kernel->add_option("--backend", backend, "oracle|quadrature");
  kernel->add_option("--cache", cache_dir, "gram cache directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (self->parsed()) {
      return finish(bergman::run_selftest(out_dir, cache_dir));
    }
    if (kernel->parsed()) {
      bergman::MetricSpec m;
      if (!metric_path.empty()) {
        std::ifstream is(metric_path);
        if (!is) throw std::runtime_error("cannot open metric file: " + metric_path);
        std::stringstream ss;
        ss << is.rdbuf();
        m = bergman::MetricSpec::from_json_text(ss.str());
      }
      std::cout << bergman::kernel_query(m, p, bergman::Rational::parse(t_str),
                                         parse_point(point_str), mode, backend, cache_dir);
      return 0;
    }

    auto cfg = bergman::ExperimentConfig::from_file(config_path);
    if (!cache_dir.empty()) cfg.cache_dir = cache_dir;
    if (decay->parsed()) return finish(bergman::run_decay(cfg, out_dir));
    if (ratio->parsed()) return finish(bergman::run_ratio(cfg, out_dir));
    if (localize->parsed()) return finish(bergman::run_localize(cfg, out_dir));
    if (expand->parsed()) return finish(bergman::run_expand(cfg, out_dir));
    if (t0cmd->parsed()) return finish(bergman::run_t0(cfg, out_dir));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
