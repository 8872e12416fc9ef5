#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bergman/asymptotics.hpp"
#include "bergman/spectra.hpp"

namespace bergman {

inline constexpr const char* kArtifactVersion = "bergman-lab 1.0.0";

// ---------------------------------------------------------------------------
// Experiment configuration (JSON in, see README for the schema).
// ---------------------------------------------------------------------------

struct RadialSchedule {
  int count = 0;
  double u_min = 1e-4;
  double u_max = 0.5;
  double theta = 0.3;
};

struct ExperimentConfig {
  MetricSpec metric;
  Rational t{1, 4};
  std::vector<int> p_grid;
  std::vector<ChartPoint> points;
  std::optional<RadialSchedule> radial;
  std::string backend = "oracle";  // "oracle" | "quadrature"
  std::map<std::string, double> tolerances;
  std::string cache_dir;
  std::uint64_t seed = 1;
  double c_probe = 1.0;

  double tol(const std::string& key, double fallback) const {
    auto it = tolerances.find(key);
    return it == tolerances.end() ? fallback : it->second;
  }

  /// All points including any generated schedule, in a fixed order.
  std::vector<ChartPoint> all_points() const;

  /// Collects every validation problem at once (empty means valid).
  std::vector<std::string> validate() const;

  std::string canonical_json() const;
  std::string hash() const;

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
};

struct ExperimentReport {
  std::map<std::string, Verdict> verdicts;
  std::map<std::string, double> fitted_constants;
  std::vector<std::string> tables;  // emitted CSV file names
  std::string config_hash;
  std::string version = kArtifactVersion;

  bool all_pass() const;
  std::string to_json_text() const;
  void merge(const ExperimentReport& other);
};

// ---------------------------------------------------------------------------
// Gram cache: content-addressed JSON files with hex-float payloads.
// ---------------------------------------------------------------------------

class GramCache {
 public:
  explicit GramCache(std::string dir);  // empty dir disables the cache

  std::optional<GramData> get(const std::string& key);
  void put(const std::string& key, const GramData& g);

  int corrupted_reads() const { return corrupted_; }
  const std::string& dir() const { return dir_; }

  static std::string serialize(const GramData& g);
  static GramData deserialize(const std::string& text);  // throws on checksum mismatch

 private:
  std::string dir_;
  int corrupted_ = 0;
};

/// Resolves the cache directory: BERGMAN_CACHE env var overrides the config.
std::string resolve_cache_dir(const std::string& from_config);

/// Backend factory honoring config.backend and the cache.
std::unique_ptr<KernelBackend> make_backend(const ExperimentConfig& cfg, GramCache* cache);

// ---------------------------------------------------------------------------
// Experiment runners (each writes its CSV tables plus report.json to out_dir).
// ---------------------------------------------------------------------------

ExperimentReport run_decay(const ExperimentConfig& cfg, const std::string& out_dir);
ExperimentReport run_ratio(const ExperimentConfig& cfg, const std::string& out_dir);
ExperimentReport run_localize(const ExperimentConfig& cfg, const std::string& out_dir);
ExperimentReport run_expand(const ExperimentConfig& cfg, const std::string& out_dir);
ExperimentReport run_t0(const ExperimentConfig& cfg, const std::string& out_dir);

/// Sandwich inequality P~ e^{2tp eta rho} <= P_{0,p} <= P_p over sampled cells.
struct SandwichResult {
  int cells = 0;
  int violations = 0;
  double min_slack_lower = 0;  // log P_0 - (log P~ + 2 t p eta rho)
  double min_slack_upper = 0;  // log P - log P_0
};
SandwichResult sandwich_check(const MetricSpec& m, const Rational& t,
                              const std::vector<int>& p_grid, int n_points, std::uint64_t seed,
                              KernelBackend& backend, double slack_tol = 1e-8);

/// Built-in verification suite covering every anchor; writes reports under
/// out_dir and returns the merged report.
ExperimentReport run_selftest(const std::string& out_dir, const std::string& cache_dir);

/// Single kernel evaluation for the CLI.
std::string kernel_query(const MetricSpec& m, int p, const Rational& t, const ChartPoint& x,
                         const std::string& mode, const std::string& backend,
                         const std::string& cache_dir);

std::string fmt_g17(double x);

}  // namespace bergman
