#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylo/article.hpp"
#include "stylo/defense.hpp"
#include "stylo/pipeline.hpp"

// Attack and defense evaluation: targeted F1, open-world top-k and coverage,
// before/after defense deltas, dataset loading and report rendering.
namespace stylo::eval {

inline constexpr std::uint64_t kDefaultSeed = 42;

// ---- metrics ----------------------------------------------------------------

/// F1 = 2PR/(P+R); 1 when tp = fp = fn = 0, 0 when tp = 0 otherwise.
double f1(std::size_t tp, std::size_t fp, std::size_t fn);

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double f1() const { return eval::f1(tp, fp, fn); }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

double macro_f1(const std::vector<Confusion>& per_target);

/// Per-target confusion counts. `predicted[i]` is the target credited for
/// article i (nullopt for none); a wrong target is a false positive for it
/// and a false negative for the true author when that author is a target.
std::vector<Confusion> tally_targets(const std::vector<std::string>& targets,
                                     const std::vector<std::string>& truths,
                                     const std::vector<std::optional<std::string>>& predicted);

/// Fraction of ranks in [1, k]; rank 0 means "absent". Empty input gives 0.
double top_k_rate(const std::vector<std::size_t>& ranks, std::size_t k);

// ---- scenarios --------------------------------------------------------------

struct TargetedCase {
  Article article;
  bool is_target = false;
  std::string true_author;
};

struct TargetedScenario {
  std::vector<std::string> targets;
  std::vector<TargetedCase> test_set;
  std::size_t samples_per_candidate = 5;
};

/// Splits `articles` into a targeted test set and the remaining training
/// articles. `num_targets` authors are drawn with `seed`; the test set has
/// floor(test_size / 2) target articles and the rest (the odd slot included)
/// from other authors. Target authors keep at least `samples_per_candidate`
/// articles for training.
struct TargetedSplit {
  TargetedScenario scenario;
  std::vector<Article> training;
};
TargetedSplit build_targeted(const std::vector<Article>& articles, std::size_t num_targets, std::size_t test_size,
                             std::size_t samples_per_candidate, std::uint64_t seed = kDefaultSeed);

struct OpenWorldScenario {
  std::vector<Article> test_set;
  std::size_t candidates_n = 20;
  std::vector<std::size_t> k_values{1, 3};
};

/// Holds out `per_author` articles of every author with more than that many
/// (chosen with `seed`); the rest is training data.
struct OpenWorldSplit {
  OpenWorldScenario scenario;
  std::vector<Article> training;
};
OpenWorldSplit build_open_world(const std::vector<Article>& articles, std::size_t per_author,
                                std::uint64_t seed = kDefaultSeed);

// ---- reports ----------------------------------------------------------------

struct EvalReport {
  std::string kind;  ///< "targeted" or "open_world"
  matching::Strategy strategy = matching::Strategy::SALA;
  nlohmann::json config;
  /// Metric name to value; nullopt is reported as NA (empty denominator).
  std::map<std::string, std::optional<double>> metrics;
  std::map<std::string, std::size_t> denominators;
  std::vector<nlohmann::json> per_article;
  std::size_t comparisons = 0;
  std::size_t repetitions = 1;

  nlohmann::json to_json() const;
};

/// Element-wise mean of metrics over repetitions; NA stays NA if any run is NA.
EvalReport average(const std::vector<EvalReport>& runs);

struct EvalOptions {
  std::size_t jobs = 1;
};

/// Matches every test article against every target. An article counts for
/// target t only when t has the highest likelihood among targets with a Same
/// verdict; a Same verdict for the wrong target is a false positive for that
/// target and a false negative for the true one. Throws UnknownTarget when a
/// target has no stored (DbAugmented) or fetched (ZeroShot) samples.
EvalReport run_targeted(const TargetedScenario& scenario, matching::Strategy strategy,
                        const pipeline::Pipeline& pipeline, const EvalOptions& options = {});

/// Assesses every article and records the true author's rank.
EvalReport run_open_world(const OpenWorldScenario& scenario, matching::Strategy strategy,
                          const pipeline::Pipeline& pipeline, const EvalOptions& options = {});

struct DefenseConfig {
  defense::DefenseMode mode = defense::DefenseMode::RuleBased;
  std::size_t k = 3;
  double utility_floor = defense::kDefaultUtilityFloor;
};

struct DefenseEvalReport {
  EvalReport pre;
  EvalReport post;
  std::optional<double> mean_utility;  ///< over accepted rewrites
  std::size_t rewritten = 0;
  std::size_t rejected = 0;  ///< rewrites under the floor; the original text is kept

  nlohmann::json to_json() const;
};

/// Rewrites every test article with the defense (planned against the
/// attacker's best candidate) and reruns the same evaluation.
DefenseEvalReport run_defense_eval(const TargetedScenario& scenario, matching::Strategy strategy,
                                   const pipeline::Pipeline& pipeline, const DefenseConfig& defense,
                                   const EvalOptions& options = {});
DefenseEvalReport run_defense_eval(const OpenWorldScenario& scenario, matching::Strategy strategy,
                                   const pipeline::Pipeline& pipeline, const DefenseConfig& defense,
                                   const EvalOptions& options = {});

/// Plain-text table with one row per report and one column per metric.
std::string format_table(const std::vector<EvalReport>& reports);

struct PlotPoint {
  std::string series;  ///< strategy name
  std::string x_name;  ///< "samples_per_candidate" or "candidates_n"
  std::size_t x = 0;
  std::string y_name;  ///< "f1" or "top3"
  std::optional<double> y;
};
/// "series,x_name,x,y_name,y" rows; NA for missing values.
std::string plot_csv(const std::vector<PlotPoint>& points);

// ---- datasets ---------------------------------------------------------------

enum class DatasetFormat { CSV, JSONL };

/// By extension: .csv is CSV, .jsonl / .ndjson / .json is JSONL.
DatasetFormat format_for(const std::filesystem::path& path);

struct LoadStats {
  std::size_t loaded = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

/// Streams articles to `sink`. CSV needs a header with id, title, author,
/// date, publication, topic and content (any order, extra columns ignored);
/// quoted fields may span lines. Rows without an id or content, and JSONL
/// lines that do not parse, are skipped and counted. Throws IoError when the
/// file cannot be read and HeaderMismatch on a bad CSV header.
LoadStats for_each_article(const std::filesystem::path& path, DatasetFormat format,
                           const std::function<void(Article&&)>& sink);
std::vector<Article> load_dataset(const std::filesystem::path& path, DatasetFormat format,
                                  LoadStats* stats = nullptr);

}  // namespace stylo::eval
