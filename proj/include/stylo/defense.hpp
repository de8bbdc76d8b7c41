#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stylo/error.hpp"
#include "stylo/pipeline.hpp"

// Anonymization: turn a reflection report into rewrite suggestions and apply
// them, with a provider (guided recompose or plain paraphrase) or with
// deterministic rules, checking that the meaning survives.
namespace stylo::defense {

enum class DefenseMode { GuidedRecompose, DirectParaphrase, RuleBased, NoOp };

std::string_view to_string(DefenseMode m);
/// "guided" | "paraphrase" | "rules" | "none" (and the enum spellings).
DefenseMode defense_mode_from_string(std::string_view s);

inline constexpr double kDefaultUtilityFloor = 0.85;

struct RewritePlan {
  std::vector<std::string> suggestions;
  std::vector<stylometry::Feature> target_features;
  double utility_floor = kDefaultUtilityFloor;
};

/// Directives of the k most identifying features, in rank order. Throws
/// InvalidArgument when k is 0, the report is empty or the floor is outside [0, 1].
RewritePlan build_suggestions(const pipeline::ReflectionReport& report, std::size_t k,
                              double utility_floor = kDefaultUtilityFloor);

/// The directive text for one feature.
const std::string& directive_for(stylometry::Feature f);

std::string build_recompose_prompt(std::string_view article_text, const RewritePlan& plan);
std::string build_paraphrase_prompt(std::string_view article_text);

struct DefenseOutcome {
  DefenseMode mode = DefenseMode::NoOp;
  std::string rewritten_text;
  double utility = 1.0;  ///< cosine of original and rewritten embeddings
  double utility_floor = kDefaultUtilityFloor;
  matching::MatchResult pre;   ///< against the matched author, before rewriting
  matching::MatchResult post;  ///< same matcher, after rewriting
  std::vector<std::string> suggestions_used;
  std::vector<std::string> steps_applied;  ///< rule-based edits that were kept

  nlohmann::json to_json(bool include_text = true) const;
};

/// Thrown when a rewrite drifts too far from the original meaning.
class UtilityBelowFloor : public Error {
 public:
  UtilityBelowFloor(double utility, double floor, std::string rewritten);
  double utility() const { return utility_; }
  const std::string& rewritten_text() const { return rewritten_; }

 private:
  double utility_;
  std::string rewritten_;
};

/// Rewrites `article_text` and scores it against `matched` with the
/// pipeline's own matcher, so pre and post likelihoods are comparable.
DefenseOutcome apply_defense(std::string_view article_text, const RewritePlan& plan, DefenseMode mode,
                             const pipeline::Pipeline& pipeline, const pipeline::Candidate& matched,
                             pipeline::Mode candidate_mode);

/// Greedy rule-based rewriting: each edit family is tried in turn and kept
/// only when it raises the mean z-score against `reference` while the
/// embedding cosine to the original stays at or above the plan's floor.
struct RuleRewrite {
  std::string text;
  std::vector<std::string> steps;
  double mean_z = 0.0;
  double utility = 1.0;
};
RuleRewrite rule_based_rewrite(std::string_view article_text, const RewritePlan& plan,
                               const stylometry::ReferenceStats& reference, provider::Provider& provider);

/// Assess, plan, rewrite and assess again.
struct DefenseRun {
  pipeline::RiskReport before;
  RewritePlan plan;
  DefenseOutcome outcome;
  pipeline::RiskReport after;  ///< full pipeline on the rewritten article

  nlohmann::json to_json() const;
};
DefenseRun defend(const pipeline::Pipeline& pipeline, const Article& article, DefenseMode mode, std::size_t k = 3,
                  double utility_floor = kDefaultUtilityFloor);

}  // namespace stylo::defense
