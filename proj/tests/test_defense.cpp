#include <doctest.h>

#include <algorithm>

#include "stylo/defense.hpp"
#include "support/corpus.hpp"
#include "support/scripted_provider.hpp"

using namespace stylo::defense;
using stylo::Article;
using stylo::Errc;
using stylo::matching::Strategy;
using stylo::pipeline::Mode;
using stylo::pipeline::Pipeline;
using stylo::pipeline::PipelineConfig;
using stylo::provider::StubProvider;
using stylo::stylometry::Feature;
using stylo::store::ProfileStore;

namespace {

stylo::pipeline::ReflectionReport report_of(std::vector<Feature> order) {
  stylo::pipeline::ReflectionReport r;
  r.author = "Ana";
  for (const auto f : order) {
    stylo::pipeline::ReflectedFeature rf;
    rf.feature = f;
    r.ranked.push_back(rf);
  }
  return r;
}

std::size_t numbered_lines(const std::string& prompt) {
  std::size_t n = 0;
  std::size_t start = 0;
  while (start < prompt.size()) {
    auto end = prompt.find('\n', start);
    if (end == std::string::npos) end = prompt.size();
    const auto line = prompt.substr(start, end - start);
    const auto dot = line.find(". ");
    if (dot != std::string::npos && dot > 0 &&
        std::all_of(line.begin(), line.begin() + static_cast<std::ptrdiff_t>(dot), ::isdigit)) {
      ++n;
    }
    start = end + 1;
  }
  return n;
}

struct Fixture {
  StubProvider stub;
  std::vector<Article> corpus = corpus::styled_corpus(6, 5, 21);
  std::vector<Article> train, held_out;
  ProfileStore store = ProfileStore::in_memory();

  Fixture() {
    for (const auto& a : corpus) (a.id.back() == '4' ? held_out : train).push_back(a);
    store.warm_up(train, stub);
  }

  PipelineConfig config(Strategy s = Strategy::SALA) const {
    PipelineConfig c;
    c.strategy = s;
    c.candidates_n = 6;
    c.samples_per_candidate = 3;
    return c;
  }
};

}  // namespace

TEST_CASE("defense mode names") {
  CHECK(defense_mode_from_string("guided") == DefenseMode::GuidedRecompose);
  CHECK(defense_mode_from_string("paraphrase") == DefenseMode::DirectParaphrase);
  CHECK(defense_mode_from_string("rules") == DefenseMode::RuleBased);
  CHECK(defense_mode_from_string("none") == DefenseMode::NoOp);
  CHECK(defense_mode_from_string("rule_based") == DefenseMode::RuleBased);
  for (const auto m : {DefenseMode::GuidedRecompose, DefenseMode::DirectParaphrase, DefenseMode::RuleBased,
                       DefenseMode::NoOp}) {
    CHECK(defense_mode_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(defense_mode_from_string("erase"), stylo::Error);
}

TEST_CASE("every numeric feature has a directive") {
  std::vector<std::string> seen;
  for (const auto f : stylo::stylometry::numeric_features()) {
    const auto& d = directive_for(f);
    CHECK_FALSE(d.empty());
    CHECK(std::find(seen.begin(), seen.end(), d) == seen.end());
    seen.push_back(d);
  }
}

TEST_CASE("suggestions follow the reflection order") {
  const auto report = report_of({Feature::FleschScore, Feature::HapaxRatio, Feature::PunctuationCount,
                                 Feature::AvgWordLength});
  const auto plan = build_suggestions(report, 2);
  REQUIRE(plan.suggestions.size() == 2);
  CHECK(plan.target_features == std::vector<Feature>{Feature::FleschScore, Feature::HapaxRatio});
  CHECK(plan.suggestions[0] == directive_for(Feature::FleschScore));
  CHECK(plan.suggestions[1] == directive_for(Feature::HapaxRatio));
  CHECK(plan.utility_floor == kDefaultUtilityFloor);

  CHECK(build_suggestions(report, 10).suggestions.size() == 4);

  const auto code = [](auto&& f) {
    try {
      f();
    } catch (const stylo::Error& e) {
      return e.code();
    }
    return Errc::IoError;
  };
  CHECK(code([&] { build_suggestions(report, 0); }) == Errc::InvalidArgument);
  CHECK(code([&] { build_suggestions(report_of({}), 3); }) == Errc::InvalidArgument);
  CHECK(code([&] { build_suggestions(report, 3, 1.5); }) == Errc::InvalidArgument);
  CHECK(code([&] { build_suggestions(report, 3, -0.1); }) == Errc::InvalidArgument);
}

TEST_CASE("recompose prompt carries the instruction and one line per suggestion") {
  for (std::size_t k = 1; k <= 5; ++k) {
    const auto plan = build_suggestions(
        report_of({Feature::FleschScore, Feature::HapaxRatio, Feature::PunctuationCount, Feature::AvgWordLength,
                   Feature::StopwordCount}),
        k);
    const auto prompt = build_recompose_prompt("The article text.", plan);
    CHECK(prompt.find("Rewrite this article, follow these suggestions closely.") != std::string::npos);
    CHECK(prompt.find("The article text.") != std::string::npos);
    CHECK(numbered_lines(prompt) == k);
    for (const auto& s : plan.suggestions) CHECK(prompt.find(s) != std::string::npos);
  }
  const auto paraphrase = build_paraphrase_prompt("Body here.");
  CHECK(paraphrase.find("Body here.") != std::string::npos);
  CHECK(paraphrase.find("follow these suggestions") == std::string::npos);
}

TEST_CASE("rule-based rewriting only moves away from the reference") {
  StubProvider stub;
  const std::string text =
      "The committee said the budget was very significant, and members argued for hours. "
      "It's a substantial change; the vote is expected next week. Officials didn't comment.";
  const auto profile = stylo::stylometry::compute_features(text);
  const auto reference = stylo::stylometry::ReferenceStats::from(profile);
  const auto start = stylo::stylometry::feature_distance(profile, reference).mean_z;

  RewritePlan plan;
  for (const auto f : stylo::stylometry::numeric_features()) plan.target_features.push_back(f);
  const auto r = rule_based_rewrite(text, plan, reference, stub);
  CHECK_FALSE(r.steps.empty());
  CHECK(r.mean_z > start);
  CHECK(r.utility >= plan.utility_floor);
  CHECK(r.text != text);
  CHECK(r.mean_z == doctest::Approx(
                        stylo::stylometry::feature_distance(stylo::stylometry::compute_features(r.text), reference)
                            .mean_z));

  RewritePlan none;
  none.target_features = {Feature::PosVariationCount};
  none.utility_floor = 1.0;
  const auto untouched = rule_based_rewrite(text, none, reference, stub);
  CHECK(untouched.text == text);
  CHECK(untouched.steps.empty());
}

TEST_CASE("rule-based defense lowers the matched likelihood and keeps utility") {
  Fixture fx;
  Pipeline pipeline(fx.config(), fx.stub, &fx.store);
  std::size_t lowered = 0;
  for (const auto& a : fx.held_out) {
    const auto run = defend(pipeline, a, DefenseMode::RuleBased);
    CHECK(run.before.top_k_authors(1)[0] == *a.author);
    CHECK(run.outcome.utility >= kDefaultUtilityFloor);
    CHECK(run.outcome.post.likelihood <= run.outcome.pre.likelihood);
    CHECK(run.outcome.post.author == run.outcome.pre.author);
    lowered += run.outcome.post.likelihood < run.outcome.pre.likelihood;
    CHECK(run.to_json()["outcome"]["steps_applied"].size() == run.outcome.steps_applied.size());
  }
  CHECK(lowered == fx.held_out.size());
}

TEST_CASE("no-op defense is the identity") {
  Fixture fx;
  Pipeline pipeline(fx.config(), fx.stub, &fx.store);
  const auto& a = fx.held_out.front();
  const auto run = defend(pipeline, a, DefenseMode::NoOp);
  CHECK(run.outcome.rewritten_text == a.body);
  CHECK(run.outcome.utility == 1.0);
  CHECK(run.outcome.pre.likelihood == run.outcome.post.likelihood);
  CHECK(run.before.to_json().dump() == run.after.to_json().dump());
  CHECK(run.outcome.suggestions_used.empty());
}

TEST_CASE("stub rewrites fall below the utility floor") {
  Fixture fx;
  Pipeline pipeline(fx.config(), fx.stub, &fx.store);
  const auto& a = fx.held_out.front();
  for (const auto mode : {DefenseMode::GuidedRecompose, DefenseMode::DirectParaphrase}) {
    try {
      defend(pipeline, a, mode);
      FAIL("expected UtilityBelowFloor");
    } catch (const UtilityBelowFloor& e) {
      CHECK(e.code() == Errc::UtilityBelowFloor);
      CHECK(e.utility() < kDefaultUtilityFloor);
      CHECK_FALSE(e.rewritten_text().empty());
    }
  }
}

TEST_CASE("provider rewrites are scored with the pipeline's matcher") {
  Fixture fx;
  testing::ScriptedProvider provider;
  const auto& a = fx.held_out.front();
  // A faithful echo keeps utility at 1 and the likelihood unchanged.
  provider.fallback = [&](const stylo::provider::ChatRequest& r) {
    const auto& prompt = r.messages.back().content;
    if (prompt.find("Rewrite this article") != std::string::npos) return a.body;
    if (prompt.find("topic") != std::string::npos) return std::string(R"({"topic_category": "unknown"})");
    return std::string("A rationale.");
  };
  auto config = fx.config(Strategy::ES);
  Pipeline pipeline(config, provider, &fx.store);
  const auto report = pipeline.assess(a);
  const auto& matched = report.candidates.candidates.front();
  const auto plan = build_suggestions(report.reflection, 3);
  const auto out = apply_defense(a.body, plan, DefenseMode::GuidedRecompose, pipeline, matched, report.candidates.mode);
  CHECK(out.utility == doctest::Approx(1.0));
  CHECK(out.post.likelihood == doctest::Approx(out.pre.likelihood));
  CHECK(out.suggestions_used == plan.suggestions);
  CHECK(provider.prompts.back().find("Rewrite this article, follow these suggestions closely.") != std::string::npos);
}
