#include <doctest.h>

#include <cmath>

#include "stylo/error.hpp"
#include "stylo/matching.hpp"
#include "support/scripted_provider.hpp"

using namespace stylo::matching;
using stylo::Errc;
using stylo::provider::Embedding;
using stylo::provider::StubProvider;
using stylo::stylometry::AggregatedProfile;
using stylo::stylometry::compute_features;
using stylo::stylometry::StylometricProfile;

namespace {

const std::string kArticle = "The council voted late on Tuesday. Critics called the plan rushed, costly and vague.";
const std::string kOther = "Rain fell. Roads flooded. Nobody moved for hours, and the town went quiet.";

}  // namespace

TEST_CASE("ES likelihood from cosine") {
  const Embedding x{{1.0, 0.0}}, y{{0.0, 1.0}};
  CHECK(match_es(x, x).likelihood == doctest::Approx(1.0));
  CHECK(match_es(x, x).verdict == Verdict::Same);
  const auto orth = match_es(x, y);
  CHECK(*orth.evidence.cosine == doctest::Approx(0.0));
  CHECK(orth.likelihood == doctest::Approx(0.5));
  const Embedding diag{{1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}};
  const auto r = match_es(diag, x);
  CHECK(*r.evidence.cosine == doctest::Approx(0.70710678).epsilon(1e-6));
  CHECK(r.likelihood == doctest::Approx(0.85355339).epsilon(1e-6));
  CHECK(match_es(x, Embedding{{-1.0, 0.0}}).likelihood == doctest::Approx(0.0));
  try {
    match_es(x, Embedding{{1.0, 0.0, 0.0}});
    FAIL("expected DimMismatch");
  } catch (const stylo::Error& e) {
    CHECK(e.code() == Errc::DimMismatch);
  }
}

TEST_CASE("ES likelihood is monotone in cosine") {
  double last = -1.0;
  for (int i = 0; i <= 100; ++i) {
    const double angle = M_PI * (100 - i) / 100.0;
    const auto r = match_es(Embedding{{std::cos(angle), std::sin(angle)}}, Embedding{{1.0, 0.0}});
    CHECK(r.likelihood >= last);
    CHECK(r.likelihood >= 0.0);
    CHECK(r.likelihood <= 1.0);
    last = r.likelihood;
  }
}

TEST_CASE("verdict mapping") {
  CHECK(verdict_for(0.5, 0.5) == Verdict::Same);
  CHECK(verdict_for(0.49, 0.5, Verdict::Same) == Verdict::Different);
  CHECK(verdict_for(0.49, 0.5, Verdict::Uncertain) == Verdict::Uncertain);
  CHECK(verdict_for(0.9, 0.5, Verdict::Different) == Verdict::Same);
}

TEST_CASE("reply parser") {
  using nlohmann::json;
  const auto ok = parse_reply(json::parse(R"({"likelihood": 0.9, "verdict": "Same", "key_features": ["ttr"], "extra": 1})"));
  CHECK(ok.likelihood == 0.9);
  CHECK(ok.verdict == Verdict::Same);
  CHECK(ok.key_features == std::vector<std::string>{"ttr"});
  CHECK(parse_reply(json::parse(R"({"likelihood": 0})")).likelihood == 0.0);
  for (const char* bad : {R"({"verdict": "same"})", R"({"likelihood": "0.5"})", R"({"likelihood": 1.5})",
                          R"({"likelihood": 0.5, "verdict": "maybe"})", R"([0.5])",
                          R"({"likelihood": 0.5, "key_features": "ttr"})"}) {
    CHECK_THROWS_AS(parse_reply(json::parse(bad)), stylo::Error);
  }
}

TEST_CASE("SALA prompt") {
  const auto a = compute_features(kArticle);
  const auto b = compute_features(kOther);
  const auto da = stylo::stylometry::describe_features(a, "Article A");
  const auto db = stylo::stylometry::describe_features(b, "Article B");
  const auto prompt = build_sala_prompt(da, db);
  CHECK(prompt.find(da) != std::string::npos);
  CHECK(prompt.find(db) != std::string::npos);
  CHECK(prompt.find("\"likelihood\"") != std::string::npos);
  CHECK(prompt == build_sala_prompt(da, db));

  AggregatedProfile agg;
  agg.add(a);
  agg.add(b);
  const auto aggregated = build_sala_prompt(da, stylo::stylometry::describe_features(agg, "Article B"));
  CHECK(aggregated.find("Article B: type-token ratio = ") != std::string::npos);
  CHECK(aggregated.find(" \xC2\xB1 ") != std::string::npos);
}

TEST_CASE("SALA offline shim") {
  StubProvider stub;
  const auto a = compute_features(kArticle);
  SUBCASE("identity") {
    AggregatedProfile agg;
    agg.add(a);
    agg.add(a);
    const auto r = match_sala(a, Reference(agg), stub);
    CHECK(r.likelihood == 1.0);
    CHECK(r.verdict == Verdict::Same);
    CHECK(r.evidence.distance->mean_z == 0.0);
    CHECK(r.evidence.key_features.size() == 3);
  }
  SUBCASE("mean z of one") {
    // Shift one feature by 9 spreads: mean z over nine features is 1.
    StylometricProfile ref = a;
    StylometricProfile x = a;
    x.avg_sentence_length = ref.avg_sentence_length * (1.0 + 9 * 0.2);
    const auto r = match_sala(x, Reference(ref), stub);
    CHECK(r.evidence.distance->mean_z == doctest::Approx(1.0));
    CHECK(r.likelihood == doctest::Approx(0.3679).epsilon(1e-4));
    CHECK(r.verdict == Verdict::Different);
  }
  SUBCASE("strictly decreasing in mean z") {
    double last = 2.0;
    for (int k = 0; k < 20; ++k) {
      StylometricProfile x = a;
      x.avg_word_length = a.avg_word_length * (1.0 + 0.05 * k);
      const auto r = match_sala(x, Reference(a), stub);
      CHECK(r.likelihood < last);
      last = r.likelihood;
    }
  }
  SUBCASE("deterministic") {
    const auto b = compute_features(kOther);
    CHECK(to_json(match_sala(a, Reference(b), stub)).dump() == to_json(match_sala(a, Reference(b), stub)).dump());
  }
  CHECK(stub.counters().chat == 0);
}

TEST_CASE("SALA online parses the provider reply") {
  testing::ScriptedProvider provider;
  provider.replies = {R"(Sure. {"likelihood": 0.9, "verdict": "same", "key_features": ["punctuation_count"]})"};
  const auto a = compute_features(kArticle);
  const auto r = match_sala(a, Reference(compute_features(kOther)), provider);
  CHECK(r.likelihood == 0.9);
  CHECK(r.verdict == Verdict::Same);
  CHECK(r.evidence.key_features == std::vector<std::string>{"punctuation_count"});
  REQUIRE(r.evidence.distance.has_value());
  CHECK(r.evidence.distance->mean_z > 0.0);
  REQUIRE(provider.prompts.size() == 1);
  CHECK(provider.prompts[0].find("Article A: unique word count = ") != std::string::npos);
}

TEST_CASE("SALA online parse failure after retry scores zero") {
  testing::ScriptedProvider provider;
  const auto r = match_sala(compute_features(kArticle), Reference(compute_features(kOther)), provider);
  CHECK(r.likelihood == 0.0);
  CHECK(r.evidence.flagged);
  CHECK(r.evidence.failed_comparisons == 1);
  CHECK(provider.counters().chat == 2);
}

TEST_CASE("LDA averages reference likelihoods") {
  testing::ScriptedProvider provider;
  provider.replies = {R"({"likelihood": 0.8, "verdict": "same"})", R"({"likelihood": 0.6})"};
  const std::vector<std::string> refs{kOther, kArticle};
  const auto r = match_lda(kArticle, refs, provider);
  CHECK(r.likelihood == doctest::Approx(0.7));
  CHECK(r.comparisons_made == 2);
  CHECK(r.verdict == Verdict::Same);
  CHECK_FALSE(r.evidence.flagged);
  CHECK(provider.prompts[0].find(kOther) != std::string::npos);
}

TEST_CASE("LDA failures") {
  testing::ScriptedProvider provider;
  const std::vector<std::string> refs{kOther, kArticle};
  SUBCASE("all fail") {
    const auto r = match_lda(kArticle, refs, provider);
    CHECK(r.likelihood == 0.0);
    CHECK(r.evidence.flagged);
    CHECK(r.evidence.failed_comparisons == 2);
    CHECK(r.verdict == Verdict::Different);
  }
  SUBCASE("one fails after its retry") {
    provider.replies = {R"({"likelihood": 0.8})", "garbage", "still garbage"};
    const auto r = match_lda(kArticle, refs, provider);
    CHECK(r.likelihood == doctest::Approx(0.4));
    CHECK(r.evidence.failed_comparisons == 1);
    CHECK_FALSE(r.evidence.flagged);
  }
  SUBCASE("no references") {
    CHECK_THROWS_AS(match_lda(kArticle, std::span<const std::string>{}, provider), stylo::Error);
  }
}

TEST_CASE("LDA offline shim stays in range and is deterministic") {
  StubProvider stub;
  const std::vector<std::string> refs{kOther, kArticle, "Short one. Another short one here."};
  const auto r = match_lda(kArticle, refs, stub);
  CHECK(r.likelihood >= 0.0);
  CHECK(r.likelihood <= 1.0);
  CHECK(r.comparisons_made == 3);
  CHECK(to_json(r).dump() == to_json(match_lda(kArticle, refs, stub)).dump());
  for (const auto& ref : refs) {
    const double l = lda_shim_likelihood(kArticle, ref);
    CHECK(l >= 0.0);
    CHECK(l <= 1.0);
  }
}

TEST_CASE("Matcher picks references from the target") {
  StubProvider stub;
  const auto subject = prepare_subject(kArticle, stub);
  MatchTarget target;
  target.author = "Ana";
  target.sample_texts = {kArticle};

  const auto sala = Matcher(Strategy::SALA, stub).match(subject, target);
  CHECK(sala.author == "Ana");
  CHECK(sala.likelihood == 1.0);

  const auto es = Matcher(Strategy::ES, stub).match(subject, target);
  CHECK(es.likelihood == doctest::Approx(1.0));

  const auto lda = Matcher(Strategy::LDA, stub).match(subject, target);
  CHECK(lda.comparisons_made == 1);

  MatchTarget empty;
  empty.author = "Nobody";
  for (const auto s : {Strategy::ES, Strategy::LDA, Strategy::SALA}) {
    CHECK_THROWS_AS(Matcher(s, stub).match(subject, empty), stylo::Error);
  }
  CHECK(strategy_from_string("sala") == Strategy::SALA);
  CHECK_THROWS_AS(strategy_from_string("knn"), stylo::Error);
}
