#include <doctest.h>

#include <cmath>
#include <random>

#include "stylo/error.hpp"
#include "stylo/stylometry.hpp"
#include "support/feature_oracle.hpp"

using namespace stylo::stylometry;
using stylo::Errc;

TEST_CASE("worked example: two short sentences") {
  const auto p = compute_features("The cat sat. The cat ran.");
  CHECK(p.unique_word_count == 4);
  CHECK(p.avg_word_length == doctest::Approx(3.0));
  CHECK(p.type_token_ratio == doctest::Approx(4.0 / 6.0));
  CHECK(p.hapax_ratio == doctest::Approx(0.5));
  CHECK(p.avg_sentence_length == doctest::Approx(3.0));
  CHECK(p.stopword_count == 2);
  CHECK(p.punctuation_count == 2);
  CHECK(p.pos_variation_count == 3);
  CHECK(p.flesch_score == doctest::Approx(119.19).epsilon(1e-9));
  CHECK(p.polarity == 0.0);
  CHECK(p.subjectivity == 0.0);
  CHECK_FALSE(p.style_summary.empty());
}

TEST_CASE("single word") {
  const auto p = compute_features("cat");
  CHECK(p.unique_word_count == 1);
  CHECK(p.type_token_ratio == 1.0);
  CHECK(p.hapax_ratio == 1.0);
  CHECK(p.avg_sentence_length == 1.0);
}

TEST_CASE("empty text is rejected") {
  for (const char* text : {"", "   ", "... !!", "42"}) {
    try {
      compute_features(text);
      FAIL("expected EmptyText for '" << text << "'");
    } catch (const stylo::Error& e) {
      CHECK(e.code() == Errc::EmptyText);
    }
  }
}

TEST_CASE("lexicon semantics") {
  const auto p = compute_features("The excellent plan was a terrible failure.");
  // excellent 0.9, terrible -0.9, failure -0.6; all subjective, 7 words.
  CHECK(p.polarity == doctest::Approx((0.9 - 0.9 - 0.6) / 3.0));
  CHECK(p.subjectivity == doctest::Approx(3.0 / 7.0));
  CHECK(p.polarity >= -1.0);
  CHECK(p.polarity <= 1.0);
}

TEST_CASE("feature values match the brute-force oracle") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 100; ++i) {
    const auto text = oracle::random_text(rng, 5 + rng() % 196);
    const auto counts = oracle::count(text);
    if (counts.words == 0) continue;
    const auto expected = oracle::features(counts);
    const auto p = compute_features(text);
    for (std::size_t f = 0; f < kNumericFeatureCount; ++f) {
      INFO("feature " << feature_key(numeric_features()[f]) << " text: " << text);
      CHECK(std::abs(p.value(numeric_features()[f]) - expected[f]) <= 1e-9);
    }
    CHECK(p.type_token_ratio == doctest::Approx(p.unique_word_count / counts.words));
    CHECK(p.hapax_ratio >= 0.0);
    CHECK(p.hapax_ratio <= 1.0);
    CHECK(p.pos_variation_count <= 12);
  }
}

TEST_CASE("aggregate: population std") {
  StylometricProfile a, b;
  a.type_token_ratio = 0.4;
  b.type_token_ratio = 0.6;
  const std::vector<StylometricProfile> samples{a, b};
  const auto agg = aggregate(samples);
  CHECK(agg.sample_count() == 2);
  CHECK(agg.mean(Feature::TypeTokenRatio) == doctest::Approx(0.5));
  CHECK(agg.stddev(Feature::TypeTokenRatio) == doctest::Approx(0.1));
}

TEST_CASE("aggregate: single sample and identical copies") {
  const auto p = compute_features("The cat sat. The cat ran.");
  const std::vector<StylometricProfile> one{p};
  const auto single = aggregate(one);
  for (const auto f : scalar_features()) {
    CHECK(single.mean(f) == p.value(f));
    CHECK(single.stddev(f) == 0.0);
  }
  const std::vector<StylometricProfile> copies(5, p);
  const auto agg = aggregate(copies);
  for (const auto f : scalar_features()) {
    CHECK(agg.mean(f) == doctest::Approx(p.value(f)));
    CHECK(agg.stddev(f) == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK(agg.style_summary() == p.style_summary);
}

TEST_CASE("aggregate: empty list") {
  CHECK_THROWS_AS(aggregate(std::vector<StylometricProfile>{}), stylo::Error);
}

TEST_CASE("aggregate: incremental matches batch") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50.0, 150.0);
  for (int set = 0; set < 20; ++set) {
    std::vector<StylometricProfile> profiles(1 + rng() % 30);
    AggregatedProfile incremental;
    for (auto& p : profiles) {
      for (const auto f : scalar_features()) p.value(f) = u(rng);
      p.style_summary = "style " + std::to_string(rng() % 4);
      incremental.add(p);
    }
    const auto batch = aggregate(profiles);
    CHECK(batch.sample_count() == incremental.sample_count());
    CHECK(batch.style_summary() == incremental.style_summary());
    for (const auto f : scalar_features()) {
      CHECK(std::abs(batch.mean(f) - incremental.mean(f)) <= 1e-9);
      CHECK(std::abs(batch.stddev(f) - incremental.stddev(f)) <= 1e-9);
    }
  }
}

TEST_CASE("style summaries merge distinct entries up to the cap") {
  AggregatedProfile agg;
  StylometricProfile p;
  for (int i = 0; i < 200; ++i) {
    p.style_summary = "summary number " + std::to_string(i % 50);
    agg.add(p);
  }
  CHECK(agg.style_summary().size() <= kStyleSummaryCap);
  CHECK(agg.style_summary().rfind("summary number 0 | summary number 1 |", 0) == 0);
}

TEST_CASE("aggregated profile json round trip") {
  AggregatedProfile agg;
  agg.add(compute_features("The cat sat. The cat ran."));
  agg.add(compute_features("A dog barked loudly at the moon, then slept."));
  const auto back = AggregatedProfile::from_json(nlohmann::json::parse(agg.to_json().dump()));
  CHECK(back == agg);
}

TEST_CASE("feature_distance") {
  SUBCASE("identity") {
    const auto p = compute_features("The cat sat. The cat ran.");
    AggregatedProfile agg;
    agg.add(p);
    const auto d = feature_distance(p, agg);
    CHECK(d.mean_z == 0.0);
    for (const double z : d.z) CHECK(z == 0.0);
  }
  SUBCASE("direct formula") {
    StylometricProfile a, b, x;
    a.type_token_ratio = 0.4;
    b.type_token_ratio = 0.6;
    x.type_token_ratio = 0.6;
    const std::vector<StylometricProfile> samples{a, b};
    const auto d = feature_distance(x, aggregate(samples));
    CHECK(d.z[2] == doctest::Approx(1.0));
    CHECK(d.mean_z == doctest::Approx(1.0 / 9.0));
  }
  SUBCASE("zero std uses the epsilon floor") {
    StylometricProfile p;
    p.type_token_ratio = 0.5;
    AggregatedProfile agg;
    agg.add(p);
    CHECK(feature_distance(p, agg).z[2] == 0.0);
    StylometricProfile q = p;
    q.type_token_ratio = 0.5 + 1e-6;
    CHECK(feature_distance(q, agg).z[2] == doctest::Approx(1.0));
  }
  SUBCASE("surrogate spread for single profiles") {
    StylometricProfile ref;
    ref.avg_sentence_length = 10.0;
    StylometricProfile x = ref;
    x.avg_sentence_length = 12.0;
    const auto d = feature_distance(x, ReferenceStats::from(ref));
    CHECK(d.z[4] == doctest::Approx(1.0));  // |12-10| / (0.2*10)
  }
}

TEST_CASE("describe_features rendering") {
  const auto p = compute_features("The cat sat. The cat ran.");
  const auto a = describe_features(p, "Article A");
  CHECK(a.find("Article A: unique word count = 4\n") != std::string::npos);
  CHECK(a.find("Article A: average word length = 3.0000\n") != std::string::npos);
  CHECK(a.find("Article A: Flesch reading ease = 119.1900\n") != std::string::npos);
  CHECK(a == describe_features(p, "Article A"));

  auto b = describe_features(p, "Article B");
  std::string replaced = a;
  for (auto pos = replaced.find("Article A"); pos != std::string::npos; pos = replaced.find("Article A", pos)) {
    replaced.replace(pos, 9, "Article B");
  }
  CHECK(replaced == b);

  AggregatedProfile agg;
  agg.add(p);
  agg.add(compute_features("The dog sat. The dog ran away."));
  const auto aggregated = describe_features(agg, "Author");
  CHECK(aggregated.find("Author: type-token ratio = ") != std::string::npos);
  CHECK(aggregated.find(" \xC2\xB1 ") != std::string::npos);
}

TEST_CASE("format_fixed never prints negative zero") {
  CHECK(format_fixed(-0.00001) == "0.0000");
  CHECK(format_fixed(-1.5, 1) == "-1.5");
  CHECK(format_fixed(2.0, 0) == "2");
}
