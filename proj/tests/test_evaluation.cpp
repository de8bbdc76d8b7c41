#include <doctest.h>

#include <cmath>
#include <fstream>

#include "stylo/evaluation.hpp"
#include "support/corpus.hpp"
#include "support/metric_oracle.hpp"
#include "support/temp_dir.hpp"

using namespace stylo::eval;
using stylo::Article;
using stylo::Errc;
using stylo::matching::Strategy;
using stylo::pipeline::Mode;
using stylo::pipeline::Pipeline;
using stylo::pipeline::PipelineConfig;
using stylo::provider::StubProvider;
using stylo::store::ProfileStore;
namespace fs = std::filesystem;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const stylo::Error& e) {
    return e.code();
  }
  FAIL("expected stylo::Error");
  return Errc::InvalidArgument;
}

PipelineConfig config(std::size_t n = 6, std::size_t samples = 3) {
  PipelineConfig c;
  c.mode = Mode::DbAugmented;
  c.candidates_n = n;
  c.samples_per_candidate = samples;
  return c;
}

void write(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

struct TargetedFixture {
  StubProvider stub;
  std::vector<Article> corpus = corpus::styled_corpus(6, 8, 5);
  TargetedSplit split = build_targeted(corpus, 1, 10, 3, 42);
  ProfileStore store = ProfileStore::in_memory();

  TargetedFixture() { store.warm_up(split.training, stub); }
};

}  // namespace

TEST_CASE("f1 conventions and worked values") {
  CHECK(f1(2, 0, 0) == 1.0);
  CHECK(f1(1, 1, 1) == 0.5);
  CHECK(f1(0, 3, 0) == 0.0);
  CHECK(f1(0, 0, 2) == 0.0);
  CHECK(f1(0, 0, 0) == 1.0);
  CHECK(f1(3, 1, 0) == doctest::Approx(6.0 / 7.0));
}

TEST_CASE("metrics agree with a brute-force oracle on random tables") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto table = oracle::random_table(rng);
    const auto confusion = tally_targets(table.targets, table.truths, table.predicted);
    REQUIRE(confusion.size() == table.targets.size());
    double sum = 0.0;
    for (std::size_t t = 0; t < table.targets.size(); ++t) {
      const auto expected = oracle::counts_for(table.targets[t], table.truths, table.predicted);
      CHECK(confusion[t].tp == expected.tp);
      CHECK(confusion[t].fp == expected.fp);
      CHECK(confusion[t].fn == expected.fn);
      CHECK(confusion[t].tp + confusion[t].fp + confusion[t].fn + confusion[t].tn == table.truths.size());
      const auto o = oracle::f1(expected.tp, expected.fp, expected.fn);
      CHECK(confusion[t].f1() == o);
      sum += o;
    }
    CHECK(macro_f1(confusion) == sum / static_cast<double>(table.targets.size()));

    std::vector<std::size_t> ranks(rng() % 40);
    for (auto& r : ranks) r = rng() % 8;
    for (std::size_t k = 1; k <= 5; ++k) {
      CHECK(top_k_rate(ranks, k) == oracle::top_k(ranks, k));
      CHECK(top_k_rate(ranks, k + 1) >= top_k_rate(ranks, k));
    }
  }
}

TEST_CASE("a wrong-target verdict costs both targets") {
  const std::vector<std::string> targets{"A", "B"};
  const auto c = tally_targets(targets, {"A", "B", "C"}, {std::string("B"), std::string("B"), std::nullopt});
  CHECK(c[0] == Confusion{0, 0, 1, 2});
  CHECK(c[1] == Confusion{1, 1, 0, 1});
  CHECK(code_of([&] { tally_targets(targets, {"A"}, {}); }) == Errc::DimMismatch);
  CHECK(code_of([] { macro_f1({}); }) == Errc::EmptyList);
}

TEST_CASE("targeted test sets are half non-target") {
  const auto articles = corpus::disjoint_corpus(8, 10, 3);
  for (std::size_t size = 2; size <= 21; ++size) {
    const auto split = build_targeted(articles, 2, size, 4, 42);
    const auto& set = split.scenario.test_set;
    REQUIRE(set.size() == size);
    const auto targets = std::count_if(set.begin(), set.end(), [](const TargetedCase& c) { return c.is_target; });
    CHECK(static_cast<std::size_t>(targets) == size / 2);
    for (const auto& c : set) {
      const bool in_targets = std::find(split.scenario.targets.begin(), split.scenario.targets.end(),
                                        c.true_author) != split.scenario.targets.end();
      CHECK(c.is_target == in_targets);
      CHECK(std::none_of(split.training.begin(), split.training.end(),
                         [&](const Article& a) { return a.id == c.article.id; }));
    }
    CHECK(split.training.size() + set.size() == articles.size());
    for (const auto& t : split.scenario.targets) {
      CHECK(std::count_if(split.training.begin(), split.training.end(),
                          [&](const Article& a) { return *a.author == t; }) >= 4);
    }
  }
  const auto a = build_targeted(articles, 2, 12, 4, 1);
  const auto b = build_targeted(articles, 2, 12, 4, 1);
  CHECK(a.scenario.targets == b.scenario.targets);
  for (std::size_t i = 0; i < 12; ++i) CHECK(a.scenario.test_set[i].article.id == b.scenario.test_set[i].article.id);
  CHECK(code_of([&] { build_targeted(articles, 0, 10, 4); }) == Errc::InvalidArgument);
  CHECK(code_of([&] { build_targeted(articles, 9, 10, 4); }) == Errc::InvalidArgument);
  CHECK(code_of([&] { build_targeted(articles, 1, 200, 4); }) == Errc::InvalidArgument);
}

TEST_CASE("targeted SALA is perfect on a separable corpus") {
  TargetedFixture fx;
  Pipeline pipeline(config(), fx.stub, &fx.store);
  const auto& scenario = fx.split.scenario;
  const auto report = run_targeted(scenario, Strategy::SALA, pipeline);
  CHECK(report.kind == "targeted");
  CHECK(*report.metrics.at("f1") == 1.0);
  CHECK(report.denominators.at("articles") == 10);
  CHECK(report.denominators.at("target_articles") == 5);
  CHECK(report.comparisons == 10);

  // Brute force: exp(-mean z) against the target's first three training articles.
  const auto& target = scenario.targets[0];
  stylo::stylometry::AggregatedProfile profile;
  std::size_t taken = 0;
  for (const auto& a : fx.split.training) {
    if (*a.author == target && taken < 3) {
      profile.add(stylo::stylometry::compute_features(a.body));
      ++taken;
    }
  }
  for (std::size_t i = 0; i < scenario.test_set.size(); ++i) {
    const auto& c = scenario.test_set[i];
    const auto z = stylo::stylometry::feature_distance(stylo::stylometry::compute_features(c.article.body), profile);
    const bool same = std::exp(-z.mean_z) >= 0.5;
    const auto& predicted = report.per_article[i]["predicted"];
    CHECK(same == c.is_target);
    CHECK(predicted.is_null() == !same);
  }

  const auto es = run_targeted(scenario, Strategy::ES, pipeline);
  const auto lda = run_targeted(scenario, Strategy::LDA, pipeline);
  CHECK(*es.metrics.at("f1") < 1.0);
  CHECK(*lda.metrics.at("f1") < 1.0);
}

TEST_CASE("unknown targets are rejected") {
  TargetedFixture fx;
  Pipeline pipeline(config(), fx.stub, &fx.store);
  auto scenario = fx.split.scenario;
  scenario.targets = {"Nobody"};
  CHECK(code_of([&] { run_targeted(scenario, Strategy::SALA, pipeline); }) == Errc::UnknownTarget);
  auto zs = config();
  zs.mode = Mode::ZeroShot;
  Pipeline zero_shot(zs, fx.stub, &fx.store);
  CHECK(code_of([&] { run_targeted(fx.split.scenario, Strategy::SALA, zero_shot); }) == Errc::UnknownTarget);
}

TEST_CASE("open world: ranks, coverage and linear cost") {
  StubProvider stub;
  const auto split = build_open_world(corpus::styled_corpus(6, 5, 8), 1, 42);
  REQUIRE(split.scenario.test_set.size() == 6);
  auto store = ProfileStore::in_memory();
  store.warm_up(split.training, stub);
  Pipeline pipeline(config(), stub, &store);

  auto scenario = split.scenario;
  scenario.candidates_n = 6;
  const auto report = run_open_world(scenario, Strategy::SALA, pipeline);
  CHECK(*report.metrics.at("top1") == 1.0);
  CHECK(*report.metrics.at("top3") == 1.0);
  CHECK(*report.metrics.at("top1_filtered") == 1.0);
  CHECK(*report.metrics.at("coverage") == 1.0);
  for (const auto& rec : report.per_article) CHECK(rec["rank"] == 1);

  for (const std::size_t n : {3, 4, 6}) {
    scenario.candidates_n = n;
    const auto r = run_open_world(scenario, Strategy::SALA, pipeline);
    CHECK(r.comparisons == n * scenario.test_set.size());
    CHECK(*r.metrics.at("top3") >= *r.metrics.at("top1"));
  }
  scenario.candidates_n = 2;
  CHECK(code_of([&] { run_open_world(scenario, Strategy::SALA, pipeline); }) == Errc::InvalidArgument);
}

TEST_CASE("open world with no correct candidate reports NA filtered rates") {
  StubProvider stub;
  const auto articles = corpus::styled_corpus(6, 3, 8);
  std::vector<Article> known, unknown;
  for (const auto& a : articles) (a.id[1] < '3' ? known : unknown).push_back(a);
  auto store = ProfileStore::in_memory();
  store.warm_up(known, stub);
  Pipeline pipeline(config(3), stub, &store);
  OpenWorldScenario scenario;
  scenario.test_set = unknown;
  scenario.candidates_n = 3;
  const auto report = run_open_world(scenario, Strategy::SALA, pipeline);
  CHECK(*report.metrics.at("top1") == 0.0);
  CHECK(*report.metrics.at("top3") == 0.0);
  CHECK_FALSE(report.metrics.at("top1_filtered").has_value());
  CHECK_FALSE(report.metrics.at("top3_filtered").has_value());
  CHECK(*report.metrics.at("coverage") == 0.0);
  CHECK(report.to_json()["metrics"]["top1_filtered"].is_null());
  CHECK(format_table({report}).find("NA") != std::string::npos);
}

TEST_CASE("rule-based defense lowers targeted F1; no-op changes nothing") {
  TargetedFixture fx;
  Pipeline pipeline(config(), fx.stub, &fx.store);
  const auto rules = run_defense_eval(fx.split.scenario, Strategy::SALA, pipeline, {});
  CHECK(*rules.pre.metrics.at("f1") == 1.0);
  CHECK(*rules.post.metrics.at("f1") < *rules.pre.metrics.at("f1"));
  REQUIRE(rules.mean_utility.has_value());
  CHECK(*rules.mean_utility >= stylo::defense::kDefaultUtilityFloor);
  CHECK(rules.rewritten + rules.rejected == fx.split.scenario.test_set.size());

  DefenseConfig none;
  none.mode = stylo::defense::DefenseMode::NoOp;
  const auto noop = run_defense_eval(fx.split.scenario, Strategy::SALA, pipeline, none);
  CHECK(noop.pre.to_json().dump() == noop.post.to_json().dump());
  CHECK(*noop.mean_utility == 1.0);
}

TEST_CASE("reports are reproducible and independent of job count") {
  TargetedFixture fx;
  Pipeline pipeline(config(), fx.stub, &fx.store);
  const auto one = run_targeted(fx.split.scenario, Strategy::SALA, pipeline).to_json().dump();
  CHECK(run_targeted(fx.split.scenario, Strategy::SALA, pipeline).to_json().dump() == one);
  CHECK(run_targeted(fx.split.scenario, Strategy::SALA, pipeline, {4}).to_json().dump() == one);

  const auto split = build_open_world(fx.corpus, 1, 42);
  auto scenario = split.scenario;
  scenario.candidates_n = 6;
  const auto ow = run_open_world(scenario, Strategy::LDA, pipeline, {1}).to_json().dump();
  CHECK(run_open_world(scenario, Strategy::LDA, pipeline, {3}).to_json().dump() == ow);
}

TEST_CASE("averaging repetitions") {
  EvalReport a, b;
  a.kind = b.kind = "open_world";
  a.metrics = {{"top1", 0.5}, {"top1_filtered", std::nullopt}};
  b.metrics = {{"top1", 1.0}, {"top1_filtered", 1.0}};
  a.denominators = {{"articles", 4}};
  b.denominators = {{"articles", 6}};
  const auto m = average({a, b});
  CHECK(m.repetitions == 2);
  CHECK(*m.metrics.at("top1") == 0.75);
  CHECK_FALSE(m.metrics.at("top1_filtered").has_value());
  CHECK(m.denominators.at("articles") == 10);
  CHECK(code_of([] { average({}); }) == Errc::EmptyList);
}

TEST_CASE("table and plot rendering") {
  EvalReport r;
  r.kind = "targeted";
  r.strategy = Strategy::SALA;
  r.metrics = {{"f1", 0.8271}};
  r.denominators = {{"articles", 20}};
  const auto table = format_table({r});
  CHECK(table.find("SALA") != std::string::npos);
  CHECK(table.find("0.827") != std::string::npos);
  CHECK(table.find("f1") != std::string::npos);

  const auto csv = plot_csv({{"SALA", "samples_per_candidate", 5, "f1", 1.0}, {"ES", "candidates_n", 20, "top3", {}}});
  CHECK(csv ==
        "series,x_name,x,y_name,y\n"
        "SALA,samples_per_candidate,5,f1,1.000000\n"
        "ES,candidates_n,20,top3,NA\n");
}

TEST_CASE("csv datasets") {
  testing::TempDir dir;
  fs::create_directories(dir.path);
  const auto header = "id,title,author,date,publication,topic,content\n";

  const auto good = dir.path / "good.csv";
  write(good, std::string(header) +
                  "1,First,Ana Diaz,2020-01-02,Daily,politics,The senate met.\n"
                  "2,\"Second, with comma\",Ben Ode,,Daily,economy,\"Line one.\nLine \"\"two\"\".\"\r\n"
                  "3,Third,,,,,Anonymous text.\n");
  LoadStats stats;
  const auto articles = load_dataset(good, format_for(good), &stats);
  REQUIRE(articles.size() == 3);
  CHECK(stats.loaded == 3);
  CHECK(stats.skipped == 0);
  CHECK(articles[1].title == "Second, with comma");
  CHECK(articles[1].body == "Line one.\nLine \"two\".");
  CHECK_FALSE(articles[1].date.has_value());
  CHECK(*articles[0].topic == "politics");
  CHECK_FALSE(articles[2].author.has_value());

  const auto missing_body = dir.path / "missing.csv";
  write(missing_body, std::string(header) + "1,a,b,,,,Body.\n2,a,b,,,,\n3,a,b,,,\n");
  LoadStats s2;
  CHECK(load_dataset(missing_body, DatasetFormat::CSV, &s2).size() == 1);
  CHECK(s2.skipped == 2);
  CHECK(s2.warnings.size() == 2);

  const auto reordered = dir.path / "reordered.csv";
  write(reordered, "content,extra,topic,publication,date,author,title,id\nBody text.,x,t,p,,Ana,T,9\n");
  const auto r = load_dataset(reordered, DatasetFormat::CSV);
  REQUIRE(r.size() == 1);
  CHECK(r[0].id == "9");
  CHECK(r[0].body == "Body text.");

  const auto bad = dir.path / "bad.csv";
  write(bad, "id,title,text\n1,a,b\n");
  CHECK(code_of([&] { load_dataset(bad, DatasetFormat::CSV); }) == Errc::HeaderMismatch);
  CHECK(code_of([&] { load_dataset(dir.path / "absent.csv", DatasetFormat::CSV); }) == Errc::IoError);
  CHECK(code_of([&] { format_for("data.txt"); }) == Errc::InvalidArgument);
}

TEST_CASE("jsonl datasets") {
  testing::TempDir dir;
  fs::create_directories(dir.path);
  const auto path = dir.path / "a.jsonl";
  write(path,
        R"({"id": "1", "title": "T", "author": "Ana", "content": "Body one."})" "\n"
        "\n"
        "{not json}\n"
        R"({"id": "2", "body": "Body two."})" "\n"
        R"({"title": "no id", "body": "x"})" "\n");
  LoadStats stats;
  std::vector<std::string> ids;
  stats = for_each_article(path, format_for(path), [&](Article&& a) { ids.push_back(a.id); });
  CHECK(ids == std::vector<std::string>{"1", "2"});
  CHECK(stats.loaded == 2);
  CHECK(stats.skipped == 2);
}
