#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "stylo/synthetic.hpp"
#include "support/temp_dir.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using stylo::cli::run;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
  json parsed() const { return json::parse(out); }
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

void write(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string csv_field(const std::string& s) {
  std::string out = "\"";
  for (const char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

/// `authors` x `per_author` disjoint-vocabulary articles as a CSV dataset.
fs::path write_csv(const fs::path& dir, std::size_t authors, std::size_t per_author) {
  std::string csv = "id,title,author,date,publication,topic,content\n";
  for (const auto& a : stylo::synthetic::disjoint_corpus(authors, per_author, 11)) {
    csv += a.id + "," + csv_field(a.title) + "," + csv_field(*a.author) + ",2021-05-04,Daily,news," +
           csv_field(a.body) + "\n";
  }
  const auto path = dir / "data.csv";
  write(path, csv);
  return path;
}

bool single_line(const std::string& s) { return !s.empty() && s.find('\n') == s.size() - 1; }

const fs::path kScenarios = fs::path(STYLO_SOURCE_DIR) / "scenarios";

}  // namespace

TEST_CASE("features: table, json and unreadable input") {
  testing::TempDir dir;
  fs::create_directories(dir.path);
  const auto text = dir.path / "a.txt";
  write(text, "The cat sat on the mat. It was happy, and it purred.");

  const auto table = cli({"features", text.string()});
  CHECK(table.code == 0);
  CHECK(table.out.find("type-token ratio") != std::string::npos);
  CHECK(table.out.find("Flesch reading ease") != std::string::npos);

  const auto j = cli({"--output", "json", "features", text.string()});
  CHECK(j.code == 0);
  CHECK(j.parsed().size() == 12);
  CHECK(j.parsed()["unique_word_count"] == 10.0);

  const auto missing = cli({"features", (dir.path / "nope.txt").string()});
  CHECK(missing.code == 2);
  CHECK(missing.out.empty());
  CHECK(single_line(missing.err));
}

TEST_CASE("usage errors exit 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"bogus"}).code == 2);
  CHECK(cli({"features"}).code == 2);
  CHECK(cli({"--output", "xml", "db-stats"}).code == 2);
  CHECK(cli({"--provider", "carrier-pigeon", "db-stats"}).code == 2);
  CHECK(cli({"--jobs", "0", "db-stats"}).code == 2);
  CHECK(cli({"db-stats"}).code == 2);  // no store
  CHECK(cli({"--help"}).code == 0);

  testing::TempDir dir;
  fs::create_directories(dir.path);
  const auto text = dir.path / "a.txt";
  write(text, "Some words here.");
  CHECK(cli({"assess", text.string(), "--strategy", "XYZ"}).code == 2);
  CHECK(cli({"assess", text.string(), "--candidates", "0"}).code == 2);
  const auto config = dir.path / "c.json";
  write(config, R"({"candidates_n": 5, "colour": "blue"})");
  const auto bad_config = cli({"--config", config.string(), "assess", text.string()});
  CHECK(bad_config.code == 2);
  CHECK(single_line(bad_config.err));
  write(config, "{not json");
  CHECK(cli({"--config", config.string(), "assess", text.string()}).code == 2);
  CHECK(cli({"assess", text.string(), "--store", (dir.path / "no-store").string()}).code == 2);
}

TEST_CASE("ingest then db-stats round trip") {
  testing::TempDir dir;
  fs::create_directories(dir.path);
  const auto data = write_csv(dir.path, 5, 2);
  const auto store = (dir.path / "store").string();

  const auto ingest = cli({"--output", "json", "--store", store, "ingest", data.string()});
  REQUIRE(ingest.code == 0);
  CHECK(ingest.parsed()["ingest"]["articles_added"] == 10);
  CHECK(ingest.parsed()["rows_skipped"] == 0);

  const auto stats = cli({"db-stats", "--store", store, "--output", "json"});
  REQUIRE(stats.code == 0);
  CHECK(stats.parsed()["article_count"] == 10);
  CHECK(stats.parsed()["author_count"] == 5);
  CHECK(stats.parsed()["authors"].size() == 5);

  const auto again = cli({"--output", "json", "--store", store, "ingest", data.string(), "--exclude-authors",
                          stylo::synthetic::author_name(0) + "," + stylo::synthetic::author_name(1)});
  CHECK(again.code == 0);
  CHECK(again.parsed()["ingest"]["articles_added"] == 0);
  CHECK(again.parsed()["ingest"]["excluded"] == 4);
  CHECK(again.parsed()["ingest"]["duplicates"] == 6);

  const auto bad = dir.path / "bad.csv";
  write(bad, "id,text\n1,hello\n");
  const auto mismatch = cli({"--store", store, "ingest", bad.string()});
  CHECK(mismatch.code == 2);
  CHECK(mismatch.err.find("HeaderMismatch") != std::string::npos);
  CHECK(cli({"--store", store, "ingest", (dir.path / "absent.csv").string()}).code == 2);
}

TEST_CASE("assess defaults to 20 candidates and honors --candidates") {
  testing::TempDir dir;
  fs::create_directories(dir.path);
  const auto data = write_csv(dir.path, 25, 2);
  const auto store = (dir.path / "store").string();
  REQUIRE(cli({"--store", store, "ingest", data.string()}).code == 0);

  const auto corpus = stylo::synthetic::disjoint_corpus(25, 3, 11);
  const auto article = dir.path / "query.json";
  json query{{"id", "q1"}, {"title", "Query"}, {"body", corpus[2].body}};
  write(article, query.dump());

  const auto r = cli({"--output", "json", "--store", store, "assess", article.string()});
  REQUIRE(r.code == 0);
  const auto j = r.parsed();
  CHECK(j["article_id"] == "q1");
  CHECK(j["candidates"].size() == 20);
  CHECK(j["comparisons"] == 20);
  CHECK_FALSE(j.contains("timings_us"));

  const auto small = cli({"--output", "json", "--store", store, "assess", article.string(), "--candidates", "7",
                          "--strategy", "ES", "--timings"});
  REQUIRE(small.code == 0);
  CHECK(small.parsed()["candidates"].size() == 7);
  CHECK(small.parsed()["strategy"] == "ES");
  CHECK(small.parsed()["top1"][0] == stylo::synthetic::author_name(0));
  CHECK(small.parsed().contains("timings_us"));

  const auto table = cli({"--store", store, "assess", article.string()});
  CHECK(table.code == 0);
  CHECK(table.out.find(stylo::synthetic::author_name(0)) != std::string::npos);
}

TEST_CASE("domain errors exit 1 with one stderr line") {
  testing::TempDir dir;
  fs::create_directories(dir.path);
  const auto text = dir.path / "a.txt";
  write(text, "Nothing in particular happened here today.");
  // No store and no fixtures: web search finds nobody.
  const auto r = cli({"assess", text.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("EmptyCandidates") != std::string::npos);
  CHECK(single_line(r.err));

  const auto data = write_csv(dir.path, 3, 3);
  const auto store = (dir.path / "store").string();
  REQUIRE(cli({"--store", store, "ingest", data.string()}).code == 0);
  const auto corpus = stylo::synthetic::disjoint_corpus(3, 3, 11);
  write(text, corpus[0].body);
  const auto guided = cli({"--store", store, "defend", text.string(), "--mode", "guided"});
  CHECK(guided.code == 1);
  CHECK(guided.err.find("UtilityBelowFloor") != std::string::npos);

  const auto empty = dir.path / "empty.txt";
  write(empty, "   ");
  CHECK(cli({"--store", store, "assess", empty.string()}).code == 1);
}

TEST_CASE("defend with rules and no-op") {
  testing::TempDir dir;
  fs::create_directories(dir.path);
  const auto corpus = stylo::synthetic::styled_corpus(4, 4, 3);
  json lines;
  std::string jsonl;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (i % 4 == 3) continue;
    jsonl += stylo::to_json(corpus[i]).dump() + "\n";
  }
  write(dir.path / "train.jsonl", jsonl);
  const auto store = (dir.path / "store").string();
  REQUIRE(cli({"--store", store, "ingest", (dir.path / "train.jsonl").string()}).code == 0);
  const auto article = dir.path / "held.json";
  write(article, stylo::to_json(corpus[3]).dump());

  const auto rewritten = dir.path / "out.txt";
  const auto rules = cli({"--output", "json", "--store", store, "defend", article.string(), "--mode", "rules",
                          "--rewritten-out", rewritten.string()});
  REQUIRE(rules.code == 0);
  const auto j = rules.parsed();
  CHECK(j["outcome"]["post"]["likelihood"] < j["outcome"]["pre"]["likelihood"]);
  CHECK(j["outcome"]["utility"] >= 0.85);
  CHECK(read(rewritten) == j["outcome"]["rewritten_text"]);
  CHECK(j["suggestions"].size() == 3);

  const auto none = cli({"--output", "json", "--store", store, "defend", article.string(), "--mode", "none"});
  REQUIRE(none.code == 0);
  CHECK(none.parsed()["before"] == none.parsed()["after"]);
  CHECK(none.parsed()["outcome"]["utility"] == 1.0);
}

TEST_CASE("eval on a bundled scenario is deterministic") {
  testing::TempDir dir;
  fs::create_directories(dir.path);
  const auto scenario = (kScenarios / "synthetic_targeted.json").string();
  const auto a = dir.path / "a.json";
  const auto b = dir.path / "b.json";
  const auto plot = dir.path / "plot.csv";
  const auto first = cli({"eval", scenario, "--report", a.string(), "--plot", plot.string()});
  REQUIRE(first.code == 0);
  CHECK(first.out.find("SALA") != std::string::npos);
  REQUIRE(cli({"--jobs", "3", "eval", scenario, "--report", b.string()}).code == 0);
  CHECK(read(a) == read(b));
  CHECK(read(plot).rfind("series,x_name,x,y_name,y\n", 0) == 0);

  const auto report = json::parse(read(a));
  CHECK(report["scenario"]["seed"] == 42);
  for (const auto& r : report["results"]) {
    if (r["strategy"] == "SALA") CHECK(r["report"]["metrics"]["f1"] == 1.0);
  }

  const auto reseeded = cli({"--output", "json", "--seed", "43", "eval", scenario, "--strategy", "SALA"});
  REQUIRE(reseeded.code == 0);
  CHECK(reseeded.parsed()["scenario"]["seed"] == 43);
  CHECK(reseeded.parsed()["results"].size() == 3);

  const auto bad = dir.path / "s.json";
  write(bad, R"({"kind": "targeted", "dataset": {"synthetic": {}}, "flavour": 1})");
  CHECK(cli({"eval", bad.string()}).code == 2);
  write(bad, R"({"kind": "sideways", "dataset": {"synthetic": {}}})");
  CHECK(cli({"eval", bad.string()}).code == 2);
}
