#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <ostream>
#include <sstream>

#include "stylo/defense.hpp"
#include "stylo/evaluation.hpp"
#include "stylo/pipeline.hpp"
#include "stylo/profile_store.hpp"
#include "stylo/stylometry.hpp"
#include "stylo/synthetic.hpp"

namespace stylo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// A problem with the command line, config or input files (exit 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_path;
  std::string provider;
  std::string fixtures;
  std::string store;
  std::string output = "table";
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  bool verbose = false;
};

struct Context {
  const Globals& globals;
  std::ostream& out;
  std::ostream& err;
  bool json_output() const { return globals.output == "json"; }
  void emit(const json& j) const { out << j.dump(2) << '\n'; }
  void note(const std::string& line) const {
    if (globals.verbose) err << line << '\n';
  }
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << content;
  if (!out.flush()) throw Error(Errc::IoError, "cannot write " + path.string());
}

json parse_json_file(const fs::path& path) {
  const auto text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

/// Config file first, then explicit flags.
pipeline::PipelineConfig load_config(const Globals& g) {
  pipeline::PipelineConfig c;
  try {
    if (!g.config_path.empty()) c = pipeline::PipelineConfig::from_json(parse_json_file(g.config_path));
    if (!g.provider.empty()) c.provider.kind = g.provider;
    if (!g.fixtures.empty()) c.provider.fixtures_path = g.fixtures;
    if (!g.store.empty()) c.store_path = g.store;
    c.validate();
  } catch (const Error& e) {
    if (e.code() == Errc::IoError) throw;
    throw UsageError("config: " + std::string(e.what()));
  }
  return c;
}

void validate_or_usage(const pipeline::PipelineConfig& c) {
  try {
    c.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

/// A .json file holds one article object; anything else is the body as plain text.
Article read_article(const fs::path& path) {
  if (path.extension() == ".json") {
    try {
      return article_from_json(parse_json_file(path));
    } catch (const Error& e) {
      if (e.code() == Errc::IoError) throw;
      throw UsageError(path.string() + ": " + e.what());
    }
  }
  Article a;
  a.id = path.stem().string();
  a.body = read_file(path);
  return a;
}

std::optional<store::ProfileStore> open_store_readonly(const pipeline::PipelineConfig& c) {
  if (c.store_path.empty()) return std::nullopt;
  return store::ProfileStore::open(c.store_path, store::ProfileStore::Access::ReadOnly);
}

std::string fixed(double v, int decimals = 4) { return stylometry::format_fixed(v, decimals); }

/// Left-aligned columns separated by " | ", with a rule under the header.
std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (i) line += " | ";
      line += rows[r][i] + std::string(width[i] - rows[r][i].size(), ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i ? 3 : 0);
      out += std::string(total, '-') + '\n';
    }
  }
  return out;
}

// ---- features ---------------------------------------------------------------

int cmd_features(const Context& ctx, const fs::path& input) {
  const auto config = load_config(ctx.globals);
  const auto text = read_file(input);
  const auto provider = pipeline::make_provider(config.provider);
  const auto profile = stylometry::compute_features(text, config.semantic_source, provider.get());
  if (ctx.json_output()) {
    ctx.emit(stylometry::to_json(profile));
    return kExitOk;
  }
  std::vector<std::vector<std::string>> rows{{"Feature", "Value"}};
  for (const auto f : stylometry::scalar_features()) {
    const auto v = profile.value(f);
    rows.push_back({std::string(stylometry::feature_label(f)), stylometry::is_count_feature(f) ? fixed(v, 0) : fixed(v)});
  }
  rows.push_back({"style summary", profile.style_summary});
  ctx.out << render_table(rows);
  return kExitOk;
}

// ---- ingest / db-stats ------------------------------------------------------

struct IngestArgs {
  std::string dataset;
  std::string format;
  std::vector<std::string> exclude;
};

int cmd_ingest(const Context& ctx, const IngestArgs& args) {
  const auto config = load_config(ctx.globals);
  if (config.store_path.empty()) throw UsageError("ingest needs --store");
  const auto format = args.format.empty() ? eval::format_for(args.dataset)
                      : args.format == "csv" ? eval::DatasetFormat::CSV
                                             : eval::DatasetFormat::JSONL;
  eval::LoadStats load;
  const auto articles = eval::load_dataset(args.dataset, format, &load);
  for (const auto& w : load.warnings) ctx.note("skipped " + w);
  const auto provider = pipeline::make_provider(config.provider);
  auto store = store::ProfileStore::open(config.store_path, store::ProfileStore::Access::ReadWrite);
  store::IngestOptions options;
  options.exclude_authors = args.exclude;
  options.semantic_source = config.semantic_source;
  const auto summary = store.warm_up(articles, *provider, options);
  for (const auto& w : summary.warnings) ctx.note(w);
  const auto manifest = store.stats();
  if (ctx.json_output()) {
    ctx.emit({{"rows_loaded", load.loaded},
              {"rows_skipped", load.skipped},
              {"ingest", store::to_json(summary)},
              {"store", store::to_json(manifest)}});
    return kExitOk;
  }
  ctx.out << render_table({{"Ingest", "Count"},
                           {"rows loaded", std::to_string(load.loaded)},
                           {"rows skipped", std::to_string(load.skipped)},
                           {"articles added", std::to_string(summary.articles_added)},
                           {"authors added", std::to_string(summary.authors_added)},
                           {"skipped: no author", std::to_string(summary.missing_author)},
                           {"skipped: duplicate", std::to_string(summary.duplicates)},
                           {"skipped: excluded", std::to_string(summary.excluded)},
                           {"skipped: invalid", std::to_string(summary.invalid)},
                           {"store authors", std::to_string(manifest.author_count)},
                           {"store articles", std::to_string(manifest.article_count)}});
  return kExitOk;
}

int cmd_db_stats(const Context& ctx) {
  const auto config = load_config(ctx.globals);
  if (config.store_path.empty()) throw UsageError("db-stats needs --store");
  const auto store = store::ProfileStore::open(config.store_path, store::ProfileStore::Access::ReadOnly);
  const auto manifest = store.stats();
  json authors = json::array();
  std::vector<std::vector<std::string>> rows{{"Author", "Samples", "Top keywords"}};
  for (const auto& name : store.list_authors()) {
    const auto& record = store.get_author(name);
    std::string keywords;
    for (std::size_t i = 0; i < std::min<std::size_t>(5, record.keywords.size()); ++i) {
      keywords += (i ? ", " : "") + record.keywords[i].term;
    }
    authors.push_back({{"name", name}, {"samples", record.sample_ids.size()}});
    rows.push_back({name, std::to_string(record.sample_ids.size()), keywords});
  }
  if (ctx.json_output()) {
    auto j = store::to_json(manifest);
    j["authors"] = authors;
    ctx.emit(j);
    return kExitOk;
  }
  ctx.out << "authors: " << manifest.author_count << "  articles: " << manifest.article_count
          << "  embedding dim: " << manifest.embedding_dim << "\n\n";
  ctx.out << render_table(rows);
  return kExitOk;
}

// ---- assess / defend --------------------------------------------------------

struct PipelineArgs {
  std::string article;
  std::string strategy;
  std::string mode;
  std::size_t candidates = 0;
  std::size_t samples = 0;
  bool timings = false;
};

pipeline::PipelineConfig pipeline_config(const Context& ctx, const PipelineArgs& args) {
  auto config = load_config(ctx.globals);
  if (!args.strategy.empty()) config.strategy = matching::strategy_from_string(args.strategy);
  if (!args.mode.empty()) config.mode = pipeline::mode_from_string(args.mode);
  if (args.candidates) config.candidates_n = args.candidates;
  if (args.samples) config.samples_per_candidate = args.samples;
  validate_or_usage(config);
  return config;
}

std::string report_table(const pipeline::RiskReport& r) {
  std::string out = "article: " + r.article_id + "  mode: " + std::string(pipeline::to_string(r.mode_used)) +
                    (r.candidates.fell_back ? " (fell back from db_augmented)" : "") +
                    "  strategy: " + std::string(matching::to_string(r.strategy)) +
                    "  comparisons: " + std::to_string(r.comparisons) + "\n";
  out += "topic: " + r.metadata.topic_category;
  if (r.metadata.publication_date) out += "  date: " + *r.metadata.publication_date;
  if (r.metadata.geo_location) out += "  location: " + *r.metadata.geo_location;
  out += "\n\n";
  std::vector<std::vector<std::string>> rows{{"Rank", "Author", "Likelihood", "Verdict", "Retrieval"}};
  for (std::size_t i = 0; i < r.ranked_matches.size(); ++i) {
    const auto& m = r.ranked_matches[i];
    std::string retrieval = "-";
    for (const auto& c : r.candidates.candidates) {
      if (c.author == m.author) retrieval = fixed(c.retrieval_score);
    }
    rows.push_back({std::to_string(i + 1), m.author, fixed(m.likelihood), std::string(matching::to_string(m.verdict)),
                    retrieval});
  }
  out += render_table(rows);
  out += "\nmost identifying features for " + r.reflection.author + ":\n";
  std::vector<std::vector<std::string>> features{{"Feature", "z", "Article", "Author mean"}};
  for (const auto& f : r.reflection.ranked) {
    features.push_back({std::string(stylometry::feature_label(f.feature)), fixed(f.z, 3), fixed(f.article_value),
                        fixed(f.author_mean)});
  }
  out += render_table(features);
  if (!r.reflection.rationale.empty()) out += "\n" + r.reflection.rationale + "\n";
  return out;
}

int cmd_assess(const Context& ctx, const PipelineArgs& args) {
  const auto config = pipeline_config(ctx, args);
  const auto article = read_article(args.article);
  const auto provider = pipeline::make_provider(config.provider);
  const auto store = open_store_readonly(config);
  const pipeline::Pipeline p(config, *provider, store ? &*store : nullptr);
  const auto report = p.assess(article);
  if (ctx.json_output()) {
    ctx.emit(report.to_json(args.timings));
  } else {
    ctx.out << report_table(report);
  }
  return kExitOk;
}

struct DefendArgs {
  PipelineArgs pipeline;
  std::string mode = "rules";
  std::size_t k = 3;
  double floor = defense::kDefaultUtilityFloor;
  std::string rewritten_out;
};

int cmd_defend(const Context& ctx, const DefendArgs& args) {
  const auto config = pipeline_config(ctx, args.pipeline);
  const auto mode = defense::defense_mode_from_string(args.mode);
  const auto article = read_article(args.pipeline.article);
  const auto provider = pipeline::make_provider(config.provider);
  const auto store = open_store_readonly(config);
  const pipeline::Pipeline p(config, *provider, store ? &*store : nullptr);
  const auto run = defense::defend(p, article, mode, args.k, args.floor);
  if (!args.rewritten_out.empty()) write_file(args.rewritten_out, run.outcome.rewritten_text);
  if (ctx.json_output()) {
    ctx.emit(run.to_json());
    return kExitOk;
  }
  const auto& o = run.outcome;
  ctx.out << "defense: " << defense::to_string(o.mode) << "  utility: " << fixed(o.utility) << " (floor "
          << fixed(o.utility_floor, 2) << ")\n";
  ctx.out << "matched author: " << o.pre.author << "  likelihood " << fixed(o.pre.likelihood) << " -> "
          << fixed(o.post.likelihood) << "\n";
  const auto top = [](const pipeline::RiskReport& r) {
    return r.ranked_matches.empty() ? std::string("-") : r.ranked_matches.front().author;
  };
  ctx.out << "top-1 before: " << top(run.before) << "  after: " << top(run.after) << "\n";
  if (!o.suggestions_used.empty()) {
    ctx.out << "\nsuggestions:\n";
    for (std::size_t i = 0; i < o.suggestions_used.size(); ++i) {
      ctx.out << "  " << i + 1 << ". " << o.suggestions_used[i] << "\n";
    }
  }
  if (!o.steps_applied.empty()) {
    ctx.out << "\nedits kept:\n";
    for (const auto& s : o.steps_applied) ctx.out << "  - " << s << "\n";
  }
  ctx.out << "\nrewritten text:\n" << o.rewritten_text << "\n";
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string scenario;
  std::vector<std::string> strategies;
  std::string report_path;
  std::string plot_path;
};

std::vector<std::size_t> sizes_in(const json& s, const char* key, std::size_t fallback) {
  const auto it = s.find(key);
  if (it == s.end()) return {fallback};
  std::vector<std::size_t> out;
  if (it->is_number_unsigned()) {
    out.push_back(it->get<std::size_t>());
  } else if (it->is_array()) {
    for (const auto& v : *it) {
      if (!v.is_number_unsigned()) throw UsageError(std::string(key) + " must hold positive integers");
      out.push_back(v.get<std::size_t>());
    }
  } else {
    throw UsageError(std::string(key) + " must be a positive integer or a list of them");
  }
  if (out.empty() || std::find(out.begin(), out.end(), 0) != out.end()) {
    throw UsageError(std::string(key) + " values must be positive");
  }
  return out;
}

std::vector<Article> scenario_dataset(const json& scenario, const fs::path& base) {
  const auto it = scenario.find("dataset");
  if (it == scenario.end() || !it->is_object()) throw UsageError("scenario needs a dataset object");
  if (const auto synth = it->find("synthetic"); synth != it->end()) {
    const auto kind = synth->value("kind", std::string("styled"));
    const auto authors = synth->value("authors", std::size_t{20});
    const auto per_author = synth->value("per_author", std::size_t{20});
    const auto seed = synth->value("seed", std::uint64_t{7});
    if (kind == "styled") return synthetic::styled_corpus(authors, per_author, seed);
    if (kind == "disjoint") return synthetic::disjoint_corpus(authors, per_author, seed);
    throw UsageError("synthetic dataset kind must be styled or disjoint");
  }
  const auto path_it = it->find("path");
  if (path_it == it->end() || !path_it->is_string()) throw UsageError("dataset needs a path or a synthetic spec");
  fs::path path = path_it->get<std::string>();
  if (path.is_relative()) path = base / path;
  const auto format_name = it->value("format", std::string());
  const auto format = format_name.empty()     ? eval::format_for(path)
                      : format_name == "csv"   ? eval::DatasetFormat::CSV
                      : format_name == "jsonl" ? eval::DatasetFormat::JSONL
                                               : throw UsageError("dataset format must be csv or jsonl");
  return eval::load_dataset(path, format);
}

int cmd_eval(const Context& ctx, const EvalArgs& args) {
  const auto base_config = load_config(ctx.globals);
  auto scenario = parse_json_file(args.scenario);
  if (!scenario.is_object()) throw UsageError("scenario must be a JSON object");
  static const std::set<std::string> known{"kind",        "dataset",     "strategies",         "seed",
                                           "repetitions", "targets",     "test_size",          "samples_per_candidate",
                                           "candidates_n", "k_values",   "holdout_per_author", "defense",
                                           "use_store",   "description"};
  for (const auto& [key, value] : scenario.items()) {
    if (!known.count(key)) throw UsageError("unknown scenario key '" + key + "'");
  }
  const auto kind = scenario.value("kind", std::string());
  if (kind != "targeted" && kind != "open_world") throw UsageError("scenario kind must be targeted or open_world");
  const bool targeted = kind == "targeted";

  std::vector<matching::Strategy> strategies;
  std::vector<std::string> names = args.strategies;
  if (names.empty() && scenario.contains("strategies")) names = scenario["strategies"].get<std::vector<std::string>>();
  for (const auto& n : names) {
    try {
      strategies.push_back(matching::strategy_from_string(n));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  if (strategies.empty()) strategies.push_back(base_config.strategy);

  const auto seed = ctx.globals.seed.value_or(scenario.value("seed", eval::kDefaultSeed));
  const auto repetitions = scenario.value("repetitions", std::size_t{1});
  if (repetitions == 0) throw UsageError("repetitions must be positive");
  const auto sweep = targeted ? sizes_in(scenario, "samples_per_candidate", base_config.samples_per_candidate)
                              : sizes_in(scenario, "candidates_n", base_config.candidates_n);
  const std::string x_name = targeted ? "samples_per_candidate" : "candidates_n";
  const auto k_values = sizes_in(scenario, "k_values", 3);
  const auto use_store = scenario.value("use_store", false);
  std::optional<eval::DefenseConfig> defense_config;
  if (const auto d = scenario.find("defense"); d != scenario.end()) {
    eval::DefenseConfig dc;
    dc.mode = defense::defense_mode_from_string(d->value("mode", std::string("rules")));
    dc.k = d->value("k", dc.k);
    dc.utility_floor = d->value("utility_floor", dc.utility_floor);
    defense_config = dc;
  }

  const auto articles = scenario_dataset(scenario, fs::path(args.scenario).parent_path());
  const auto provider = pipeline::make_provider(base_config.provider);
  std::optional<store::ProfileStore> persistent;
  if (use_store) {
    persistent = open_store_readonly(base_config);
    if (!persistent) throw UsageError("scenario uses the store but no --store was given");
  }
  const eval::EvalOptions options{ctx.globals.jobs};

  // (x, strategy) -> per-repetition reports
  std::map<std::pair<std::size_t, std::size_t>, std::vector<eval::EvalReport>> runs, pre_runs, post_runs;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> utilities;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> rejected;
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    const auto rep_seed = seed + rep;
    for (std::size_t xi = 0; xi < sweep.size(); ++xi) {
      const auto x = sweep[xi];
      std::optional<eval::TargetedSplit> tsplit;
      std::optional<eval::OpenWorldSplit> osplit;
      const std::vector<Article>* training = nullptr;
      if (targeted) {
        tsplit = eval::build_targeted(articles, scenario.value("targets", std::size_t{1}),
                                      scenario.value("test_size", std::size_t{20}), x, rep_seed);
        training = &tsplit->training;
      } else {
        osplit = eval::build_open_world(articles, scenario.value("holdout_per_author", std::size_t{1}), rep_seed);
        osplit->scenario.candidates_n = x;
        osplit->scenario.k_values = k_values;
        training = &osplit->training;
      }
      auto local = store::ProfileStore::in_memory();
      if (!use_store) {
        store::IngestOptions ingest;
        ingest.semantic_source = base_config.semantic_source;
        local.warm_up(*training, *provider, ingest);
      }
      const auto* store = use_store ? &*persistent : &local;
      auto config = base_config;
      if (targeted) config.samples_per_candidate = x;
      else config.candidates_n = x;
      validate_or_usage(config);
      const pipeline::Pipeline p(config, *provider, store);
      for (std::size_t si = 0; si < strategies.size(); ++si) {
        const auto key = std::make_pair(xi, si);
        ctx.note("repetition " + std::to_string(rep + 1) + ", " + x_name + " = " + std::to_string(x) + ", " +
                 std::string(matching::to_string(strategies[si])));
        if (defense_config) {
          const auto d = targeted ? eval::run_defense_eval(tsplit->scenario, strategies[si], p, *defense_config, options)
                                  : eval::run_defense_eval(osplit->scenario, strategies[si], p, *defense_config, options);
          pre_runs[key].push_back(d.pre);
          post_runs[key].push_back(d.post);
          if (d.mean_utility) utilities[key].push_back(*d.mean_utility);
          rejected[key] += d.rejected;
          runs[key].push_back(d.pre);
        } else {
          runs[key].push_back(targeted ? eval::run_targeted(tsplit->scenario, strategies[si], p, options)
                                       : eval::run_open_world(osplit->scenario, strategies[si], p, options));
        }
      }
    }
  }

  const auto max_k = *std::max_element(k_values.begin(), k_values.end());
  const std::string y_name =
      targeted ? "f1" : (std::find(k_values.begin(), k_values.end(), 3) != k_values.end() ? "top3"
                                                                                          : "top" + std::to_string(max_k));
  json results = json::array();
  std::vector<eval::PlotPoint> plot;
  std::string table;
  for (std::size_t xi = 0; xi < sweep.size(); ++xi) {
    std::vector<eval::EvalReport> rows;
    for (std::size_t si = 0; si < strategies.size(); ++si) {
      const auto key = std::make_pair(xi, si);
      const auto avg = eval::average(runs[key]);
      json entry{{"x_name", x_name}, {"x", sweep[xi]}, {"strategy", matching::to_string(strategies[si])}};
      if (defense_config) {
        auto pre = eval::average(pre_runs[key]);
        auto post = eval::average(post_runs[key]);
        json mean_utility = nullptr;
        if (!utilities[key].empty()) {
          double s = 0.0;
          for (const auto u : utilities[key]) s += u;
          mean_utility = s / static_cast<double>(utilities[key].size());
        }
        entry["defense"] = {{"mode", defense::to_string(defense_config->mode)},
                            {"pre", pre.to_json()},
                            {"post", post.to_json()},
                            {"mean_utility", mean_utility},
                            {"rejected", rejected[key]}};
        pre.kind += " (no defense)";
        post.kind += " (" + std::string(defense::to_string(defense_config->mode)) + ")";
        rows.push_back(pre);
        rows.push_back(post);
      } else {
        entry["report"] = avg.to_json();
        rows.push_back(avg);
      }
      results.push_back(entry);
      const auto y = avg.metrics.find(y_name);
      plot.push_back({std::string(matching::to_string(strategies[si])), x_name, sweep[xi], y_name,
                      y == avg.metrics.end() ? std::nullopt : y->second});
    }
    table += x_name + " = " + std::to_string(sweep[xi]) + "\n" + eval::format_table(rows) + "\n";
  }

  scenario["seed"] = seed;
  const json report{{"scenario", scenario}, {"pipeline", base_config.to_json()}, {"results", results}};
  if (!args.report_path.empty()) write_file(args.report_path, report.dump(2) + "\n");
  if (!args.plot_path.empty()) write_file(args.plot_path, eval::plot_csv(plot));
  if (ctx.json_output()) {
    ctx.emit(report);
  } else {
    ctx.out << table;
  }
  return kExitOk;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::IoError:
    case Errc::HeaderMismatch: return kExitUsage;
    default: return kExitDomain;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Authorship deanonymization risk assessment and mitigation", "stylo"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "stylo 1.0.0");
  Globals g;
  app.add_option("--config", g.config_path, "JSON pipeline config file")->check(CLI::ExistingFile);
  app.add_option("--provider", g.provider, "stub or http")->check(CLI::IsMember({"stub", "http"}));
  app.add_option("--fixtures", g.fixtures, "web-search fixtures for the stub provider")->check(CLI::ExistingFile);
  app.add_option("--store", g.store, "profile store directory");
  app.add_option("--output", g.output, "json or table")->check(CLI::IsMember({"json", "table"}));
  app.add_option("--seed", g.seed, "sampling seed for evaluation");
  app.add_option("--jobs", g.jobs, "worker threads for batch commands")->check(CLI::Range(1, 256));
  app.add_flag("-v,--verbose", g.verbose, "progress and warnings on stderr");

  std::string features_input;
  auto* features = app.add_subcommand("features", "print the stylometric profile of a text file");
  features->add_option("input", features_input, "text file")->required();

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "warm up the profile store from a CSV or JSONL dataset");
  ingest->add_option("dataset", ingest_args.dataset, "dataset file")->required();
  ingest->add_option("--format", ingest_args.format, "csv or jsonl (default: by extension)")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  ingest->add_option("--exclude-authors", ingest_args.exclude, "authors to leave out")->delimiter(',');

  const auto add_pipeline_flags = [](CLI::App* cmd, PipelineArgs& a) {
    cmd->add_option("article", a.article, "article file (.json object or plain text)")->required();
    cmd->add_option("--strategy", a.strategy, "SALA, ES or LDA")
        ->check(CLI::IsMember({"SALA", "ES", "LDA", "sala", "es", "lda"}));
    cmd->add_option("--search-mode", a.mode, "db_augmented or zero_shot");
    cmd->add_option("--candidates", a.candidates, "number of candidates (default 20)")->check(CLI::PositiveNumber);
    cmd->add_option("--samples", a.samples, "samples per candidate")->check(CLI::PositiveNumber);
  };
  PipelineArgs assess_args;
  auto* assess = app.add_subcommand("assess", "run the four-stage pipeline on one article");
  add_pipeline_flags(assess, assess_args);
  assess->add_flag("--timings", assess_args.timings, "include stage timings in JSON output");

  DefendArgs defend_args;
  auto* defend = app.add_subcommand("defend", "rewrite an article to lower its attribution risk");
  add_pipeline_flags(defend, defend_args.pipeline);
  defend->add_option("--mode", defend_args.mode, "guided, paraphrase, rules or none")
      ->check(CLI::IsMember({"guided", "paraphrase", "rules", "none"}));
  defend->add_option("-k,--suggestions", defend_args.k, "number of features to target")->check(CLI::PositiveNumber);
  defend->add_option("--utility-floor", defend_args.floor, "minimum embedding cosine")->check(CLI::Range(0.0, 1.0));
  defend->add_option("--rewritten-out", defend_args.rewritten_out, "write the rewritten text here");

  EvalArgs eval_args;
  auto* evaluate = app.add_subcommand("eval", "run a targeted or open-world evaluation scenario");
  evaluate->add_option("scenario", eval_args.scenario, "scenario JSON file")->required();
  evaluate->add_option("--strategy", eval_args.strategies, "strategies to compare (repeatable)")
      ->check(CLI::IsMember({"SALA", "ES", "LDA", "sala", "es", "lda"}));
  evaluate->add_option("--report", eval_args.report_path, "also write the JSON report here");
  evaluate->add_option("--plot", eval_args.plot_path, "write plot data CSV here");

  auto* db_stats = app.add_subcommand("db-stats", "summarize a profile store");

  std::vector<std::string> argv_storage{"stylo"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const auto code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const Context ctx{g, out, err};
  try {
    if (*features) return cmd_features(ctx, features_input);
    if (*ingest) return cmd_ingest(ctx, ingest_args);
    if (*assess) return cmd_assess(ctx, assess_args);
    if (*defend) return cmd_defend(ctx, defend_args);
    if (*evaluate) return cmd_eval(ctx, eval_args);
    if (*db_stats) return cmd_db_stats(ctx);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const pipeline::StageError& e) {
    err << "error: " << to_string(e.code()) << " in " << e.stage() << " stage: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace stylo::cli
