#include "stylo/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "stylo/text_core.hpp"

namespace stylo::eval {

using nlohmann::json;
using pipeline::Candidate;
using pipeline::Mode;
using pipeline::Pipeline;

namespace {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; results are indexed,
/// so the caller's fold does not depend on completion order. The exception of
/// the lowest failing index is rethrown.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, std::size_t jobs, Fn fn) {
  std::vector<std::optional<T>> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<T> result;
  result.reserve(n);
  for (auto& v : out) result.push_back(std::move(*v));
  return result;
}

Pipeline with_strategy(const Pipeline& base, matching::Strategy strategy,
                       std::optional<std::size_t> candidates_n = std::nullopt) {
  auto config = base.config();
  config.strategy = strategy;
  if (candidates_n) config.candidates_n = *candidates_n;
  return Pipeline(config, base.provider(), base.store());
}

/// Fisher-Yates with an explicit generator, so shuffles agree across standard libraries.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

std::map<std::string, std::vector<const Article*>> by_author(const std::vector<Article>& articles) {
  std::map<std::string, std::vector<const Article*>> out;
  for (const auto& a : articles) {
    if (a.author && !a.author->empty()) out[*a.author].push_back(&a);
  }
  return out;
}

/// A target's reference built from its first `samples` stored articles.
Candidate stored_target(const Pipeline& p, const std::string& author, std::size_t samples) {
  const auto* store = p.store();
  if (store == nullptr || !store->has_author(author)) {
    throw Error(Errc::UnknownTarget, "target '" + author + "' is not in the profile store");
  }
  Candidate c;
  c.author = author;
  stylometry::AggregatedProfile profile;
  provider::Embedding sum;
  for (const auto* sample : store->samples_of(author, samples)) {
    c.sample_ids.push_back(sample->id);
    c.sample_texts.push_back(sample->body);
    profile.add(stylometry::compute_features(sample->body, p.config().semantic_source, &p.provider()));
    const auto e = p.provider().embed(sample->body);
    if (sum.vector.empty()) sum.vector.assign(e.dim(), 0.0);
    for (std::size_t i = 0; i < e.dim() && i < sum.dim(); ++i) sum.vector[i] += e.vector[i];
  }
  if (c.sample_texts.empty()) throw Error(Errc::UnknownTarget, "target '" + author + "' has no stored samples");
  c.profile = profile;
  provider::normalize(sum);
  c.centroid = std::move(sum);
  return c;
}

json metric_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string format_metric(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", *v);
  return buf;
}

}  // namespace

// ---- metrics ----------------------------------------------------------------

double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp == 0) return (fp == 0 && fn == 0) ? 1.0 : 0.0;
  // 2PR/(P+R) simplified, so the result is a single correctly rounded division.
  return static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
}

std::vector<Confusion> tally_targets(const std::vector<std::string>& targets, const std::vector<std::string>& truths,
                                     const std::vector<std::optional<std::string>>& predicted) {
  if (truths.size() != predicted.size()) throw Error(Errc::DimMismatch, "one prediction per article expected");
  std::vector<Confusion> out(targets.size());
  for (std::size_t i = 0; i < truths.size(); ++i) {
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const bool said = predicted[i] == targets[t];
      const bool actual = truths[i] == targets[t];
      auto& c = out[t];
      if (said && actual) ++c.tp;
      else if (said) ++c.fp;
      else if (actual) ++c.fn;
      else ++c.tn;
    }
  }
  return out;
}

double macro_f1(const std::vector<Confusion>& per_target) {
  if (per_target.empty()) throw Error(Errc::EmptyList, "no targets to average over");
  double sum = 0.0;
  for (const auto& c : per_target) sum += c.f1();
  return sum / static_cast<double>(per_target.size());
}

double top_k_rate(const std::vector<std::size_t>& ranks, std::size_t k) {
  if (ranks.empty()) return 0.0;
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r >= 1 && r <= k; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

// ---- scenarios --------------------------------------------------------------

TargetedSplit build_targeted(const std::vector<Article>& articles, std::size_t num_targets, std::size_t test_size,
                             std::size_t samples_per_candidate, std::uint64_t seed) {
  if (num_targets == 0) throw Error(Errc::InvalidArgument, "need at least one target");
  if (test_size < 2) throw Error(Errc::InvalidArgument, "test set needs at least two articles");
  const auto groups = by_author(articles);
  const std::size_t want_target = test_size / 2;
  const std::size_t want_other = test_size - want_target;

  std::vector<std::string> eligible;
  for (const auto& [name, list] : groups) {
    if (list.size() > samples_per_candidate) eligible.push_back(name);
  }
  if (eligible.size() < num_targets) {
    throw Error(Errc::InvalidArgument, "only " + std::to_string(eligible.size()) + " authors have more than " +
                                           std::to_string(samples_per_candidate) + " articles");
  }
  std::mt19937_64 rng(seed);
  shuffle(eligible, rng);
  std::vector<std::string> targets(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(num_targets));
  std::sort(targets.begin(), targets.end());
  const std::set<std::string> target_set(targets.begin(), targets.end());

  // Each target keeps its first samples_per_candidate articles for training.
  std::vector<const Article*> target_pool, other_pool;
  for (const auto& [name, list] : groups) {
    if (target_set.count(name)) {
      target_pool.insert(target_pool.end(), list.begin() + static_cast<std::ptrdiff_t>(samples_per_candidate),
                         list.end());
    } else {
      other_pool.insert(other_pool.end(), list.begin(), list.end());
    }
  }
  if (target_pool.size() < want_target || other_pool.size() < want_other) {
    throw Error(Errc::InvalidArgument, "not enough articles for a test set of " + std::to_string(test_size));
  }
  shuffle(target_pool, rng);
  shuffle(other_pool, rng);

  TargetedSplit split;
  split.scenario.targets = targets;
  split.scenario.samples_per_candidate = samples_per_candidate;
  std::set<std::string> held;
  const auto take = [&](const Article* a, bool is_target) {
    split.scenario.test_set.push_back({*a, is_target, *a->author});
    held.insert(a->id);
  };
  for (std::size_t i = 0; i < want_target; ++i) take(target_pool[i], true);
  for (std::size_t i = 0; i < want_other; ++i) take(other_pool[i], false);
  std::stable_sort(split.scenario.test_set.begin(), split.scenario.test_set.end(),
                   [](const TargetedCase& a, const TargetedCase& b) { return a.article.id < b.article.id; });
  for (const auto& a : articles) {
    if (!held.count(a.id)) split.training.push_back(a);
  }
  return split;
}

OpenWorldSplit build_open_world(const std::vector<Article>& articles, std::size_t per_author, std::uint64_t seed) {
  if (per_author == 0) throw Error(Errc::InvalidArgument, "hold out at least one article per author");
  std::mt19937_64 rng(seed);
  std::set<std::string> held;
  OpenWorldSplit split;
  for (const auto& [name, list] : by_author(articles)) {
    if (list.size() <= per_author) continue;
    auto shuffled = list;
    shuffle(shuffled, rng);
    for (std::size_t i = 0; i < per_author; ++i) {
      split.scenario.test_set.push_back(*shuffled[i]);
      held.insert(shuffled[i]->id);
    }
  }
  std::sort(split.scenario.test_set.begin(), split.scenario.test_set.end(),
            [](const Article& a, const Article& b) { return a.id < b.id; });
  for (const auto& a : articles) {
    if (!held.count(a.id)) split.training.push_back(a);
  }
  return split;
}

// ---- reports ----------------------------------------------------------------

json EvalReport::to_json() const {
  json m = json::object();
  for (const auto& [k, v] : metrics) m[k] = metric_json(v);
  return json{{"kind", kind},
              {"strategy", matching::to_string(strategy)},
              {"config", config},
              {"metrics", m},
              {"denominators", denominators},
              {"comparisons", comparisons},
              {"repetitions", repetitions},
              {"per_article", per_article}};
}

EvalReport average(const std::vector<EvalReport>& runs) {
  if (runs.empty()) throw Error(Errc::EmptyList, "no runs to average");
  EvalReport out = runs.front();
  out.repetitions = runs.size();
  out.per_article.clear();
  for (auto& [name, value] : out.metrics) {
    double sum = 0.0;
    bool defined = true;
    for (const auto& r : runs) {
      const auto it = r.metrics.find(name);
      if (it == r.metrics.end() || !it->second) {
        defined = false;
        break;
      }
      sum += *it->second;
    }
    value = defined ? std::optional<double>(sum / static_cast<double>(runs.size())) : std::nullopt;
  }
  out.comparisons = 0;
  for (auto& [name, d] : out.denominators) d = 0;
  for (const auto& r : runs) {
    out.comparisons += r.comparisons;
    for (const auto& [name, d] : r.denominators) out.denominators[name] += d;
    out.per_article.insert(out.per_article.end(), r.per_article.begin(), r.per_article.end());
  }
  return out;
}

EvalReport run_targeted(const TargetedScenario& scenario, matching::Strategy strategy, const Pipeline& pipeline,
                        const EvalOptions& options) {
  if (scenario.targets.empty()) throw Error(Errc::EmptyList, "scenario has no targets");
  if (scenario.test_set.empty()) throw Error(Errc::EmptyList, "scenario has no test articles");
  const auto p = with_strategy(pipeline, strategy);
  const auto mode = p.config().mode;
  auto targets = scenario.targets;
  std::sort(targets.begin(), targets.end());

  std::vector<Candidate> references;
  for (const auto& t : targets) {
    if (mode == Mode::DbAugmented) {
      references.push_back(stored_target(p, t, scenario.samples_per_candidate));
    } else {
      auto c = p.fetch_candidate(t, scenario.samples_per_candidate);
      if (c.sample_texts.empty()) throw Error(Errc::UnknownTarget, "web search found no samples for '" + t + "'");
      references.push_back(std::move(c));
    }
  }

  struct Outcome {
    std::optional<std::size_t> predicted;
    std::size_t comparisons = 0;
    json record;
  };
  const auto outcomes = parallel_map<Outcome>(scenario.test_set.size(), options.jobs, [&](std::size_t i) {
    const auto& c = scenario.test_set[i];
    const auto subject = matching::prepare_subject(c.article.body, p.provider(), p.config().semantic_source);
    Outcome o;
    json scores = json::object();
    double best = -1.0;
    for (std::size_t t = 0; t < references.size(); ++t) {
      const auto r = p.match_candidate(subject, references[t], mode);
      o.comparisons += r.comparisons_made;
      scores[targets[t]] = {{"likelihood", r.likelihood}, {"verdict", matching::to_string(r.verdict)}};
      if (r.verdict == matching::Verdict::Same && r.likelihood > best) {
        best = r.likelihood;
        o.predicted = t;
      }
    }
    o.record = {{"id", c.article.id},
                {"true_author", c.true_author},
                {"is_target", c.is_target},
                {"predicted", o.predicted ? json(targets[*o.predicted]) : json(nullptr)},
                {"scores", scores}};
    return o;
  });

  EvalReport report;
  report.kind = "targeted";
  report.strategy = strategy;
  std::vector<std::string> truths;
  std::vector<std::optional<std::string>> predicted;
  for (const auto& o : outcomes) {
    truths.push_back(scenario.test_set[truths.size()].true_author);
    predicted.push_back(o.predicted ? std::optional<std::string>(targets[*o.predicted]) : std::nullopt);
    report.comparisons += o.comparisons;
    report.per_article.push_back(o.record);
  }
  const auto confusion = tally_targets(targets, truths, predicted);
  report.metrics["f1"] = macro_f1(confusion);
  std::size_t target_articles = 0;
  for (const auto& c : scenario.test_set) target_articles += c.is_target;
  report.denominators["articles"] = scenario.test_set.size();
  report.denominators["target_articles"] = target_articles;
  json per_target = json::object();
  for (std::size_t t = 0; t < targets.size(); ++t) {
    per_target[targets[t]] = {{"tp", confusion[t].tp},
                              {"fp", confusion[t].fp},
                              {"fn", confusion[t].fn},
                              {"tn", confusion[t].tn},
                              {"f1", confusion[t].f1()}};
  }
  report.config = {{"pipeline", p.config().to_json()},
                   {"targets", targets},
                   {"samples_per_candidate", scenario.samples_per_candidate},
                   {"per_target", per_target}};
  return report;
}

EvalReport run_open_world(const OpenWorldScenario& scenario, matching::Strategy strategy, const Pipeline& pipeline,
                          const EvalOptions& options) {
  if (scenario.test_set.empty()) throw Error(Errc::EmptyList, "scenario has no test articles");
  if (scenario.k_values.empty()) throw Error(Errc::EmptyList, "no k values");
  const auto max_k = *std::max_element(scenario.k_values.begin(), scenario.k_values.end());
  if (max_k == 0 || scenario.candidates_n < max_k) {
    throw Error(Errc::InvalidArgument, "candidates_n must be at least the largest k");
  }
  for (const auto& a : scenario.test_set) {
    if (!a.author || a.author->empty()) throw Error(Errc::MissingAuthor, "article " + a.id + " has no ground truth");
  }
  const auto p = with_strategy(pipeline, strategy, scenario.candidates_n);

  struct Outcome {
    std::size_t rank = 0;
    bool covered = false;
    std::size_t comparisons = 0;
    json record;
  };
  const auto outcomes = parallel_map<Outcome>(scenario.test_set.size(), options.jobs, [&](std::size_t i) {
    const auto& a = scenario.test_set[i];
    Outcome o;
    o.record = {{"id", a.id}, {"true_author", *a.author}};
    try {
      const auto report = p.assess(a);
      for (std::size_t r = 0; r < report.ranked_matches.size(); ++r) {
        if (report.ranked_matches[r].author == *a.author) {
          o.rank = r + 1;
          break;
        }
      }
      for (const auto& c : report.candidates.candidates) o.covered |= c.author == *a.author;
      o.comparisons = report.comparisons;
      o.record["mode_used"] = to_string(report.mode_used);
      o.record["top"] = report.top_k_authors(max_k);
    } catch (const pipeline::StageError& e) {
      if (e.code() != Errc::EmptyCandidates) throw;
      o.record["error"] = e.what();
    }
    o.record["rank"] = o.rank ? json(o.rank) : json(nullptr);
    o.record["covered"] = o.covered;
    return o;
  });

  EvalReport report;
  report.kind = "open_world";
  report.strategy = strategy;
  std::vector<std::size_t> ranks, covered_ranks;
  for (const auto& o : outcomes) {
    ranks.push_back(o.rank);
    if (o.covered) covered_ranks.push_back(o.rank);
    report.comparisons += o.comparisons;
    report.per_article.push_back(o.record);
  }
  for (const auto k : scenario.k_values) {
    const auto name = "top" + std::to_string(k);
    report.metrics[name] = top_k_rate(ranks, k);
    report.metrics[name + "_filtered"] =
        covered_ranks.empty() ? std::nullopt : std::optional<double>(top_k_rate(covered_ranks, k));
  }
  report.metrics["coverage"] = static_cast<double>(covered_ranks.size()) / static_cast<double>(ranks.size());
  report.denominators["articles"] = ranks.size();
  report.denominators["covered"] = covered_ranks.size();
  report.config = {{"pipeline", p.config().to_json()},
                   {"candidates_n", scenario.candidates_n},
                   {"k_values", scenario.k_values}};
  return report;
}

// ---- defense ----------------------------------------------------------------

json DefenseEvalReport::to_json() const {
  return json{{"pre", pre.to_json()},
              {"post", post.to_json()},
              {"mean_utility", metric_json(mean_utility)},
              {"rewritten", rewritten},
              {"rejected", rejected}};
}

namespace {

struct Rewrite {
  std::string text;
  std::optional<double> utility;  ///< nullopt when the rewrite was rejected
};

Rewrite rewrite_article(const Pipeline& p, const Article& article, const DefenseConfig& d) {
  if (d.mode == defense::DefenseMode::NoOp) return {article.body, 1.0};
  const auto before = p.assess(article);
  const auto& best = before.ranked_matches.front().author;
  const auto& candidates = before.candidates.candidates;
  const auto matched = std::find_if(candidates.begin(), candidates.end(),
                                    [&](const Candidate& c) { return c.author == best; });
  const auto plan = defense::build_suggestions(before.reflection, d.k, d.utility_floor);
  try {
    const auto out = defense::apply_defense(article.body, plan, d.mode, p, *matched, before.candidates.mode);
    return {out.rewritten_text, out.utility};
  } catch (const defense::UtilityBelowFloor&) {
    return {article.body, std::nullopt};
  }
}

template <typename Scenario, typename GetArticle, typename Run>
DefenseEvalReport defense_eval(const Scenario& scenario, matching::Strategy strategy, const Pipeline& pipeline,
                               const DefenseConfig& d, const EvalOptions& options, GetArticle get, Run run) {
  DefenseEvalReport out;
  out.pre = run(scenario);
  const auto p = with_strategy(pipeline, strategy);
  const auto rewrites = parallel_map<Rewrite>(scenario.test_set.size(), options.jobs,
                                              [&](std::size_t i) { return rewrite_article(p, get(scenario, i), d); });
  auto defended = scenario;
  double utility_sum = 0.0;
  for (std::size_t i = 0; i < rewrites.size(); ++i) {
    if (rewrites[i].utility) {
      ++out.rewritten;
      utility_sum += *rewrites[i].utility;
      get(defended, i).body = rewrites[i].text;
    } else {
      ++out.rejected;
    }
  }
  if (out.rewritten > 0) out.mean_utility = utility_sum / static_cast<double>(out.rewritten);
  out.post = run(defended);
  const json defense_json{{"mode", defense::to_string(d.mode)}, {"k", d.k}, {"utility_floor", d.utility_floor}};
  out.pre.config["defense"] = defense_json;
  out.post.config["defense"] = defense_json;
  return out;
}

}  // namespace

DefenseEvalReport run_defense_eval(const TargetedScenario& scenario, matching::Strategy strategy,
                                   const Pipeline& pipeline, const DefenseConfig& defense,
                                   const EvalOptions& options) {
  return defense_eval(
      scenario, strategy, pipeline, defense, options,
      [](auto& s, std::size_t i) -> auto& { return s.test_set[i].article; },
      [&](const TargetedScenario& s) { return run_targeted(s, strategy, pipeline, options); });
}

DefenseEvalReport run_defense_eval(const OpenWorldScenario& scenario, matching::Strategy strategy,
                                   const Pipeline& pipeline, const DefenseConfig& defense,
                                   const EvalOptions& options) {
  return defense_eval(
      scenario, strategy, pipeline, defense, options, [](auto& s, std::size_t i) -> auto& { return s.test_set[i]; },
      [&](const OpenWorldScenario& s) { return run_open_world(s, strategy, pipeline, options); });
}

// ---- rendering --------------------------------------------------------------

std::string format_table(const std::vector<EvalReport>& reports) {
  std::vector<std::string> columns;
  for (const auto& r : reports) {
    for (const auto& [name, v] : r.metrics) {
      if (std::find(columns.begin(), columns.end(), name) == columns.end()) columns.push_back(name);
    }
  }
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Scenario", "Strategy"};
  header.insert(header.end(), columns.begin(), columns.end());
  header.push_back("n");
  rows.push_back(header);
  for (const auto& r : reports) {
    std::vector<std::string> row{r.kind, std::string(matching::to_string(r.strategy))};
    for (const auto& c : columns) {
      const auto it = r.metrics.find(c);
      row.push_back(it == r.metrics.end() ? "-" : format_metric(it->second));
    }
    const auto n = r.denominators.find("articles");
    row.push_back(n == r.denominators.end() ? "-" : std::to_string(n->second));
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  const auto rule = [&] {
    for (std::size_t i = 0; i < width.size(); ++i) out += std::string(width[i] + (i ? 3 : 0), '-');
    out += '\n';
  };
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (i) out += " | ";
      out += rows[r][i] + std::string(width[i] - rows[r][i].size(), ' ');
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
    if (r == 0) rule();
  }
  return out;
}

std::string plot_csv(const std::vector<PlotPoint>& points) {
  std::string out = "series,x_name,x,y_name,y\n";
  for (const auto& p : points) {
    out += p.series + "," + p.x_name + "," + std::to_string(p.x) + "," + p.y_name + ",";
    if (p.y) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", *p.y);
      out += buf;
    } else {
      out += "NA";
    }
    out += '\n';
  }
  return out;
}

// ---- datasets ---------------------------------------------------------------

DatasetFormat format_for(const std::filesystem::path& path) {
  const auto ext = text::fold_case(path.extension().string());
  if (ext == ".csv") return DatasetFormat::CSV;
  if (ext == ".jsonl" || ext == ".ndjson" || ext == ".json") return DatasetFormat::JSONL;
  throw Error(Errc::InvalidArgument, "cannot tell the dataset format of " + path.string());
}

namespace {

/// Reads one RFC 4180 record; false at end of input. `complete` is false when
/// the input ended inside a quoted field.
bool read_record(std::istream& in, std::vector<std::string>& fields, bool& complete) {
  fields.clear();
  complete = true;
  std::string field;
  bool quoted = false, any = false;
  for (int ch; (ch = in.get()) != EOF;) {
    any = true;
    const char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && in.peek() == '\n') in.get();
      fields.push_back(std::move(field));
      return true;
    } else {
      field += c;
    }
  }
  if (!any) return false;
  complete = !quoted;
  fields.push_back(std::move(field));
  return true;
}

}  // namespace

LoadStats for_each_article(const std::filesystem::path& path, DatasetFormat format,
                           const std::function<void(Article&&)>& sink) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  LoadStats stats;
  const auto skip = [&](std::size_t line, const std::string& why) {
    ++stats.skipped;
    stats.warnings.push_back(path.filename().string() + ":" + std::to_string(line) + ": " + why);
  };

  if (format == DatasetFormat::JSONL) {
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        auto a = article_from_json(json::parse(line));
        ++stats.loaded;
        sink(std::move(a));
      } catch (const json::exception& e) {
        skip(n, e.what());
      } catch (const Error& e) {
        skip(n, e.what());
      }
    }
    return stats;
  }

  static const std::vector<std::string> required{"id", "title", "author", "date", "publication", "topic", "content"};
  std::vector<std::string> header;
  bool complete = true;
  if (!read_record(in, header, complete)) throw Error(Errc::HeaderMismatch, path.string() + " is empty");
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column.emplace(text::fold_case(header[i]), i);
  std::string missing;
  for (const auto& r : required) {
    if (!column.count(r)) missing += (missing.empty() ? "" : ", ") + r;
  }
  if (!missing.empty()) throw Error(Errc::HeaderMismatch, path.string() + " header lacks: " + missing);

  std::vector<std::string> fields;
  for (std::size_t record = 2; read_record(in, fields, complete); ++record) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (!complete) {
      skip(record, "unterminated quoted field");
      break;
    }
    if (fields.size() != header.size()) {
      skip(record, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
      continue;
    }
    json j = json::object();
    for (const auto& r : required) j[r] = fields[column[r]];
    if (fields[column["id"]].empty()) {
      skip(record, "missing id");
      continue;
    }
    try {
      auto a = article_from_json(j);
      ++stats.loaded;
      sink(std::move(a));
    } catch (const Error& e) {
      skip(record, e.what());
    }
  }
  return stats;
}

std::vector<Article> load_dataset(const std::filesystem::path& path, DatasetFormat format, LoadStats* stats) {
  std::vector<Article> out;
  const auto s = for_each_article(path, format, [&](Article&& a) { out.push_back(std::move(a)); });
  if (stats) *stats = s;
  return out;
}

}  // namespace stylo::eval
