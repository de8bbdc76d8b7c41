#include "stylo/defense.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>

#include "data_files.hpp"
#include "stylo/text_core.hpp"

namespace stylo::defense {

using nlohmann::json;
using stylometry::Feature;

namespace {

// ---- text as editable pieces ------------------------------------------------

struct Piece {
  std::string gap;  ///< whitespace preceding the token in the source
  std::string text;
  text::TokenKind kind = text::TokenKind::Word;
  std::string lower;
};

using Sentence = std::vector<Piece>;

struct Doc {
  std::vector<Sentence> sentences;
  std::string tail;
};

Doc parse(std::string_view source) {
  const auto seg = text::analyze(source);
  Doc doc;
  std::size_t cursor = 0;
  for (std::size_t s = 0; s < seg.sentences.size(); ++s) {
    Sentence sentence;
    for (const auto& t : seg.sentence(s)) {
      Piece p;
      // Bytes the tokenizer skipped (whitespace, control characters) stay as the gap.
      p.gap = std::string(source.substr(cursor, t.offset - cursor));
      p.text = t.surface;
      p.kind = t.kind;
      p.lower = t.lower;
      cursor = t.offset + t.surface.size();
      sentence.push_back(std::move(p));
    }
    doc.sentences.push_back(std::move(sentence));
  }
  doc.tail = std::string(source.substr(cursor));
  return doc;
}

std::string render(const Doc& doc) {
  std::string out;
  for (const auto& s : doc.sentences) {
    for (const auto& p : s) out += p.gap + p.text;
  }
  return out + doc.tail;
}

Piece word(std::string text, std::string gap = " ") {
  Piece p;
  p.gap = std::move(gap);
  p.lower = text::fold_case(text);
  p.text = std::move(text);
  return p;
}

Piece punct(std::string text, std::string gap = "") {
  Piece p;
  p.gap = std::move(gap);
  p.lower = text;
  p.text = std::move(text);
  p.kind = text::TokenKind::Punctuation;
  return p;
}

bool is_word(const Piece& p) { return p.kind == text::TokenKind::Word; }

std::size_t word_count(const Sentence& s) { return std::count_if(s.begin(), s.end(), is_word); }

double average_length(const Doc& doc) {
  std::size_t words = 0, sentences = 0;
  for (const auto& s : doc.sentences) {
    const auto n = word_count(s);
    words += n;
    sentences += n > 0;
  }
  return sentences ? static_cast<double>(words) / static_cast<double>(sentences) : 0.0;
}

void capitalize(Piece& p) {
  if (!p.text.empty() && std::islower(static_cast<unsigned char>(p.text[0]))) {
    p.text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(p.text[0])));
  }
}

/// Lower-cases a sentence-initial function word ("The" -> "the"); content
/// words may be names and keep their case.
void decapitalize(Piece& p) {
  if (!is_word(p) || p.text.size() < 2 || p.lower == "i" || !text::is_stopword(p.lower)) return;
  if (std::isupper(static_cast<unsigned char>(p.text[0])) && std::islower(static_cast<unsigned char>(p.text[1]))) {
    p.text[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(p.text[0])));
  }
}

std::string match_case(const std::string& replacement, const std::string& original) {
  auto out = replacement;
  if (!original.empty() && std::isupper(static_cast<unsigned char>(original[0])) && !out.empty()) {
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  }
  return out;
}

// ---- edit families ----------------------------------------------------------

/// Splits a sentence of four or more words near its middle, preferring a
/// comma or a coordinating conjunction as the cut.
bool split_sentence(Doc& doc, std::size_t index) {
  const auto& s = doc.sentences[index];
  std::vector<std::size_t> word_at;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (is_word(s[i])) word_at.push_back(i);
  }
  if (word_at.size() < 4) return false;
  static const std::set<std::string> conjunctions{"and", "but", "so", "or"};

  // Candidate cuts: piece index where the second sentence starts, at least two words each side.
  std::size_t best = 0;
  double best_cost = 1e9;
  const double middle = static_cast<double>(word_at.size()) / 2.0;
  for (std::size_t w = 2; w + 2 <= word_at.size(); ++w) {
    const auto at = word_at[w];
    const bool natural = conjunctions.count(s[at].lower) || (at > 0 && s[at - 1].text == ",");
    const double cost = std::abs(static_cast<double>(w) - middle) - (natural ? 1.5 : 0.0);
    if (cost < best_cost) {
      best_cost = cost;
      best = at;
    }
  }
  Sentence first(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(best));
  Sentence second(s.begin() + static_cast<std::ptrdiff_t>(best), s.end());
  while (!first.empty() && first.back().kind == text::TokenKind::Punctuation &&
         (first.back().text == "," || first.back().text == ";" || first.back().text == ":")) {
    first.pop_back();
  }
  if (conjunctions.count(second.front().lower) && word_count(second) > 2) second.erase(second.begin());
  first.push_back(punct("."));
  if (second.front().gap.empty()) second.front().gap = " ";
  capitalize(second.front());
  doc.sentences[index] = std::move(first);
  doc.sentences.insert(doc.sentences.begin() + static_cast<std::ptrdiff_t>(index) + 1, std::move(second));
  return true;
}

bool merge_sentences(Doc& doc, std::size_t index) {
  if (index + 1 >= doc.sentences.size()) return false;
  auto& a = doc.sentences[index];
  auto& b = doc.sentences[index + 1];
  if (a.empty() || b.empty() || a.back().text != "." || word_count(a) == 0 || !is_word(b.front())) return false;
  Sentence merged(a.begin(), a.end() - 1);
  merged.push_back(punct(","));
  merged.push_back(word("and"));
  Sentence rest = b;
  rest.front().gap = " ";
  decapitalize(rest.front());
  merged.insert(merged.end(), rest.begin(), rest.end());
  doc.sentences[index] = std::move(merged);
  doc.sentences.erase(doc.sentences.begin() + static_cast<std::ptrdiff_t>(index) + 1);
  return true;
}

/// Splits the longest sentences until the average drops to 70% of the original.
std::optional<std::string> shorten_sentences(const Doc& original) {
  Doc doc = original;
  const double target = 0.7 * average_length(original);
  bool changed = false;
  while (average_length(doc) > target) {
    std::size_t longest = 0;
    for (std::size_t i = 1; i < doc.sentences.size(); ++i) {
      if (word_count(doc.sentences[i]) > word_count(doc.sentences[longest])) longest = i;
    }
    if (doc.sentences.empty() || !split_sentence(doc, longest)) break;
    changed = true;
  }
  if (!changed) return std::nullopt;
  return render(doc);
}

/// Merges the shortest adjacent pairs until the average reaches 130% of the original.
std::optional<std::string> lengthen_sentences(const Doc& original) {
  Doc doc = original;
  const double target = 1.3 * average_length(original);
  bool changed = false;
  while (average_length(doc) < target) {
    std::size_t best = doc.sentences.size();
    std::size_t best_len = SIZE_MAX;
    for (std::size_t i = 0; i + 1 < doc.sentences.size(); ++i) {
      const auto len = word_count(doc.sentences[i]) + word_count(doc.sentences[i + 1]);
      if (len < best_len && doc.sentences[i].back().text == "." && is_word(doc.sentences[i + 1].front())) {
        best = i;
        best_len = len;
      }
    }
    if (best == doc.sentences.size() || !merge_sentences(doc, best)) break;
    changed = true;
  }
  if (!changed) return std::nullopt;
  return render(doc);
}

const std::unordered_map<std::string, std::vector<std::string>>& thesaurus() {
  static const auto table = [] {
    std::unordered_map<std::string, std::vector<std::string>> t;
    for (const auto& row : detail::data_rows("thesaurus.tsv")) {
      if (row.size() < 2) continue;
      std::vector<std::string> synonyms;
      std::string current;
      for (const char c : row[1] + ",") {
        if (c == ',') {
          if (!current.empty()) synonyms.push_back(current);
          current.clear();
        } else {
          current += c;
        }
      }
      if (!synonyms.empty()) t.emplace(row[0], std::move(synonyms));
    }
    return t;
  }();
  return table;
}

std::optional<std::string> substitute_rare_words(const Doc& original) {
  Doc doc = original;
  std::map<std::string, int> counts;
  for (const auto& s : doc.sentences) {
    for (const auto& p : s) {
      if (is_word(p)) ++counts[p.lower];
    }
  }
  bool changed = false;
  for (auto& s : doc.sentences) {
    for (auto& p : s) {
      if (!is_word(p) || counts[p.lower] != 1) continue;
      const auto it = thesaurus().find(p.lower);
      if (it == thesaurus().end()) continue;
      p.text = match_case(it->second.front(), p.text);
      p.lower = text::fold_case(p.text);
      changed = true;
    }
  }
  if (!changed) return std::nullopt;
  return render(doc);
}

std::optional<std::string> expand_contractions(const Doc& original) {
  static const std::map<std::string, std::vector<std::string>> table{
      {"don't", {"do", "not"}},       {"doesn't", {"does", "not"}},   {"didn't", {"did", "not"}},
      {"can't", {"cannot"}},          {"won't", {"will", "not"}},     {"isn't", {"is", "not"}},
      {"aren't", {"are", "not"}},     {"wasn't", {"was", "not"}},     {"weren't", {"were", "not"}},
      {"it's", {"it", "is"}},         {"that's", {"that", "is"}},     {"there's", {"there", "is"}},
      {"i'm", {"I", "am"}},           {"we're", {"we", "are"}},       {"they're", {"they", "are"}},
      {"you're", {"you", "are"}},     {"i've", {"I", "have"}},        {"we've", {"we", "have"}},
      {"they've", {"they", "have"}},  {"couldn't", {"could", "not"}}, {"wouldn't", {"would", "not"}},
      {"shouldn't", {"should", "not"}}, {"hasn't", {"has", "not"}},   {"haven't", {"have", "not"}},
      {"hadn't", {"had", "not"}},     {"let's", {"let", "us"}},       {"he's", {"he", "is"}},
      {"she's", {"she", "is"}}};
  Doc doc = original;
  bool changed = false;
  for (auto& s : doc.sentences) {
    Sentence out;
    for (auto& p : s) {
      auto key = p.lower;
      for (std::size_t pos; (pos = key.find("\xE2\x80\x99")) != std::string::npos;) key.replace(pos, 3, "'");
      const auto it = is_word(p) ? table.find(key) : table.end();
      if (it == table.end()) {
        out.push_back(std::move(p));
        continue;
      }
      for (std::size_t i = 0; i < it->second.size(); ++i) {
        auto w = word(i == 0 ? match_case(it->second[i], p.text) : it->second[i], i == 0 ? p.gap : " ");
        out.push_back(std::move(w));
      }
      changed = true;
    }
    s = std::move(out);
  }
  if (!changed) return std::nullopt;
  return render(doc);
}

std::optional<std::string> drop_intensifiers(const Doc& original) {
  static const std::set<std::string> intensifiers{"very", "really", "just", "quite"};
  Doc doc = original;
  bool changed = false;
  for (auto& s : doc.sentences) {
    for (std::size_t i = 0; i + 1 < s.size();) {
      if (is_word(s[i]) && intensifiers.count(s[i].lower) && is_word(s[i + 1]) && word_count(s) > 2) {
        const bool initial = i == 0;
        s[i + 1].gap = s[i].gap;
        s.erase(s.begin() + static_cast<std::ptrdiff_t>(i));
        if (initial) capitalize(s[0]);
        changed = true;
      } else {
        ++i;
      }
    }
  }
  if (!changed) return std::nullopt;
  return render(doc);
}

std::optional<std::string> add_that(const Doc& original) {
  Doc doc = original;
  bool changed = false;
  for (auto& s : doc.sentences) {
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      if (is_word(s[i]) && (s[i].lower == "said" || s[i].lower == "says") && is_word(s[i + 1]) &&
          s[i + 1].lower != "that") {
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(i) + 1, word("that"));
        changed = true;
      }
    }
  }
  if (!changed) return std::nullopt;
  return render(doc);
}

std::optional<std::string> drop_commas(const Doc& original, bool only_before_conjunctions) {
  static const std::set<std::string> conjunctions{"and", "but", "or", "so"};
  Doc doc = original;
  bool changed = false;
  for (auto& s : doc.sentences) {
    for (std::size_t i = 0; i < s.size();) {
      const bool comma = s[i].text == ",";
      const bool before_conj = i + 1 < s.size() && conjunctions.count(s[i + 1].lower);
      if (comma && (!only_before_conjunctions || before_conj)) {
        s.erase(s.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
      } else {
        ++i;
      }
    }
  }
  if (!changed) return std::nullopt;
  return render(doc);
}

std::optional<std::string> semicolons_to_periods(const Doc& original) {
  Doc doc = original;
  bool changed = false;
  for (auto& s : doc.sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i].text != ";") continue;
      s[i].text = s[i].lower = ".";
      if (i + 1 < s.size()) capitalize(s[i + 1]);
      changed = true;
    }
  }
  if (!changed) return std::nullopt;
  return render(doc);
}

std::optional<std::string> comma_before_and(const Doc& original) {
  Doc doc = original;
  bool changed = false;
  for (auto& s : doc.sentences) {
    if (word_count(s) < 8) continue;
    for (std::size_t i = 3; i < s.size(); ++i) {
      if (is_word(s[i]) && s[i].lower == "and" && is_word(s[i - 1])) {
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(i), punct(","));
        changed = true;
        break;
      }
    }
  }
  if (!changed) return std::nullopt;
  return render(doc);
}

struct EditFamily {
  std::string name;
  std::vector<Feature> moves;
  std::vector<std::pair<std::string, std::function<std::optional<std::string>(const Doc&)>>> variants;
};

const std::vector<EditFamily>& edit_families() {
  static const std::vector<EditFamily> families{
      {"sentence length",
       {Feature::AvgSentenceLength, Feature::FleschScore, Feature::PunctuationCount, Feature::StopwordCount,
        Feature::TypeTokenRatio},
       {{"split long sentences", shorten_sentences}, {"merge short sentences", lengthen_sentences}}},
      {"rare words",
       {Feature::HapaxRatio, Feature::TypeTokenRatio, Feature::UniqueWordCount, Feature::AvgWordLength,
        Feature::FleschScore},
       {{"substitute rare words", substitute_rare_words}}},
      {"function words",
       {Feature::StopwordCount, Feature::TypeTokenRatio, Feature::AvgSentenceLength, Feature::AvgWordLength,
        Feature::PosVariationCount},
       {{"expand contractions", expand_contractions},
        {"drop intensifiers", drop_intensifiers},
        {"add 'that' after reporting verbs", add_that}}},
      {"punctuation",
       {Feature::PunctuationCount},
       {{"drop commas before conjunctions", [](const Doc& d) { return drop_commas(d, true); }},
        {"drop commas", [](const Doc& d) { return drop_commas(d, false); }},
        {"semicolons to periods", semicolons_to_periods},
        {"comma before 'and'", comma_before_and}}},
  };
  return families;
}

json outcome_match(const matching::MatchResult& r) { return matching::to_json(r); }

}  // namespace

std::string_view to_string(DefenseMode m) {
  switch (m) {
    case DefenseMode::GuidedRecompose: return "guided_recompose";
    case DefenseMode::DirectParaphrase: return "direct_paraphrase";
    case DefenseMode::RuleBased: return "rule_based";
    case DefenseMode::NoOp: return "no_op";
  }
  return "?";
}

DefenseMode defense_mode_from_string(std::string_view s) {
  auto l = text::fold_case(s);
  l.erase(std::remove_if(l.begin(), l.end(), [](char c) { return c == '_' || c == '-'; }), l.end());
  if (l == "guided" || l == "guidedrecompose" || l == "recompose") return DefenseMode::GuidedRecompose;
  if (l == "paraphrase" || l == "directparaphrase") return DefenseMode::DirectParaphrase;
  if (l == "rules" || l == "rulebased") return DefenseMode::RuleBased;
  if (l == "none" || l == "noop") return DefenseMode::NoOp;
  throw Error(Errc::InvalidArgument,
              "unknown defense mode '" + std::string(s) + "' (expected guided, paraphrase, rules or none)");
}

const std::string& directive_for(Feature f) {
  static const auto table = [] {
    std::map<Feature, std::string> t;
    for (const auto& row : detail::data_rows("directives.tsv")) {
      if (row.size() < 2) continue;
      if (const auto feature = stylometry::feature_from_key(row[0])) t[*feature] = row[1];
    }
    return t;
  }();
  const auto it = table.find(f);
  if (it == table.end()) {
    throw Error(Errc::NotFound, "no rewrite directive for " + std::string(stylometry::feature_key(f)));
  }
  return it->second;
}

RewritePlan build_suggestions(const pipeline::ReflectionReport& report, std::size_t k, double utility_floor) {
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be at least 1");
  if (report.ranked.empty()) throw Error(Errc::InvalidArgument, "reflection report has no ranked features");
  if (!(utility_floor >= 0.0 && utility_floor <= 1.0)) {
    throw Error(Errc::InvalidArgument, "utility floor must lie in [0, 1]");
  }
  RewritePlan plan;
  plan.utility_floor = utility_floor;
  for (std::size_t i = 0; i < std::min(k, report.ranked.size()); ++i) {
    plan.target_features.push_back(report.ranked[i].feature);
    plan.suggestions.push_back(directive_for(report.ranked[i].feature));
  }
  return plan;
}

std::string build_recompose_prompt(std::string_view article_text, const RewritePlan& plan) {
  std::string numbered;
  for (std::size_t i = 0; i < plan.suggestions.size(); ++i) {
    numbered += std::to_string(i + 1) + ". " + plan.suggestions[i];
    if (i + 1 < plan.suggestions.size()) numbered += "\n";
  }
  return detail::render_prompt("recompose.txt", {{"SUGGESTIONS", numbered}, {"ARTICLE", article_text}});
}

std::string build_paraphrase_prompt(std::string_view article_text) {
  return detail::render_prompt("paraphrase.txt", {{"ARTICLE", article_text}});
}

UtilityBelowFloor::UtilityBelowFloor(double utility, double floor, std::string rewritten)
    : Error(Errc::UtilityBelowFloor, "rewrite utility " + stylometry::format_fixed(utility) + " is below the floor " +
                                         stylometry::format_fixed(floor)),
      utility_(utility),
      rewritten_(std::move(rewritten)) {}

json DefenseOutcome::to_json(bool include_text) const {
  json j{{"mode", to_string(mode)},
         {"utility", utility},
         {"utility_floor", utility_floor},
         {"pre", outcome_match(pre)},
         {"post", outcome_match(post)},
         {"likelihood_delta", post.likelihood - pre.likelihood},
         {"suggestions", suggestions_used},
         {"steps_applied", steps_applied}};
  if (include_text) j["rewritten_text"] = rewritten_text;
  return j;
}

RuleRewrite rule_based_rewrite(std::string_view article_text, const RewritePlan& plan,
                               const stylometry::ReferenceStats& reference, provider::Provider& provider) {
  const auto original_embedding = provider.embed(article_text);
  const auto mean_z = [&](const std::string& text) {
    return stylometry::feature_distance(stylometry::compute_features(text), reference).mean_z;
  };

  RuleRewrite best{std::string(article_text), {}, mean_z(std::string(article_text)), 1.0};
  for (const auto& family : edit_families()) {
    const bool targeted = std::any_of(family.moves.begin(), family.moves.end(), [&](Feature f) {
      return std::find(plan.target_features.begin(), plan.target_features.end(), f) != plan.target_features.end();
    });
    if (!targeted) continue;

    const Doc doc = parse(best.text);
    std::optional<RuleRewrite> chosen;
    for (const auto& [name, variant] : family.variants) {
      const auto candidate = variant(doc);
      if (!candidate || *candidate == best.text) continue;
      double z = 0.0;
      try {
        z = mean_z(*candidate);
      } catch (const Error& e) {
        if (e.code() == Errc::EmptyText) continue;
        throw;
      }
      if (!(z > best.mean_z)) continue;
      const double utility = provider::cosine(original_embedding, provider.embed(*candidate));
      if (utility < plan.utility_floor) continue;
      if (!chosen || z > chosen->mean_z) {
        auto steps = best.steps;
        steps.push_back(name);
        chosen = RuleRewrite{*candidate, std::move(steps), z, utility};
      }
    }
    if (chosen) best = std::move(*chosen);
  }
  return best;
}

DefenseOutcome apply_defense(std::string_view article_text, const RewritePlan& plan, DefenseMode mode,
                             const pipeline::Pipeline& pipeline, const pipeline::Candidate& matched,
                             pipeline::Mode candidate_mode) {
  if (text::tokenize(article_text).empty()) throw Error(Errc::EmptyText, "nothing to rewrite");
  auto& provider = pipeline.provider();
  const auto source = pipeline.config().semantic_source;

  DefenseOutcome out;
  out.mode = mode;
  out.utility_floor = plan.utility_floor;
  out.suggestions_used = plan.suggestions;
  const auto subject = matching::prepare_subject(std::string(article_text), provider, source);
  out.pre = pipeline.match_candidate(subject, matched, candidate_mode);

  switch (mode) {
    case DefenseMode::NoOp:
      out.rewritten_text = std::string(article_text);
      out.suggestions_used.clear();
      break;
    case DefenseMode::RuleBased: {
      const auto reference = pipeline.reference_of(matched);
      if (!reference) throw Error(Errc::EmptyList, "matched author has no reference profile");
      auto rewrite = rule_based_rewrite(article_text, plan, *reference, provider);
      out.rewritten_text = std::move(rewrite.text);
      out.steps_applied = std::move(rewrite.steps);
      break;
    }
    case DefenseMode::GuidedRecompose:
    case DefenseMode::DirectParaphrase: {
      const auto prompt = mode == DefenseMode::GuidedRecompose ? build_recompose_prompt(article_text, plan)
                                                               : build_paraphrase_prompt(article_text);
      if (mode == DefenseMode::DirectParaphrase) out.suggestions_used.clear();
      out.rewritten_text = provider.chat(provider::ChatRequest::user(prompt));
      break;
    }
  }

  if (mode == DefenseMode::NoOp) {
    out.utility = 1.0;
    out.post = out.pre;
    return out;
  }
  out.utility = provider::cosine(subject.embedding, provider.embed(out.rewritten_text));
  if (out.utility < plan.utility_floor) throw UtilityBelowFloor(out.utility, plan.utility_floor, out.rewritten_text);
  const auto rewritten = matching::prepare_subject(out.rewritten_text, provider, source);
  out.post = pipeline.match_candidate(rewritten, matched, candidate_mode);
  return out;
}

json DefenseRun::to_json() const {
  return json{{"before", before.to_json()},
              {"suggestions", plan.suggestions},
              {"outcome", outcome.to_json()},
              {"after", after.to_json()}};
}

DefenseRun defend(const pipeline::Pipeline& pipeline, const Article& article, DefenseMode mode, std::size_t k,
                  double utility_floor) {
  DefenseRun run;
  run.before = pipeline.assess(article);
  const auto& best = run.before.ranked_matches.front().author;
  const auto& candidates = run.before.candidates.candidates;
  const auto matched = std::find_if(candidates.begin(), candidates.end(),
                                    [&](const pipeline::Candidate& c) { return c.author == best; });
  if (mode == DefenseMode::NoOp) {
    run.plan.utility_floor = utility_floor;
  } else {
    run.plan = build_suggestions(run.before.reflection, k, utility_floor);
  }
  run.outcome = apply_defense(article.body, run.plan, mode, pipeline, *matched, run.before.candidates.mode);
  Article rewritten = article;
  rewritten.body = run.outcome.rewritten_text;
  run.after = pipeline.assess(rewritten);
  return run;
}

}  // namespace stylo::defense
