#include "stylo/stylometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <unordered_map>

#include "data_files.hpp"
#include "stylo/error.hpp"
#include "stylo/provider.hpp"
#include "stylo/text_core.hpp"

namespace stylo::stylometry {

using nlohmann::json;

namespace {

constexpr std::array<Feature, kScalarFeatureCount> kAllFeatures{
    Feature::UniqueWordCount,   Feature::AvgWordLength,  Feature::TypeTokenRatio,
    Feature::HapaxRatio,        Feature::AvgSentenceLength, Feature::StopwordCount,
    Feature::PunctuationCount,  Feature::PosVariationCount, Feature::FleschScore,
    Feature::Polarity,          Feature::Subjectivity,
};

struct FeatureNames {
  std::string_view key;
  std::string_view label;
  bool count;
};

constexpr std::array<FeatureNames, kScalarFeatureCount> kNames{{
    {"unique_word_count", "unique word count", true},
    {"avg_word_length", "average word length", false},
    {"type_token_ratio", "type-token ratio", false},
    {"hapax_ratio", "hapax legomenon ratio", false},
    {"avg_sentence_length", "average sentence length", false},
    {"stopword_count", "stopword count", true},
    {"punctuation_count", "punctuation count", true},
    {"pos_variation_count", "POS variation count", true},
    {"flesch_score", "Flesch reading ease", false},
    {"polarity", "polarity", false},
    {"subjectivity", "subjectivity", false},
}};

struct SentimentEntry {
  double valence = 0.0;
  bool subjective = false;
};

const std::unordered_map<std::string, SentimentEntry>& sentiment_lexicon() {
  static const auto kMap = [] {
    std::unordered_map<std::string, SentimentEntry> map;
    for (const auto& row : detail::data_rows("sentiment.tsv")) {
      if (row.size() < 3) continue;
      map.emplace(row[0], SentimentEntry{std::stod(row[1]), row[2] == "1"});
    }
    return map;
  }();
  return kMap;
}

std::string lexicon_style_summary(const StylometricProfile& p) {
  const char* length = p.avg_sentence_length < 12 ? "short" : p.avg_sentence_length < 22 ? "medium-length" : "long";
  const char* vocab = p.type_token_ratio > 0.7 ? "varied" : p.type_token_ratio > 0.5 ? "moderately varied" : "repetitive";
  const char* tone = p.polarity > 0.1 ? "positive" : p.polarity < -0.1 ? "negative" : "neutral";
  const char* stance = p.subjectivity > 0.05 ? "opinionated" : "factual";
  const char* ease = p.flesch_score >= 60 ? "plain" : p.flesch_score >= 30 ? "moderately complex" : "dense";
  return std::string(length) + " sentences, " + vocab + " vocabulary, " + ease + " wording, " + tone + " " +
         stance + " tone";
}

void semantic_from_provider(std::string_view text, provider::Provider& provider, StylometricProfile& p) {
  // Long articles are clipped; tone is judged from the opening.
  constexpr std::size_t kMaxChars = 8000;
  const auto prompt = detail::render_prompt(
      "semantic_features.txt", {{"TEXT", text.substr(0, std::min(text.size(), kMaxChars))}});
  const auto reply = provider::request_json(provider, provider::ChatRequest::user(prompt), [](const json& j) {
    const auto pol = j.at("polarity").get<double>();
    const auto subj = j.at("subjectivity").get<double>();
    if (pol < -1.0 || pol > 1.0 || subj < 0.0 || subj > 1.0) {
      throw Error(Errc::ParseError, "semantic scores out of range");
    }
  });
  p.polarity = reply.at("polarity").get<double>();
  p.subjectivity = reply.at("subjectivity").get<double>();
  if (auto it = reply.find("style_summary"); it != reply.end() && it->is_string()) {
    p.style_summary = it->get<std::string>();
  }
}

}  // namespace

std::span<const Feature> numeric_features() { return std::span(kAllFeatures).first(kNumericFeatureCount); }
std::span<const Feature> scalar_features() { return kAllFeatures; }

std::string_view feature_key(Feature f) { return kNames[static_cast<std::size_t>(f)].key; }
std::string_view feature_label(Feature f) { return kNames[static_cast<std::size_t>(f)].label; }
bool is_count_feature(Feature f) { return kNames[static_cast<std::size_t>(f)].count; }

std::optional<Feature> feature_from_key(std::string_view key) {
  for (const auto f : kAllFeatures) {
    if (feature_key(f) == key) return f;
  }
  return std::nullopt;
}

double StylometricProfile::value(Feature f) const {
  return const_cast<StylometricProfile*>(this)->value(f);
}

double& StylometricProfile::value(Feature f) {
  switch (f) {
    case Feature::UniqueWordCount: return unique_word_count;
    case Feature::AvgWordLength: return avg_word_length;
    case Feature::TypeTokenRatio: return type_token_ratio;
    case Feature::HapaxRatio: return hapax_ratio;
    case Feature::AvgSentenceLength: return avg_sentence_length;
    case Feature::StopwordCount: return stopword_count;
    case Feature::PunctuationCount: return punctuation_count;
    case Feature::PosVariationCount: return pos_variation_count;
    case Feature::FleschScore: return flesch_score;
    case Feature::Polarity: return polarity;
    case Feature::Subjectivity: return subjectivity;
  }
  return unique_word_count;
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string out(buf);
  if (out == "-0" || out.find_first_not_of("-0.") == std::string::npos) {
    if (out.front() == '-') out.erase(0, 1);
  }
  return out;
}

StylometricProfile compute_features(std::string_view text, SemanticSource source, provider::Provider* provider) {
  const auto seg = text::analyze(text);

  std::map<std::string, int> freq;
  std::set<text::PosTag> tags;
  double total_words = 0;
  double word_chars = 0;
  double syllables = 0;
  double stopwords = 0;
  double punctuation = 0;
  double valence_sum = 0;
  double valence_matches = 0;
  double subjective_words = 0;
  const auto& lexicon = sentiment_lexicon();

  for (const auto& t : seg.tokens) {
    if (t.kind == text::TokenKind::Punctuation) {
      ++punctuation;
      continue;
    }
    tags.insert(t.pos);
    if (t.kind != text::TokenKind::Word) continue;
    ++total_words;
    ++freq[t.lower];
    word_chars += static_cast<double>(text::utf8_length(t.surface));
    syllables += text::count_syllables(t.lower);
    if (text::is_stopword(t.lower)) ++stopwords;
    if (auto it = lexicon.find(t.lower); it != lexicon.end()) {
      valence_sum += it->second.valence;
      ++valence_matches;
      if (it->second.subjective) ++subjective_words;
    }
  }
  if (total_words == 0) throw Error(Errc::EmptyText, "text contains no words");

  double sentences = 0;
  for (std::size_t i = 0; i < seg.sentences.size(); ++i) {
    const auto s = seg.sentence(i);
    if (std::any_of(s.begin(), s.end(), [](const text::Token& t) { return t.kind == text::TokenKind::Word; })) {
      ++sentences;
    }
  }

  StylometricProfile p;
  const double unique = static_cast<double>(freq.size());
  const double hapax = static_cast<double>(
      std::count_if(freq.begin(), freq.end(), [](const auto& kv) { return kv.second == 1; }));
  p.unique_word_count = unique;
  p.avg_word_length = word_chars / total_words;
  p.type_token_ratio = unique / total_words;
  p.hapax_ratio = hapax / unique;
  p.avg_sentence_length = total_words / sentences;
  p.stopword_count = stopwords;
  p.punctuation_count = punctuation;
  p.pos_variation_count = static_cast<double>(tags.size());
  p.flesch_score = 206.835 - 1.015 * (total_words / sentences) - 84.6 * (syllables / total_words);

  if (source == SemanticSource::Provider) {
    if (provider == nullptr) throw Error(Errc::InvalidArgument, "provider semantic source needs a provider");
    semantic_from_provider(text, *provider, p);
    if (p.style_summary.empty()) p.style_summary = lexicon_style_summary(p);
  } else {
    p.polarity = valence_matches > 0 ? valence_sum / valence_matches : 0.0;
    p.subjectivity = subjective_words / total_words;
    p.style_summary = lexicon_style_summary(p);
  }
  return p;
}

double AggregatedProfile::stddev(Feature f) const {
  if (count_ == 0) return 0.0;
  const auto& s = stats_[static_cast<std::size_t>(f)];
  return std::sqrt(std::max(0.0, s.m2 / static_cast<double>(count_)));
}

void AggregatedProfile::merge_summary(const std::string& summary) {
  if (summary.empty() || std::find(seen_summaries_.begin(), seen_summaries_.end(), summary) != seen_summaries_.end()) {
    return;
  }
  seen_summaries_.push_back(summary);
  if (style_summary_.size() >= kStyleSummaryCap) return;
  if (!style_summary_.empty()) style_summary_ += " | ";
  style_summary_ += summary;
  if (style_summary_.size() > kStyleSummaryCap) {
    std::size_t cut = kStyleSummaryCap;
    while (cut > 0 && (static_cast<unsigned char>(style_summary_[cut]) & 0xC0) == 0x80) --cut;
    style_summary_.resize(cut);
  }
}

void AggregatedProfile::add(const StylometricProfile& sample) {
  ++count_;
  const double n = static_cast<double>(count_);
  for (const auto f : kAllFeatures) {
    auto& s = stats_[static_cast<std::size_t>(f)];
    const double x = sample.value(f);
    const double delta = x - s.mean;
    s.mean += delta / n;
    s.m2 += delta * (x - s.mean);
  }
  merge_summary(sample.style_summary);
}

StylometricProfile AggregatedProfile::means() const {
  StylometricProfile p;
  for (const auto f : kAllFeatures) p.value(f) = mean(f);
  p.style_summary = style_summary_;
  return p;
}

AggregatedProfile AggregatedProfile::from_moments(std::size_t count,
                                                  const std::array<RunningStat, kScalarFeatureCount>& stats,
                                                  std::string style_summary) {
  AggregatedProfile a;
  a.count_ = count;
  a.stats_ = stats;
  a.style_summary_ = std::move(style_summary);
  return a;
}

json AggregatedProfile::to_json() const {
  json features = json::object();
  for (const auto f : kAllFeatures) {
    const auto& s = stat(f);
    features[std::string(feature_key(f))] = {{"mean", s.mean}, {"std", stddev(f)}, {"m2", s.m2}};
  }
  return {{"sample_count", count_},
          {"features", features},
          {"style_summary", style_summary_},
          {"summaries", seen_summaries_}};
}

AggregatedProfile AggregatedProfile::from_json(const json& j) {
  AggregatedProfile a;
  a.count_ = j.at("sample_count").get<std::size_t>();
  const auto& features = j.at("features");
  for (const auto f : kAllFeatures) {
    const auto& entry = features.at(std::string(feature_key(f)));
    auto& s = a.stats_[static_cast<std::size_t>(f)];
    s.mean = entry.at("mean").get<double>();
    s.m2 = entry.at("m2").get<double>();
  }
  a.style_summary_ = j.value("style_summary", "");
  if (auto it = j.find("summaries"); it != j.end()) a.seen_summaries_ = it->get<std::vector<std::string>>();
  return a;
}

AggregatedProfile aggregate(std::span<const StylometricProfile> profiles) {
  if (profiles.empty()) throw Error(Errc::EmptyList, "cannot aggregate an empty profile list");
  const double n = static_cast<double>(profiles.size());
  std::array<RunningStat, kScalarFeatureCount> stats{};
  for (const auto f : kAllFeatures) {
    auto& s = stats[static_cast<std::size_t>(f)];
    double sum = 0.0;
    for (const auto& p : profiles) sum += p.value(f);
    s.mean = sum / n;
    for (const auto& p : profiles) {
      const double d = p.value(f) - s.mean;
      s.m2 += d * d;
    }
  }
  // Summaries merge in sample order, the same way incremental adds do.
  AggregatedProfile out;
  for (const auto& p : profiles) out.merge_summary(p.style_summary);
  out.count_ = profiles.size();
  out.stats_ = stats;
  return out;
}

ReferenceStats ReferenceStats::from(const AggregatedProfile& profile) {
  ReferenceStats r;
  for (const auto f : kAllFeatures) {
    const auto i = static_cast<std::size_t>(f);
    r.mean[i] = profile.mean(f);
    r.spread[i] = profile.stddev(f);
  }
  r.sample_count = profile.sample_count();
  return r;
}

ReferenceStats ReferenceStats::from(const StylometricProfile& profile) {
  ReferenceStats r;
  for (const auto f : kAllFeatures) {
    const auto i = static_cast<std::size_t>(f);
    r.mean[i] = profile.value(f);
    r.spread[i] = std::max(kSurrogateRelativeStd * std::abs(profile.value(f)), kStdFloor);
  }
  r.sample_count = 1;
  return r;
}

FeatureDistance feature_distance(const StylometricProfile& article, const ReferenceStats& reference) {
  FeatureDistance d;
  double sum = 0.0;
  for (std::size_t i = 0; i < kNumericFeatureCount; ++i) {
    const auto f = kAllFeatures[i];
    d.z[i] = std::abs(article.value(f) - reference.mean[i]) / std::max(reference.spread[i], kStdFloor);
    sum += d.z[i];
  }
  d.mean_z = sum / static_cast<double>(kNumericFeatureCount);
  return d;
}

FeatureDistance feature_distance(const StylometricProfile& article, const AggregatedProfile& author) {
  return feature_distance(article, ReferenceStats::from(author));
}

std::string describe_features(const StylometricProfile& profile, std::string_view label) {
  std::string out;
  for (const auto f : kAllFeatures) {
    out += label;
    out += ": ";
    out += feature_label(f);
    out += " = ";
    const double v = profile.value(f);
    out += is_count_feature(f) ? format_fixed(v, 0) : format_fixed(v);
    out += '\n';
  }
  out += label;
  out += ": writing style = ";
  out += profile.style_summary.empty() ? "n/a" : profile.style_summary;
  out += '\n';
  return out;
}

std::string describe_features(const AggregatedProfile& profile, std::string_view label) {
  std::string out;
  for (const auto f : kAllFeatures) {
    out += label;
    out += ": ";
    out += feature_label(f);
    out += " = ";
    out += format_fixed(profile.mean(f));
    out += " \xC2\xB1 ";
    out += format_fixed(profile.stddev(f));
    out += '\n';
  }
  out += label;
  out += ": writing style = ";
  out += profile.style_summary().empty() ? "n/a" : profile.style_summary();
  out += " (over ";
  out += std::to_string(profile.sample_count());
  out += " samples)\n";
  return out;
}

json to_json(const StylometricProfile& profile) {
  json j = json::object();
  for (const auto f : kAllFeatures) j[std::string(feature_key(f))] = profile.value(f);
  j["style_summary"] = profile.style_summary;
  return j;
}

StylometricProfile profile_from_json(const json& j) {
  StylometricProfile p;
  for (const auto f : kAllFeatures) p.value(f) = j.at(std::string(feature_key(f))).get<double>();
  p.style_summary = j.value("style_summary", "");
  return p;
}

}  // namespace stylo::stylometry
