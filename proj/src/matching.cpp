#include "stylo/matching.hpp"

#include <algorithm>
#include <numeric>

#include "data_files.hpp"
#include "stylo/error.hpp"
#include "stylo/text_core.hpp"

namespace stylo::matching {

using nlohmann::json;
using stylometry::Feature;
using stylometry::StylometricProfile;

namespace {

std::optional<Verdict> verdict_from_string(std::string_view s) {
  const auto lower = text::fold_case(s);
  if (lower == "same") return Verdict::Same;
  if (lower == "different") return Verdict::Different;
  if (lower == "uncertain") return Verdict::Uncertain;
  return std::nullopt;
}

/// The model's reply for one comparison, or nullopt when it never parsed.
/// Offline providers get `offline_reply` instead of a chat round trip.
std::optional<ParsedReply> ask(provider::Provider& provider, const std::string& prompt,
                               const std::function<json()>& offline_reply) {
  try {
    if (provider.offline()) return parse_reply(json::parse(offline_reply().dump()));
    const auto reply = provider::request_json(provider, provider::ChatRequest::user(prompt),
                                              [](const json& j) { parse_reply(j); });
    return parse_reply(reply);
  } catch (const Error& e) {
    if (e.code() != Errc::ParseError) throw;
    return std::nullopt;
  }
}

json shim_reply(double likelihood, std::vector<std::string> key_features) {
  return json{{"likelihood", likelihood},
              {"verdict", likelihood >= kDefaultThreshold ? "same" : "different"},
              {"key_features", std::move(key_features)}};
}

int bin(double value, double low, double high) { return value < low ? 0 : (value < high ? 1 : 2); }

std::array<int, 3> qualitative_bins(const StylometricProfile& p) {
  const double words = p.type_token_ratio > 0.0 ? p.unique_word_count / p.type_token_ratio : 0.0;
  const double punctuation_rate = words > 0.0 ? p.punctuation_count / words : 0.0;
  return {bin(p.avg_sentence_length, 12.0, 20.0), bin(p.avg_word_length, 4.5, 5.5),
          bin(punctuation_rate, 0.10, 0.18)};
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::ES: return "ES";
    case Strategy::LDA: return "LDA";
    case Strategy::SALA: return "SALA";
  }
  return "?";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Same: return "same";
    case Verdict::Different: return "different";
    case Verdict::Uncertain: return "uncertain";
  }
  return "?";
}

Strategy strategy_from_string(std::string_view s) {
  const auto lower = text::fold_case(s);
  if (lower == "es") return Strategy::ES;
  if (lower == "lda") return Strategy::LDA;
  if (lower == "sala") return Strategy::SALA;
  throw Error(Errc::InvalidArgument, "unknown strategy '" + std::string(s) + "' (expected es, lda or sala)");
}

Verdict verdict_for(double likelihood, double threshold, std::optional<Verdict> model_verdict) {
  if (likelihood >= threshold) return Verdict::Same;
  return model_verdict == Verdict::Uncertain ? Verdict::Uncertain : Verdict::Different;
}

ParsedReply parse_reply(const json& j) {
  if (!j.is_object()) throw Error(Errc::ParseError, "reply is not a JSON object");
  const auto it = j.find("likelihood");
  if (it == j.end() || !it->is_number()) throw Error(Errc::ParseError, "reply lacks a numeric likelihood");
  ParsedReply r;
  r.likelihood = it->get<double>();
  if (!(r.likelihood >= 0.0 && r.likelihood <= 1.0)) throw Error(Errc::ParseError, "likelihood outside [0, 1]");
  if (const auto v = j.find("verdict"); v != j.end() && !v->is_null()) {
    if (!v->is_string()) throw Error(Errc::ParseError, "verdict must be a string");
    r.verdict = verdict_from_string(v->get<std::string>());
    if (!r.verdict) throw Error(Errc::ParseError, "unknown verdict " + v->dump());
  }
  if (const auto k = j.find("key_features"); k != j.end() && !k->is_null()) {
    if (!k->is_array()) throw Error(Errc::ParseError, "key_features must be an array");
    for (const auto& f : *k) {
      if (!f.is_string()) throw Error(Errc::ParseError, "key_features must hold strings");
      r.key_features.push_back(f.get<std::string>());
    }
  }
  if (const auto why = j.find("rationale"); why != j.end() && why->is_string()) r.rationale = why->get<std::string>();
  return r;
}

json to_json(const MatchResult& r) {
  json evidence{{"rationale", r.evidence.rationale},
                {"key_features", r.evidence.key_features},
                {"failed_comparisons", r.evidence.failed_comparisons},
                {"flagged", r.evidence.flagged}};
  if (r.evidence.cosine) evidence["cosine"] = *r.evidence.cosine;
  if (r.evidence.distance) {
    json z = json::object();
    for (std::size_t i = 0; i < stylometry::kNumericFeatureCount; ++i) {
      z[std::string(stylometry::feature_key(stylometry::numeric_features()[i]))] = r.evidence.distance->z[i];
    }
    evidence["z"] = z;
    evidence["mean_z"] = r.evidence.distance->mean_z;
  }
  if (!r.evidence.per_reference.empty()) evidence["per_reference"] = r.evidence.per_reference;
  return json{{"author", r.author},
              {"strategy", to_string(r.strategy)},
              {"likelihood", r.likelihood},
              {"verdict", to_string(r.verdict)},
              {"comparisons_made", r.comparisons_made},
              {"evidence", evidence}};
}

MatchResult match_es(const provider::Embedding& article, const provider::Embedding& reference, double threshold) {
  const double c = provider::cosine(article, reference);
  MatchResult r;
  r.strategy = Strategy::ES;
  r.likelihood = std::clamp((c + 1.0) / 2.0, 0.0, 1.0);
  r.verdict = verdict_for(r.likelihood, threshold);
  r.evidence.cosine = c;
  r.comparisons_made = 1;
  return r;
}

std::string build_lda_prompt(std::string_view article_text, std::string_view reference_text) {
  return detail::render_prompt("lda_compare.txt", {{"TEXT_A", article_text}, {"TEXT_B", reference_text}});
}

double lda_shim_likelihood(std::string_view article_text, std::string_view reference_text) {
  const auto a = qualitative_bins(stylometry::compute_features(article_text));
  const auto b = qualitative_bins(stylometry::compute_features(reference_text));
  int agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) agree += a[i] == b[i];
  std::string key(article_text);
  key += '\x1f';
  key += reference_text;
  const double noise = (static_cast<double>(text::stable_hash(key) % 10001) / 10000.0 - 0.5) * 0.4;
  return std::clamp(0.15 + 0.7 * agree / 3.0 + noise, 0.0, 1.0);
}

MatchResult match_lda(std::string_view article_text, std::span<const std::string> reference_texts,
                      provider::Provider& provider, double threshold) {
  if (reference_texts.empty()) throw Error(Errc::EmptyList, "LDA needs at least one reference text");
  MatchResult r;
  r.strategy = Strategy::LDA;
  std::optional<Verdict> last_verdict;
  for (const auto& reference : reference_texts) {
    std::optional<ParsedReply> reply;
    try {
      reply = ask(provider, build_lda_prompt(article_text, reference),
                  [&] { return shim_reply(lda_shim_likelihood(article_text, reference), {}); });
    } catch (const Error& e) {
      // A reference without words cannot be compared; it scores like a parse failure.
      if (e.code() != Errc::EmptyText) throw;
    }
    ++r.comparisons_made;
    if (!reply) {
      ++r.evidence.failed_comparisons;
      r.evidence.per_reference.push_back(0.0);
      continue;
    }
    r.evidence.per_reference.push_back(reply->likelihood);
    if (reply->verdict) last_verdict = reply->verdict;
    for (auto& f : reply->key_features) {
      if (std::find(r.evidence.key_features.begin(), r.evidence.key_features.end(), f) ==
          r.evidence.key_features.end()) {
        r.evidence.key_features.push_back(std::move(f));
      }
    }
    if (r.evidence.rationale.empty()) r.evidence.rationale = reply->rationale;
  }
  const auto& scores = r.evidence.per_reference;
  r.likelihood = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
  r.evidence.flagged = r.evidence.failed_comparisons == r.comparisons_made;
  r.verdict = verdict_for(r.likelihood, threshold, last_verdict);
  return r;
}

std::string build_sala_prompt(std::string_view article_description, std::string_view reference_description) {
  return detail::render_prompt("sala_compare.txt",
                               {{"ARTICLE_A", article_description}, {"ARTICLE_B", reference_description}});
}

MatchResult match_sala(const StylometricProfile& article, const Reference& reference, provider::Provider& provider,
                       double threshold) {
  const auto stats = std::visit([](const auto& ref) { return stylometry::ReferenceStats::from(ref); }, reference);
  const auto distance = stylometry::feature_distance(article, stats);
  const auto reference_description =
      std::visit([](const auto& ref) { return stylometry::describe_features(ref, "Article B"); }, reference);
  const auto prompt = build_sala_prompt(stylometry::describe_features(article, "Article A"), reference_description);

  const auto reply = ask(provider, prompt, [&] {
    // Key features: the three most consistent measurements.
    std::array<std::size_t, stylometry::kNumericFeatureCount> order{};
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return distance.z[a] < distance.z[b]; });
    std::vector<std::string> keys;
    for (std::size_t i = 0; i < 3; ++i) {
      keys.emplace_back(stylometry::feature_key(stylometry::numeric_features()[order[i]]));
    }
    return shim_reply(sala_shim_likelihood(distance.mean_z), std::move(keys));
  });

  MatchResult r;
  r.strategy = Strategy::SALA;
  r.comparisons_made = 1;
  r.evidence.distance = distance;
  if (!reply) {
    r.evidence.failed_comparisons = 1;
    r.evidence.flagged = true;
    r.verdict = verdict_for(0.0, threshold);
    return r;
  }
  r.likelihood = reply->likelihood;
  r.evidence.key_features = reply->key_features;
  r.evidence.rationale = reply->rationale;
  r.verdict = verdict_for(r.likelihood, threshold, reply->verdict);
  return r;
}

Subject prepare_subject(std::string text, provider::Provider& provider, stylometry::SemanticSource source) {
  Subject s;
  s.profile = stylometry::compute_features(text, source, &provider);
  s.embedding = provider.embed(text);
  s.text = std::move(text);
  return s;
}

Matcher::Matcher(Strategy strategy, provider::Provider& provider, double threshold,
                 stylometry::SemanticSource source)
    : strategy_(strategy), provider_(&provider), threshold_(threshold), source_(source) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(Errc::InvalidArgument, "threshold must lie in [0, 1]");
}

MatchResult Matcher::match(const Subject& subject, const MatchTarget& target) const {
  MatchResult r;
  switch (strategy_) {
    case Strategy::ES: {
      if (target.centroid) {
        r = match_es(subject.embedding, *target.centroid, threshold_);
        break;
      }
      if (target.sample_texts.empty()) throw Error(Errc::EmptyList, "no reference for " + target.author);
      provider::Embedding mean;
      for (const auto& t : target.sample_texts) {
        const auto e = provider_->embed(t);
        if (mean.vector.empty()) mean.vector.assign(e.dim(), 0.0);
        if (e.dim() != mean.dim()) throw Error(Errc::DimMismatch, "sample embeddings differ in dimension");
        for (std::size_t i = 0; i < e.dim(); ++i) mean.vector[i] += e.vector[i];
      }
      if (provider::l2_norm(mean) > 0.0) provider::normalize(mean);
      r = match_es(subject.embedding, mean, threshold_);
      break;
    }
    case Strategy::LDA:
      if (target.sample_texts.empty()) throw Error(Errc::EmptyList, "no reference texts for " + target.author);
      r = match_lda(subject.text, target.sample_texts, *provider_, threshold_);
      break;
    case Strategy::SALA: {
      std::optional<stylometry::AggregatedProfile> profile = target.profile;
      if (!profile) {
        stylometry::AggregatedProfile built;
        for (const auto& t : target.sample_texts) {
          try {
            built.add(stylometry::compute_features(t, source_, provider_));
          } catch (const Error& e) {
            if (e.code() != Errc::EmptyText) throw;
          }
        }
        if (built.sample_count() > 0) profile = std::move(built);
      }
      if (!profile) throw Error(Errc::EmptyList, "no reference profile for " + target.author);
      // One sample has no spread; fall back to the single-profile surrogate.
      if (profile->sample_count() == 1) {
        r = match_sala(subject.profile, Reference(profile->means()), *provider_, threshold_);
      } else {
        r = match_sala(subject.profile, Reference(*profile), *provider_, threshold_);
      }
      break;
    }
  }
  r.author = target.author;
  return r;
}

}  // namespace stylo::matching
