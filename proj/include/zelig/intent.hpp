#pragma once

// Utterance normalization and lexicon-based intent matching (token-set
// Jaccard similarity after synonym canonicalization).

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "zelig/fuzzy.hpp"

namespace zelig {

struct Intent {
  std::string id;
  std::vector<std::string> phrases;
  std::vector<std::vector<std::string>> synonym_groups;
  friend bool operator==(const Intent&, const Intent&) = default;
};

struct Lexicon {
  std::vector<Intent> intents;
};

struct MatchResult {
  std::string intent_id;
  Degree degree = 0.0;
  std::string best_phrase;
};

namespace detail {

inline bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80 || c == '\''; }

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Words whose "'s" reads as "is" rather than a possessive.
inline bool s_means_is(std::string_view stem) {
  static const std::set<std::string, std::less<>> kStems = {"what", "where", "who",  "how",   "it",
                                                            "he",   "she",   "that", "there", "here",
                                                            "this", "why",   "when"};
  return kStems.contains(stem);
}

inline void expand_word(std::string word, std::vector<std::string>& out) {
  auto push = [&out](std::string w) {
    w.erase(std::remove(w.begin(), w.end(), '\''), w.end());
    if (!w.empty()) out.push_back(std::move(w));
  };
  while (!word.empty() && word.front() == '\'') word.erase(word.begin());
  while (!word.empty() && word.back() == '\'') word.pop_back();
  if (word.empty()) return;

  static const std::map<std::string, std::vector<std::string>, std::less<>> kWhole = {
      {"can't", {"can", "not"}}, {"won't", {"will", "not"}}, {"shan't", {"shall", "not"}},
      {"let's", {"let", "us"}},  {"ain't", {"is", "not"}}};
  if (auto it = kWhole.find(word); it != kWhole.end()) {
    for (const auto& w : it->second) out.push_back(w);
    return;
  }
  struct Suffix {
    std::string_view text;
    std::string_view expansion;
  };
  static constexpr Suffix kSuffixes[] = {{"n't", "not"}, {"'re", "are"}, {"'m", "am"},
                                         {"'ve", "have"}, {"'ll", "will"}, {"'d", "would"}};
  for (const auto& s : kSuffixes) {
    if (ends_with(word, s.text) && word.size() > s.text.size()) {
      push(word.substr(0, word.size() - s.text.size()));
      out.emplace_back(s.expansion);
      return;
    }
  }
  if (ends_with(word, "'s") && word.size() > 2) {
    std::string stem = word.substr(0, word.size() - 2);
    const bool is = s_means_is(stem);
    push(std::move(stem));
    if (is) out.emplace_back("is");
    return;
  }
  push(std::move(word));
}

}  // namespace detail

/// Lowercases ASCII, expands contractions, strips punctuation and splits on
/// whitespace. Non-ASCII bytes are kept as word characters.
[[nodiscard]] inline std::vector<std::string> normalize(std::string_view text) {
  std::string s;
  s.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    // U+2019 right single quotation mark
    if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        static_cast<unsigned char>(text[i + 2]) == 0x99) {
      s.push_back('\'');
      i += 2;
      continue;
    }
    s.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
  }

  std::vector<std::string> tokens;
  std::string word;
  for (char ch : s) {
    if (detail::is_word_byte(static_cast<unsigned char>(ch))) {
      word.push_back(ch);
    } else if (!word.empty()) {
      detail::expand_word(std::move(word), tokens);
      word.clear();
    }
  }
  if (!word.empty()) detail::expand_word(std::move(word), tokens);
  return tokens;
}

/// Maps each token to the first member of its synonym group, as a set.
[[nodiscard]] inline std::set<std::string> canonical_token_set(const std::vector<std::string>& tokens,
                                                               const std::vector<std::vector<std::string>>& groups) {
  std::set<std::string> out;
  for (const auto& t : tokens) {
    std::string canon = t;
    for (const auto& g : groups) {
      if (!g.empty() && std::find(g.begin(), g.end(), t) != g.end()) {
        canon = g.front();
        break;
      }
    }
    out.insert(std::move(canon));
  }
  return out;
}

[[nodiscard]] inline Degree jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& t : a) common += b.count(t);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

/// Degree of every intent, best first; ties keep declaration order.
[[nodiscard]] inline std::vector<MatchResult> match_intent(std::string_view utterance, const Lexicon& lexicon) {
  const auto tokens = normalize(utterance);
  std::vector<MatchResult> results;
  results.reserve(lexicon.intents.size());
  for (const auto& intent : lexicon.intents) {
    MatchResult r{intent.id, 0.0, intent.phrases.empty() ? std::string{} : intent.phrases.front()};
    if (!tokens.empty()) {
      const auto u = canonical_token_set(tokens, intent.synonym_groups);
      for (const auto& phrase : intent.phrases) {
        const Degree d = jaccard(u, canonical_token_set(normalize(phrase), intent.synonym_groups));
        if (d > r.degree) {
          r.degree = d;
          r.best_phrase = phrase;
        }
      }
    }
    results.push_back(std::move(r));
  }
  std::stable_sort(results.begin(), results.end(),
                   [](const MatchResult& a, const MatchResult& b) { return a.degree > b.degree; });
  return results;
}

[[nodiscard]] inline Degree intent_degree(const std::vector<MatchResult>& results, std::string_view intent_id) {
  for (const auto& r : results)
    if (r.intent_id == intent_id) return r.degree;
  return 0.0;
}

}  // namespace zelig
