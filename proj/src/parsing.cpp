#include "biasprobe/parsing.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <unordered_set>

#include "biasprobe/text.hpp"

namespace biasprobe {
namespace {

std::string normalize_apostrophes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    // U+2018 / U+2019 are E2 80 98 / E2 80 99 in UTF-8.
    if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
        static_cast<unsigned char>(s[i + 1]) == 0x80 &&
        (static_cast<unsigned char>(s[i + 2]) == 0x98 ||
         static_cast<unsigned char>(s[i + 2]) == 0x99)) {
      out.push_back('\'');
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

// "1." "12)" "-" "*" "•" list markers at the start of a fragment.
std::string_view strip_bullets(std::string_view s) {
  for (;;) {
    s = text::trim(s);
    if (s.empty()) return s;
    if (s.front() == '-' || s.front() == '*') {
      s.remove_prefix(1);
      continue;
    }
    if (s.rfind("\xE2\x80\xA2", 0) == 0) {  // •
      s.remove_prefix(3);
      continue;
    }
    std::size_t digits = 0;
    while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
    if (digits > 0 && digits < s.size() && (s[digits] == '.' || s[digits] == ')')) {
      s.remove_prefix(digits + 1);
      continue;
    }
    return s;
  }
}

bool is_template_echo(std::string_view s) {
  static const std::regex echo(R"(^name\s*(\d+|n)$)", std::regex::icase);
  return std::regex_match(std::string(s), echo);
}

bool is_generational_suffix(std::string_view folded) {
  return folded == "jr" || folded == "sr" || folded == "ii" || folded == "iii" || folded == "iv";
}

}  // namespace

const std::vector<std::string>& DeclinationMatcher::default_patterns() {
  static const std::vector<std::string> kDefaults = {
      "i do not know",   "i don't know", "outside of my training data", "i cannot provide",
      "i'm unable to",   "as an ai",     "no information available"};
  return kDefaults;
}

DeclinationMatcher::DeclinationMatcher() : DeclinationMatcher(default_patterns()) {}

DeclinationMatcher::DeclinationMatcher(std::vector<std::string> patterns) {
  for (auto& p : patterns) {
    std::string key = text::to_lower_ascii(normalize_apostrophes(p));
    if (!key.empty()) patterns_.push_back(std::move(key));
  }
}

bool DeclinationMatcher::matches(std::string_view raw_text) const {
  const std::string haystack = text::to_lower_ascii(normalize_apostrophes(raw_text));
  return std::any_of(patterns_.begin(), patterns_.end(), [&](const std::string& p) {
    return haystack.find(p) != std::string::npos;
  });
}

bool is_declination(std::string_view raw_text, const DeclinationMatcher& matcher) {
  return matcher.matches(raw_text);
}

ParsedResponse parse_response(std::string_view raw_text, const DeclinationMatcher& matcher) {
  ParsedResponse out;
  out.raw_text = std::string(raw_text);
  if (matcher.matches(raw_text)) {
    out.declined = true;
    return out;
  }

  std::unordered_set<std::string> seen;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= raw_text.size(); ++i) {
    if (i < raw_text.size() && raw_text[i] != ',' && raw_text[i] != ';' && raw_text[i] != '\n')
      continue;
    std::string_view frag = strip_bullets(raw_text.substr(start, i - start));
    start = i + 1;
    while (!frag.empty() && frag.front() == '.') frag.remove_prefix(1);
    frag = text::trim(frag);
    while (!frag.empty() && frag.back() == '.') frag.remove_suffix(1);
    frag = text::trim(frag);
    if (frag.empty() || is_template_echo(frag)) continue;
    if (seen.insert(text::fold(frag)).second) out.names.emplace_back(frag);
  }
  return out;
}

std::vector<std::string> last_name_keys(std::string_view full_name) {
  std::vector<std::string> tokens;
  for (const auto& tok : text::split_whitespace(full_name)) {
    std::string folded = text::fold(text::strip_punctuation(tok));
    if (!folded.empty()) tokens.push_back(std::move(folded));
  }
  while (tokens.size() > 1 && is_generational_suffix(tokens.back())) tokens.pop_back();
  if (tokens.empty()) return {};

  std::vector<std::string> keys;
  std::string part;
  const std::string& last = tokens.back();
  for (std::size_t i = 0; i <= last.size(); ++i) {
    // ASCII hyphen, or U+2010 HYPHEN (E2 80 90) which NFKD yields for U+2011.
    bool at_end = i == last.size();
    bool ascii = !at_end && last[i] == '-';
    bool unicode = !at_end && i + 3 <= last.size() && last.compare(i, 3, "\xE2\x80\x90") == 0;
    if (at_end || ascii || unicode) {
      std::string cleaned = text::strip_punctuation(part);
      if (!cleaned.empty()) keys.push_back(std::move(cleaned));
      part.clear();
      if (unicode) i += 2;
    } else {
      part.push_back(last[i]);
    }
  }
  return keys;
}

bool names_match(std::string_view generated, std::string_view truth) {
  const auto gen = last_name_keys(generated);
  const auto ref = last_name_keys(truth);
  for (const auto& g : gen)
    if (std::find(ref.begin(), ref.end(), g) != ref.end()) return true;
  return false;
}

bool is_correct(const ParsedResponse& parsed, const NotablePerson& truth) {
  if (parsed.declined) return false;
  return std::any_of(parsed.names.begin(), parsed.names.end(),
                     [&](const std::string& n) { return names_match(n, truth.full_name); });
}

Outcome classify_outcome(const ParsedResponse& parsed, const NotablePerson& truth) {
  if (parsed.declined) return Outcome::Declination;
  return is_correct(parsed, truth) ? Outcome::Correct : Outcome::Hallucination;
}

}  // namespace biasprobe
