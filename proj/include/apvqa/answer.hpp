#pragma once

// Validity rule for free-text model answers: an answer is valid iff it names
// exactly one position label, exactly once.

#include <apvqa/geometry.hpp>

#include <array>
#include <cctype>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace apvqa {

struct ParsedAnswer {
  std::optional<PositionLabel> label;
  bool valid = false;
  friend bool operator==(const ParsedAnswer&, const ParsedAnswer&) = default;
};

// Lowercase, punctuation to spaces, single spaces, no leading/trailing space.
inline std::string normalize_answer(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char ch : raw) {
    if (std::isalnum(ch) || ch >= 0x80) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      pending_space = true;
    }
  }
  return out;
}

inline std::vector<std::string> answer_tokens(std::string_view normalized) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(normalized)};
  for (std::string t; in >> t;) tokens.push_back(std::move(t));
  return tokens;
}

inline ParsedAnswer parse_answer(std::string_view raw_text) {
  const std::vector<std::string> tokens = answer_tokens(normalize_answer(raw_text));
  std::array<int, kNumLabels> hits{};
  std::vector<char> masked(tokens.size(), 0);

  // Two-word labels first; their tokens are masked so the "center" inside
  // "center left" or "top center" is not counted again.
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    if (masked[i]) continue;
    for (int l = 0; l < kNumLabels; ++l) {
      const std::string_view name = kLabelNames[l];
      const auto space = name.find(' ');
      if (space == std::string_view::npos) continue;
      if (tokens[i] == name.substr(0, space) && tokens[i + 1] == name.substr(space + 1)) {
        ++hits[l];
        masked[i] = masked[i + 1] = 1;
        break;
      }
    }
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!masked[i] && tokens[i] == "center") ++hits[index_of(PositionLabel::Center)];
  }

  ParsedAnswer result;
  int distinct = 0;
  int found = -1;
  for (int l = 0; l < kNumLabels; ++l) {
    if (hits[l] > 0) {
      ++distinct;
      found = l;
    }
  }
  if (distinct == 1 && hits[found] == 1) {
    result.label = kAllLabels[found];
    result.valid = true;
  }
  return result;
}

}  // namespace apvqa
