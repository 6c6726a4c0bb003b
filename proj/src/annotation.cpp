// Copyright (c) 2026 The redforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "redforge/annotation.hpp"

#include <array>

#include "redforge/error.hpp"

namespace redforge::annot {

namespace {

struct BehaviorInfo {
  Behavior behavior;
  const char* name;
  const char* surface;  // bracket content or mark
  LabelMode mode;
};

constexpr std::array<BehaviorInfo, kBehaviorCount> kTable = {{
    {Behavior::kCharRepetition, "char_repetition", "hic", LabelMode::kTokenInsertion},
    {Behavior::kWordRepetition, "word_repetition", "rep", LabelMode::kTokenInsertion},
    {Behavior::kElongation, "elongation", "elong", LabelMode::kTokenInsertion},
    {Behavior::kHissing, "hissing", "sss", LabelMode::kTokenInsertion},
    {Behavior::kDentalClick, "dental_click", "tsk", LabelMode::kTokenInsertion},
    {Behavior::kBreath, "breath", "breath", LabelMode::kTokenInsertion},
    {Behavior::kLaugh, "laugh", "laugh", LabelMode::kTokenInsertion},
    {Behavior::kSpeakWithLaugh, "speak_with_laugh", "^", LabelMode::kEmbeddingInjection},
    {Behavior::kEmphasis, "emphasis", "@", LabelMode::kEmbeddingInjection},
    {Behavior::kFilledPause, "filled_pause", "{P}", LabelMode::kEmbeddingInjection},
    {Behavior::kConfirmation, "confirmation", "{C}", LabelMode::kEmbeddingInjection},
    {Behavior::kRealization, "realization", "{R}", LabelMode::kEmbeddingInjection},
    {Behavior::kSurprise, "surprise", "{S}", LabelMode::kEmbeddingInjection},
}};

constexpr std::array<const char*, 4> kEmotions = {"neutral", "happy", "sad",
                                                  "angry"};

const BehaviorInfo& info(Behavior b) {
  return kTable[static_cast<std::size_t>(b)];
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_special(char c) {
  return c == '[' || c == ']' || c == '^' || c == '@' || c == '{' || c == '}';
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && is_space(s[a])) ++a;
  while (b > a && is_space(s[b - 1])) --b;
  return std::string(s.substr(a, b - a));
}

// Start of the code point that ends at s.size().
std::size_t last_cp_start(std::string_view s) {
  std::size_t i = s.size() - 1;
  while (i > 0 && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) --i;
  return i;
}

char32_t decode_at(std::string_view s, std::size_t i, std::size_t* len) {
  const auto c = static_cast<unsigned char>(s[i]);
  std::size_t n = 1;
  char32_t cp = c;
  if (c >= 0xF0) {
    n = 4;
    cp = c & 0x07;
  } else if (c >= 0xE0) {
    n = 3;
    cp = c & 0x0F;
  } else if (c >= 0xC0) {
    n = 2;
    cp = c & 0x1F;
  }
  if (i + n > s.size()) n = 1;
  for (std::size_t k = 1; k < n; ++k) {
    cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
  }
  if (len) *len = n;
  return cp;
}

char32_t first_cp(std::string_view s) { return decode_at(s, 0, nullptr); }
char32_t last_cp(std::string_view s) {
  return decode_at(s, last_cp_start(s), nullptr);
}

bool single_cjk_char(std::string_view s) {
  if (s.empty()) return false;
  std::size_t len = 0;
  const char32_t cp = decode_at(s, 0, &len);
  return len == s.size() && is_cjk(cp);
}

bool is_word(std::string_view s) {
  if (s.empty()) return false;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t len = 0;
    const char32_t cp = decode_at(s, i, &len);
    if (is_cjk(cp) || (len == 1 && (is_space(s[i]) || is_special(s[i])))) {
      return false;
    }
    i += len;
  }
  return true;
}

std::optional<Behavior> insertion_by_surface(std::string_view name) {
  for (const auto& row : kTable) {
    if (row.mode == LabelMode::kTokenInsertion && name == row.surface) {
      return row.behavior;
    }
  }
  return std::nullopt;
}

}  // namespace

bool is_cjk(char32_t cp) {
  return (cp >= 0x2E80 && cp <= 0x9FFF) || (cp >= 0xAC00 && cp <= 0xD7AF) ||
         (cp >= 0xF900 && cp <= 0xFAFF) || (cp >= 0xFF00 && cp <= 0xFFEF) ||
         (cp >= 0x20000 && cp <= 0x2FA1F);
}

LabelMode mode_of(Behavior b) { return info(b).mode; }
std::string to_string(Behavior b) { return info(b).name; }
std::string to_string(Emotion e) {
  return kEmotions[static_cast<std::size_t>(e)];
}

Behavior parse_behavior(std::string_view name) {
  for (const auto& row : kTable) {
    if (name == row.name) return row.behavior;
  }
  throw InvariantError("unknown behavior '" + std::string(name) + "'");
}

Emotion parse_emotion(std::string_view name) {
  for (std::size_t i = 0; i < kEmotions.size(); ++i) {
    if (name == kEmotions[i]) return static_cast<Emotion>(i);
  }
  throw InvariantError("unknown emotion '" + std::string(name) +
                       "' (expected neutral, happy, sad or angry)");
}

std::string surface_form(Behavior b) {
  const auto& row = info(b);
  if (row.mode == LabelMode::kTokenInsertion) {
    return std::string("[") + row.surface + "]";
  }
  return row.surface;
}

Unit Unit::make_text(std::string t, std::optional<Behavior> label) {
  Unit u;
  u.kind = Kind::kText;
  u.text = std::move(t);
  u.label = label;
  return u;
}

Unit Unit::make_token(Behavior b) {
  Unit u;
  u.kind = Kind::kToken;
  u.token = b;
  return u;
}

void PromptPlan::validate() const {
  for (std::size_t i = 0; i < units.size(); ++i) {
    const Unit& u = units[i];
    const std::string where = "unit " + std::to_string(i);
    if (u.kind == Unit::Kind::kToken) {
      if (!u.token || mode_of(*u.token) != LabelMode::kTokenInsertion) {
        throw InvariantError(where + ": tokens must be token-insertion behaviors");
      }
      if (u.label) throw InvariantError(where + ": labels only apply to text");
      continue;
    }
    if (u.token) throw InvariantError(where + ": text unit carries a token");
    if (u.label) {
      if (mode_of(*u.label) != LabelMode::kEmbeddingInjection) {
        throw InvariantError(where +
                             ": text labels must be embedding-injection behaviors");
      }
      if (!single_cjk_char(u.text) && !is_word(u.text)) {
        throw InvariantError(where +
                             ": a labeled unit is one CJK character or one word");
      }
      continue;
    }
    if (u.text.empty() || trim(u.text) != u.text) {
      throw InvariantError(where + ": text must be non-empty and trimmed");
    }
    for (char c : u.text) {
      if (is_special(c)) {
        throw InvariantError(where + ": text contains a reserved character");
      }
    }
    if (i > 0 && units[i - 1].kind == Unit::Kind::kText && !units[i - 1].label) {
      throw InvariantError(where + ": adjacent unlabeled text units");
    }
  }
}

OrderedJson PromptPlan::to_json() const {
  OrderedJson j;
  j["emotion"] = to_string(emotion);
  j["units"] = OrderedJson::array();
  for (const Unit& u : units) {
    OrderedJson e;
    if (u.kind == Unit::Kind::kToken) {
      e["type"] = "token";
      e["token"] = to_string(*u.token);
      e["surface"] = surface_form(*u.token);
      e["mode"] = "token_insertion";
    } else {
      e["type"] = "text";
      e["text"] = u.text;
      if (u.label) {
        e["label"] = to_string(*u.label);
        e["mode"] = "embedding_injection";
      }
    }
    j["units"].push_back(e);
  }
  return j;
}

PromptPlan parse_annotated(std::string_view text, Emotion emotion) {
  PromptPlan plan;
  plan.emotion = emotion;
  std::string pending;

  const auto flush = [&]() {
    std::string t = trim(pending);
    if (!t.empty()) plan.units.push_back(Unit::make_text(std::move(t)));
    pending.clear();
  };

  const auto attach = [&](Behavior label, std::size_t offset) {
    if (pending.empty() || is_space(pending.back())) {
      throw ParseError("dangling mark '" + surface_form(label) +
                           "' has no preceding character",
                       offset);
    }
    std::size_t cut = last_cp_start(pending);
    if (!is_cjk(decode_at(pending, cut, nullptr))) {
      while (cut > 0) {
        const std::size_t prev = last_cp_start(std::string_view(pending).substr(0, cut));
        const char32_t cp = decode_at(pending, prev, nullptr);
        if (is_cjk(cp) || (cp < 0x80 && is_space(static_cast<char>(cp)))) break;
        cut = prev;
      }
    }
    std::string target = pending.substr(cut);
    pending.resize(cut);
    flush();
    plan.units.push_back(Unit::make_text(std::move(target), label));
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '[') {
      const std::size_t close = text.find(']', i + 1);
      const std::size_t nested = text.find('[', i + 1);
      if (close == std::string_view::npos) {
        throw ParseError("unclosed '['", i);
      }
      if (nested != std::string_view::npos && nested < close) {
        throw ParseError("nested brackets", nested);
      }
      const std::string_view name = text.substr(i + 1, close - i - 1);
      const auto behavior = insertion_by_surface(name);
      if (!behavior) {
        throw ParseError("unknown token '[" + std::string(name) + "]'", i);
      }
      flush();
      plan.units.push_back(Unit::make_token(*behavior));
      i = close + 1;
    } else if (c == ']') {
      throw ParseError("unmatched ']'", i);
    } else if (c == '^') {
      attach(Behavior::kSpeakWithLaugh, i);
      ++i;
    } else if (c == '@') {
      attach(Behavior::kEmphasis, i);
      ++i;
    } else if (c == '{') {
      if (i + 2 >= text.size() || text[i + 2] != '}') {
        throw ParseError("malformed label mark", i);
      }
      Behavior label;
      switch (text[i + 1]) {
        case 'P': label = Behavior::kFilledPause; break;
        case 'C': label = Behavior::kConfirmation; break;
        case 'R': label = Behavior::kRealization; break;
        case 'S': label = Behavior::kSurprise; break;
        default:
          throw ParseError(std::string("unknown label '{") + text[i + 1] + "}'", i);
      }
      attach(label, i);
      i += 3;
    } else if (c == '}') {
      throw ParseError("unmatched '}'", i);
    } else {
      pending.push_back(c);
      ++i;
    }
  }
  flush();
  return plan;
}

std::string serialize(const PromptPlan& plan) {
  plan.validate();
  std::string out;
  for (std::size_t i = 0; i < plan.units.size(); ++i) {
    const Unit& u = plan.units[i];
    if (i > 0) {
      const Unit& prev = plan.units[i - 1];
      const bool both_text =
          prev.kind == Unit::Kind::kText && u.kind == Unit::Kind::kText;
      const bool cjk_join = both_text && is_cjk(last_cp(prev.text)) &&
                            is_cjk(first_cp(u.text));
      if (!cjk_join) out.push_back(' ');
    }
    if (u.kind == Unit::Kind::kToken) {
      out += surface_form(*u.token);
    } else {
      out += u.text;
      if (u.label) out += surface_form(*u.label);
    }
  }
  return out;
}

}  // namespace redforge::annot
