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

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "redforge/corpus.hpp"
#include "redforge/error.hpp"

namespace redforge::annot {

enum class Behavior {
  kCharRepetition,
  kWordRepetition,
  kElongation,
  kHissing,
  kDentalClick,
  kBreath,
  kLaugh,
  kSpeakWithLaugh,
  kEmphasis,
  kFilledPause,
  kConfirmation,
  kRealization,
  kSurprise,
};

inline constexpr int kBehaviorCount = 13;

enum class LabelMode { kTokenInsertion, kEmbeddingInjection };

enum class Emotion { kNeutral, kHappy, kSad, kAngry };

// Inserted tokens are the bracketed acoustic events; the overlapped labels
// attach to a text unit.
LabelMode mode_of(Behavior b);
std::string to_string(Behavior b);
std::string to_string(Emotion e);
Behavior parse_behavior(std::string_view name);
Emotion parse_emotion(std::string_view name);
// "[laugh]" for insertions, "@" / "^" / "{P}" ... for injections.
std::string surface_form(Behavior b);

struct Unit {
  enum class Kind { kText, kToken };
  Kind kind = Kind::kText;
  std::string text;                 // kText only
  std::optional<Behavior> token;    // kToken only
  std::optional<Behavior> label;    // kText only, embedding-injection kinds

  static Unit make_text(std::string t, std::optional<Behavior> label = {});
  static Unit make_token(Behavior b);
  bool operator==(const Unit&) const = default;
};

struct PromptPlan {
  std::vector<Unit> units;
  Emotion emotion = Emotion::kNeutral;

  // Throws InvariantError when labels sit on tokens, tokens are not
  // insertion kinds, or the plan is not in canonical form (no empty text,
  // no two adjacent unlabeled text units, labeled units are a single CJK
  // character or a single non-CJK word).
  void validate() const;
  OrderedJson to_json() const;
  bool operator==(const PromptPlan&) const = default;
};

class ParseError : public InvariantError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : InvariantError("at byte " + std::to_string(offset) + ": " + what),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Bracketed tokens become token units. A mark ('^', '@', '{P}', '{C}',
// '{R}', '{S}') labels the preceding CJK character, or the preceding run of
// non-CJK, non-space characters. Unmarked text between tokens and marks is
// kept as one unit with its outer whitespace trimmed.
PromptPlan parse_annotated(std::string_view text, Emotion emotion);

// Canonical text form: tokens and word boundaries separated by single
// spaces, no space between adjacent CJK characters.
std::string serialize(const PromptPlan& plan);

bool is_cjk(char32_t cp);

}  // namespace redforge::annot
