#pragma once

// Seven-dimension personal-fact taxonomy, raw prompt annotations and the
// canonicalization that maps the latter onto the former.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pfacts/errors.hpp"

namespace pfacts {

enum class Dimension {
  kMainCategory,
  kTime,
  kReferent,
  kDuration,
  kValidity,
  kInvalidityReason,
  kFollowup,
};

inline constexpr std::size_t kNumDimensions = 7;
inline constexpr std::array<Dimension, kNumDimensions> kAllDimensions = {
    Dimension::kMainCategory, Dimension::kTime,
    Dimension::kReferent,     Dimension::kDuration,
    Dimension::kValidity,     Dimension::kInvalidityReason,
    Dimension::kFollowup,
};

enum class MainCategory {
  kPreferences,
  kCharacteristics,
  kRoutineActivities,
  kExperience,
  kGoalsAndPlans,
  kRelationships,
  kDemographics,
  kPossessions,
  kNone,
};
enum class Time { kPast, kPresent, kFuture, kNone };
enum class Referent { kSelf, kOther, kNone };
enum class Duration { kShortTerm, kLongTerm, kNone };
enum class Validity { kValid, kInvalid };
enum class InvalidityReason {
  kNoFact,
  kOpinion,
  kContextInsufficient,
  kUnattributable,
  kMultipleFacts,
  kNone,
};
enum class Followup { kYes, kMaybe, kNone };

// One assignment over all seven dimensions. Defaults describe a valid fact
// with every optional attribute set to None.
struct LabelSet {
  MainCategory main_category = MainCategory::kNone;
  Time time = Time::kNone;
  Referent referent = Referent::kNone;
  Duration duration = Duration::kNone;
  Validity validity = Validity::kValid;
  InvalidityReason invalidity_reason = InvalidityReason::kNone;
  Followup followup = Followup::kNone;

  // Index of the label within its dimension's label list.
  int index(Dimension dim) const;
  void set_index(Dimension dim, int label);

  friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

// Canonical (released) label strings, in enumeration order.
std::span<const std::string_view> label_names(Dimension dim);
std::size_t label_count(Dimension dim);
std::string_view dimension_name(Dimension dim);
// Snake-case key used in files ("main_category", "invalidity_reason", ...).
std::string_view dimension_key(Dimension dim);
std::optional<Dimension> dimension_from_key(std::string_view key);

std::string_view label_name(Dimension dim, int label);
// Case-sensitive lookup after trimming; nullopt for unknown values.
std::optional<int> label_from_name(Dimension dim, std::string_view name);

// Labels as strings, keyed by dimension order.
std::vector<std::vector<std::string>> taxonomy_label_space();
std::vector<std::string> taxonomy_dimension_names();

// A prompt-style annotation as emitted by the annotation model.
struct RawAnnotation {
  std::vector<std::string> categories;
  std::string main_category = "None";
  std::string time = "None";
  std::string referent = "None";
  std::string specificity = "None";
  std::vector<std::string> duration;
  std::string context_sufficient = "None";
  std::string broken = "No";
  std::string broken_reason = "None";
  std::string followup = "None";
};

enum class Source { kMSC, kPersonaChat, kOther };
std::string_view source_name(Source source);
std::optional<Source> source_from_name(std::string_view name);

struct FactRecord {
  std::string id;
  std::string text;
  std::optional<std::string> context;
  Source source = Source::kOther;
  std::optional<LabelSet> labels;
  // Set for facts kept for auditing but barred from training and evaluation.
  bool excluded = false;
  std::optional<std::string> exclusion_reason;
};

struct CanonResult {
  LabelSet labels;
  bool excluded = false;
  std::optional<std::string> exclusion_reason;
};

class UnknownEnumValue : public Error {
 public:
  UnknownEnumValue(std::string field, std::string value);
  const std::string& field() const noexcept { return field_; }
  const std::string& value() const noexcept { return value_; }

 private:
  std::string field_;
  std::string value_;
};

inline constexpr std::string_view kDualDurationReason = "dual-duration";

CanonResult canonicalize(const RawAnnotation& raw);

// Re-expresses a canonical label set in prompt vocabulary, such that
// canonicalize(to_raw(x)) == x for any label set that passes validation.
RawAnnotation to_raw(const LabelSet& labels);

// Empty iff all label-set invariants hold.
std::vector<std::string> validate_labelset(const LabelSet& labels);

std::string_view trim(std::string_view s);

}  // namespace pfacts
