#include "pfacts/core.hpp"

#include <algorithm>

namespace pfacts {

namespace {

constexpr std::array<std::string_view, 9> kMainCategoryNames = {
    "Preferences",     "Characteristics", "Routine Activities",
    "Experience",      "Goals and Plans", "Relationships",
    "Demographics",    "Possessions",     "None",
};
constexpr std::array<std::string_view, 4> kTimeNames = {"Past", "Present",
                                                        "Future", "None"};
constexpr std::array<std::string_view, 3> kReferentNames = {"Self", "Other",
                                                            "None"};
constexpr std::array<std::string_view, 3> kDurationNames = {
    "Short-term", "Long-term", "None"};
constexpr std::array<std::string_view, 2> kValidityNames = {"Valid",
                                                            "Invalid"};
constexpr std::array<std::string_view, 6> kInvalidityReasonNames = {
    "No Fact",        "Opinion",        "Context Insufficient",
    "Unattributable", "Multiple Facts", "None",
};
constexpr std::array<std::string_view, 3> kFollowupNames = {"Yes", "Maybe",
                                                            "None"};

// Prompt vocabulary, aligned index-for-index with kMainCategoryNames.
constexpr std::array<std::string_view, 9> kPromptCategoryNames = {
    "Preferences",     "Characteristics", "Routine activities",
    "Experience",      "Goals and plans", "Relationships",
    "Demographics",    "Possessions",     "None",
};

struct PromptReason {
  std::string_view prompt;
  InvalidityReason reason;
};
constexpr std::array<PromptReason, 4> kPromptReasons = {{
    {"Multiple facts", InvalidityReason::kMultipleFacts},
    {"Opinion", InvalidityReason::kOpinion},
    {"Not about self/known people", InvalidityReason::kUnattributable},
    {"No fact", InvalidityReason::kNoFact},
}};

template <std::size_t N>
std::optional<int> find_name(const std::array<std::string_view, N>& names,
                             std::string_view value) {
  value = trim(value);
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == value) return static_cast<int>(i);
  }
  return std::nullopt;
}

template <std::size_t N>
int require(const std::array<std::string_view, N>& names, const char* field,
            const std::string& value) {
  auto idx = find_name(names, value);
  if (!idx) throw UnknownEnumValue(field, value);
  return *idx;
}

bool is_yes_no_none(const std::string& value, const char* field,
                    bool allow_none) {
  auto v = trim(value);
  if (v == "Yes") return true;
  if (v == "No") return false;
  if (allow_none && v == "None") return false;
  throw UnknownEnumValue(field, value);
}

}  // namespace

std::string_view trim(std::string_view s) {
  constexpr std::string_view kWs = " \t\r\n\f\v";
  auto b = s.find_first_not_of(kWs);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(kWs);
  return s.substr(b, e - b + 1);
}

int LabelSet::index(Dimension dim) const {
  switch (dim) {
    case Dimension::kMainCategory: return static_cast<int>(main_category);
    case Dimension::kTime: return static_cast<int>(time);
    case Dimension::kReferent: return static_cast<int>(referent);
    case Dimension::kDuration: return static_cast<int>(duration);
    case Dimension::kValidity: return static_cast<int>(validity);
    case Dimension::kInvalidityReason:
      return static_cast<int>(invalidity_reason);
    case Dimension::kFollowup: return static_cast<int>(followup);
  }
  return -1;
}

void LabelSet::set_index(Dimension dim, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= label_count(dim)) {
    throw Error(ErrorCategory::kData, "LabelOutOfRange",
                "label index " + std::to_string(label) + " out of range for " +
                    std::string(dimension_name(dim)));
  }
  switch (dim) {
    case Dimension::kMainCategory:
      main_category = static_cast<MainCategory>(label);
      break;
    case Dimension::kTime: time = static_cast<Time>(label); break;
    case Dimension::kReferent: referent = static_cast<Referent>(label); break;
    case Dimension::kDuration: duration = static_cast<Duration>(label); break;
    case Dimension::kValidity: validity = static_cast<Validity>(label); break;
    case Dimension::kInvalidityReason:
      invalidity_reason = static_cast<InvalidityReason>(label);
      break;
    case Dimension::kFollowup: followup = static_cast<Followup>(label); break;
  }
}

std::span<const std::string_view> label_names(Dimension dim) {
  switch (dim) {
    case Dimension::kMainCategory: return kMainCategoryNames;
    case Dimension::kTime: return kTimeNames;
    case Dimension::kReferent: return kReferentNames;
    case Dimension::kDuration: return kDurationNames;
    case Dimension::kValidity: return kValidityNames;
    case Dimension::kInvalidityReason: return kInvalidityReasonNames;
    case Dimension::kFollowup: return kFollowupNames;
  }
  return {};
}

std::size_t label_count(Dimension dim) { return label_names(dim).size(); }

std::string_view dimension_name(Dimension dim) {
  switch (dim) {
    case Dimension::kMainCategory: return "Main Category";
    case Dimension::kTime: return "Time";
    case Dimension::kReferent: return "Referent";
    case Dimension::kDuration: return "Duration";
    case Dimension::kValidity: return "Validity";
    case Dimension::kInvalidityReason: return "Invalidity Reason";
    case Dimension::kFollowup: return "Followup";
  }
  return "";
}

std::string_view dimension_key(Dimension dim) {
  switch (dim) {
    case Dimension::kMainCategory: return "main_category";
    case Dimension::kTime: return "time";
    case Dimension::kReferent: return "referent";
    case Dimension::kDuration: return "duration";
    case Dimension::kValidity: return "validity";
    case Dimension::kInvalidityReason: return "invalidity_reason";
    case Dimension::kFollowup: return "followup";
  }
  return "";
}

std::optional<Dimension> dimension_from_key(std::string_view key) {
  for (auto dim : kAllDimensions) {
    if (dimension_key(dim) == key) return dim;
  }
  return std::nullopt;
}

std::string_view label_name(Dimension dim, int label) {
  auto names = label_names(dim);
  if (label < 0 || static_cast<std::size_t>(label) >= names.size()) {
    throw Error(ErrorCategory::kData, "LabelOutOfRange",
                "label index " + std::to_string(label) + " out of range for " +
                    std::string(dimension_name(dim)));
  }
  return names[static_cast<std::size_t>(label)];
}

std::optional<int> label_from_name(Dimension dim, std::string_view name) {
  name = trim(name);
  auto names = label_names(dim);
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<int>(it - names.begin());
}

std::vector<std::vector<std::string>> taxonomy_label_space() {
  std::vector<std::vector<std::string>> space;
  for (auto dim : kAllDimensions) {
    auto names = label_names(dim);
    space.emplace_back(names.begin(), names.end());
  }
  return space;
}

std::vector<std::string> taxonomy_dimension_names() {
  std::vector<std::string> names;
  for (auto dim : kAllDimensions) names.emplace_back(dimension_name(dim));
  return names;
}

std::string_view source_name(Source source) {
  switch (source) {
    case Source::kMSC: return "MSC";
    case Source::kPersonaChat: return "PersonaChat";
    case Source::kOther: return "Other";
  }
  return "Other";
}

std::optional<Source> source_from_name(std::string_view name) {
  name = trim(name);
  if (name == "MSC") return Source::kMSC;
  if (name == "PersonaChat") return Source::kPersonaChat;
  if (name == "Other") return Source::kOther;
  return std::nullopt;
}

UnknownEnumValue::UnknownEnumValue(std::string field, std::string value)
    : Error(ErrorCategory::kParse, "UnknownEnumValue",
            "unknown value '" + value + "' for field '" + field + "'"),
      field_(std::move(field)),
      value_(std::move(value)) {}

CanonResult canonicalize(const RawAnnotation& raw) {
  // Every field is checked against the prompt vocabulary up front, including
  // the ones that are dropped, so malformed annotations never pass silently.
  for (const auto& c : raw.categories) {
    if (require(kPromptCategoryNames, "categories", c) ==
        static_cast<int>(MainCategory::kNone)) {
      throw UnknownEnumValue("categories", c);
    }
  }
  const int main = require(kPromptCategoryNames, "main_category",
                           raw.main_category);
  const int time = require(kTimeNames, "time", raw.time);
  const int referent = require(kReferentNames, "referent", raw.referent);
  {
    auto s = trim(raw.specificity);
    if (s != "Specific" && s != "General" && s != "None") {
      throw UnknownEnumValue("specificity", raw.specificity);
    }
  }
  bool short_term = false;
  bool long_term = false;
  for (const auto& d : raw.duration) {
    switch (require(kDurationNames, "duration", d)) {
      case 0: short_term = true; break;
      case 1: long_term = true; break;
      default: break;
    }
  }
  const bool context_ok = [&] {
    auto v = trim(raw.context_sufficient);
    if (v == "No") return false;
    if (v == "Yes" || v == "None") return true;
    throw UnknownEnumValue("context_sufficient", raw.context_sufficient);
  }();
  const bool broken = is_yes_no_none(raw.broken, "broken", false);

  std::optional<InvalidityReason> reason;
  {
    auto v = trim(raw.broken_reason);
    if (v != "None") {
      auto it = std::find_if(kPromptReasons.begin(), kPromptReasons.end(),
                             [&](const auto& r) { return r.prompt == v; });
      if (it == kPromptReasons.end()) {
        throw UnknownEnumValue("broken_reason", raw.broken_reason);
      }
      reason = it->reason;
    }
  }

  std::optional<Followup> followup;
  {
    auto v = trim(raw.followup);
    if (v == "Yes") {
      followup = Followup::kYes;
    } else if (v == "Maybe" || v == "No") {
      followup = Followup::kMaybe;
    } else if (v != "None") {
      throw UnknownEnumValue("followup", raw.followup);
    }
  }

  CanonResult out;
  if (broken || !context_ok) {
    out.labels.validity = Validity::kInvalid;
    if (broken && reason) {
      out.labels.invalidity_reason = *reason;
    } else if (!context_ok) {
      out.labels.invalidity_reason = InvalidityReason::kContextInsufficient;
    } else {
      throw Error(ErrorCategory::kData, "InconsistentAnnotation",
                  "broken=Yes without a broken_reason");
    }
    return out;
  }

  auto& l = out.labels;
  l.validity = Validity::kValid;
  l.main_category = static_cast<MainCategory>(main);
  l.time = static_cast<Time>(time);
  l.referent = static_cast<Referent>(referent);
  if (short_term && long_term) {
    out.excluded = true;
    out.exclusion_reason = std::string(kDualDurationReason);
  } else if (short_term) {
    l.duration = Duration::kShortTerm;
  } else if (long_term) {
    l.duration = Duration::kLongTerm;
  }
  // Followup is defined for future-time facts only.
  if (followup && l.time == Time::kFuture) l.followup = *followup;
  return out;
}

RawAnnotation to_raw(const LabelSet& labels) {
  RawAnnotation raw;
  if (labels.validity == Validity::kInvalid) {
    if (labels.invalidity_reason == InvalidityReason::kContextInsufficient) {
      raw.broken = "No";
      raw.context_sufficient = "No";
      return raw;
    }
    raw.broken = "Yes";
    for (const auto& r : kPromptReasons) {
      if (r.reason == labels.invalidity_reason) raw.broken_reason = r.prompt;
    }
    return raw;
  }
  raw.broken = "No";
  raw.context_sufficient = "Yes";
  const auto main = static_cast<std::size_t>(labels.main_category);
  raw.main_category = std::string(kPromptCategoryNames[main]);
  if (labels.main_category != MainCategory::kNone) {
    raw.categories.push_back(raw.main_category);
  }
  raw.time = std::string(label_name(Dimension::kTime, labels.index(Dimension::kTime)));
  raw.referent = std::string(
      label_name(Dimension::kReferent, labels.index(Dimension::kReferent)));
  if (labels.duration != Duration::kNone) {
    raw.duration.emplace_back(
        label_name(Dimension::kDuration, labels.index(Dimension::kDuration)));
  }
  raw.followup = std::string(
      label_name(Dimension::kFollowup, labels.index(Dimension::kFollowup)));
  return raw;
}

std::vector<std::string> validate_labelset(const LabelSet& labels) {
  std::vector<std::string> violations;
  if (labels.validity == Validity::kValid) {
    if (labels.invalidity_reason != InvalidityReason::kNone) {
      violations.emplace_back("valid fact carries invalidity reason");
    }
  } else {
    if (labels.invalidity_reason == InvalidityReason::kNone) {
      violations.emplace_back("invalid fact lacks invalidity reason");
    }
    if (labels.main_category != MainCategory::kNone) {
      violations.emplace_back("invalid fact carries main category");
    }
    if (labels.time != Time::kNone) {
      violations.emplace_back("invalid fact carries time");
    }
    if (labels.referent != Referent::kNone) {
      violations.emplace_back("invalid fact carries referent");
    }
    if (labels.duration != Duration::kNone) {
      violations.emplace_back("invalid fact carries duration");
    }
    if (labels.followup != Followup::kNone) {
      violations.emplace_back("invalid fact carries followup");
    }
  }
  if (labels.followup != Followup::kNone && labels.time != Time::kFuture) {
    violations.emplace_back("followup requires Future time");
  }
  return violations;
}

}  // namespace pfacts
