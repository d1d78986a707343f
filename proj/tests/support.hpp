#pragma once

// Shared fixtures, generators and brute-force oracles for the test binaries.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "pfacts/agreement.hpp"
#include "pfacts/core.hpp"
#include "pfacts/embed.hpp"
#include "pfacts/rng.hpp"

namespace pfacts::testing {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("pfacts-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// ---- canonicalization fixtures ----

struct CanonFixture {
  std::string name;
  RawAnnotation raw;
  LabelSet expected;
  bool excluded = false;
  std::string error_kind;  // non-empty: canonicalize must throw this kind
};

inline RawAnnotation valid_raw(std::string main, std::string time, std::string referent,
                               std::vector<std::string> duration,
                               std::string followup = "None") {
  RawAnnotation r;
  r.categories = {main};
  r.main_category = std::move(main);
  r.time = std::move(time);
  r.referent = std::move(referent);
  r.specificity = "Specific";
  r.duration = std::move(duration);
  r.context_sufficient = "Yes";
  r.broken = "No";
  r.broken_reason = "None";
  r.followup = std::move(followup);
  return r;
}

inline RawAnnotation broken_raw(std::string reason) {
  RawAnnotation r;
  r.categories = {};
  r.broken = "Yes";
  r.broken_reason = std::move(reason);
  return r;
}

inline LabelSet invalid(InvalidityReason reason) {
  LabelSet l;
  l.validity = Validity::kInvalid;
  l.invalidity_reason = reason;
  return l;
}

inline LabelSet valid(MainCategory m, Time t, Referent r, Duration d,
                      Followup f = Followup::kNone) {
  LabelSet l;
  l.main_category = m;
  l.time = t;
  l.referent = r;
  l.duration = d;
  l.followup = f;
  return l;
}

inline std::vector<CanonFixture> canon_fixtures() {
  using MC = MainCategory;
  std::vector<CanonFixture> f;
  auto add = [&](std::string name, RawAnnotation raw, LabelSet expected, bool excluded = false) {
    f.push_back({std::move(name), std::move(raw), expected, excluded, ""});
  };
  auto fails = [&](std::string name, RawAnnotation raw, std::string kind) {
    f.push_back({std::move(name), std::move(raw), LabelSet{}, false, std::move(kind)});
  };

  add("broken multiple facts", broken_raw("Multiple facts"),
      invalid(InvalidityReason::kMultipleFacts));
  add("broken opinion", broken_raw("Opinion"), invalid(InvalidityReason::kOpinion));
  add("broken no fact", broken_raw("No fact"), invalid(InvalidityReason::kNoFact));
  add("not about self renamed unattributable", broken_raw("Not about self/known people"),
      invalid(InvalidityReason::kUnattributable));
  {
    auto r = broken_raw("Opinion");
    r.context_sufficient = "No";
    add("broken reason wins over context", r, invalid(InvalidityReason::kOpinion));
  }
  {
    auto r = valid_raw("Preferences", "Present", "Self", {"Long-term"});
    r.context_sufficient = "No";
    add("context insufficient folds into invalid", r,
        invalid(InvalidityReason::kContextInsufficient));
  }
  {
    auto r = valid_raw("Goals and plans", "Future", "Self", {"Short-term"}, "Yes");
    r.context_sufficient = "No";
    add("context insufficient clears followup", r,
        invalid(InvalidityReason::kContextInsufficient));
  }
  {
    auto r = broken_raw("None");
    r.context_sufficient = "No";
    add("broken without reason but no context", r,
        invalid(InvalidityReason::kContextInsufficient));
  }
  fails("broken without reason", broken_raw("None"), "InconsistentAnnotation");
  add("followup no folds to maybe",
      valid_raw("Goals and plans", "Future", "Self", {"Short-term"}, "No"),
      valid(MC::kGoalsAndPlans, Time::kFuture, Referent::kSelf, Duration::kShortTerm,
            Followup::kMaybe));
  add("followup yes kept", valid_raw("Goals and plans", "Future", "Self", {"Short-term"}, "Yes"),
      valid(MC::kGoalsAndPlans, Time::kFuture, Referent::kSelf, Duration::kShortTerm,
            Followup::kYes));
  add("followup maybe kept",
      valid_raw("Goals and plans", "Future", "Other", {"Long-term"}, "Maybe"),
      valid(MC::kGoalsAndPlans, Time::kFuture, Referent::kOther, Duration::kLongTerm,
            Followup::kMaybe));
  add("future without followup",
      valid_raw("Goals and plans", "Future", "Self", {"Long-term"}, "None"),
      valid(MC::kGoalsAndPlans, Time::kFuture, Referent::kSelf, Duration::kLongTerm));
  add("followup dropped off future", valid_raw("Routine activities", "Present", "Self",
                                               {"Long-term"}, "Yes"),
      valid(MC::kRoutineActivities, Time::kPresent, Referent::kSelf, Duration::kLongTerm));
  add("followup no dropped on past", valid_raw("Experience", "Past", "Self", {"Long-term"}, "No"),
      valid(MC::kExperience, Time::kPast, Referent::kSelf, Duration::kLongTerm));
  add("dual duration excluded",
      valid_raw("Goals and plans", "Future", "Self", {"Short-term", "Long-term"}),
      valid(MC::kGoalsAndPlans, Time::kFuture, Referent::kSelf, Duration::kNone), true);
  add("dual duration reversed order",
      valid_raw("Possessions", "Present", "Self", {"Long-term", "Short-term"}),
      valid(MC::kPossessions, Time::kPresent, Referent::kSelf, Duration::kNone), true);
  add("short term", valid_raw("Experience", "Past", "Self", {"Short-term"}),
      valid(MC::kExperience, Time::kPast, Referent::kSelf, Duration::kShortTerm));
  add("long term", valid_raw("Demographics", "Present", "Self", {"Long-term"}),
      valid(MC::kDemographics, Time::kPresent, Referent::kSelf, Duration::kLongTerm));
  add("no duration", valid_raw("Characteristics", "Present", "Self", {}),
      valid(MC::kCharacteristics, Time::kPresent, Referent::kSelf, Duration::kNone));
  add("routine activities prompt casing",
      valid_raw("Routine activities", "Present", "Self", {"Long-term"}),
      valid(MC::kRoutineActivities, Time::kPresent, Referent::kSelf, Duration::kLongTerm));
  {
    auto r = valid_raw("Experience", "Past", "Self", {"Long-term"});
    r.categories = {"Experience", "Demographics"};
    add("categories list dropped", r,
        valid(MC::kExperience, Time::kPast, Referent::kSelf, Duration::kLongTerm));
  }
  {
    auto r = valid_raw("Preferences", "Present", "Self", {"Long-term"});
    r.specificity = "General";
    add("specificity dropped", r,
        valid(MC::kPreferences, Time::kPresent, Referent::kSelf, Duration::kLongTerm));
  }
  add("relationships other referent", valid_raw("Relationships", "Present", "Other", {"Long-term"}),
      valid(MC::kRelationships, Time::kPresent, Referent::kOther, Duration::kLongTerm));
  fails("unknown main category", valid_raw("Hobbies", "Present", "Self", {"Long-term"}),
        "UnknownEnumValue");
  fails("enum match is case sensitive", valid_raw("Preferences", "future", "Self", {"Long-term"}),
        "UnknownEnumValue");
  add("enum match trims whitespace",
      valid_raw("Preferences", " Present ", "Self", {" Long-term"}),
      valid(MC::kPreferences, Time::kPresent, Referent::kSelf, Duration::kLongTerm));
  fails("unknown broken reason", broken_raw("Not about self"), "UnknownEnumValue");
  {
    auto r = valid_raw("Preferences", "Present", "Self", {"Long-term"});
    r.broken_reason = "Opinion";
    add("broken reason ignored on valid fact", r,
        valid(MC::kPreferences, Time::kPresent, Referent::kSelf, Duration::kLongTerm));
  }
  {
    auto r = valid_raw("Preferences", "Present", "Self", {"Long-term"});
    r.broken = "Maybe";
    fails("broken must be yes or no", r, "UnknownEnumValue");
  }
  return f;
}

// ---- generators ----

inline LabelSet random_valid_labelset(Rng& rng) {
  LabelSet l;
  if (rng.below(4) == 0) {
    l.validity = Validity::kInvalid;
    l.invalidity_reason = static_cast<InvalidityReason>(rng.below(5));
    return l;
  }
  l.main_category = static_cast<MainCategory>(rng.below(8));
  l.time = static_cast<Time>(rng.below(4));
  l.referent = static_cast<Referent>(rng.below(3));
  l.duration = static_cast<Duration>(rng.below(3));
  if (l.time == Time::kFuture) l.followup = static_cast<Followup>(rng.below(3));
  return l;
}

inline std::string pick(Rng& rng, const std::vector<std::string>& options) {
  return options[rng.below(options.size())];
}

// Any combination of prompt enumeration values, valid or not as a whole.
inline RawAnnotation random_raw(Rng& rng) {
  const std::vector<std::string> cats = {"Preferences",  "Characteristics", "Routine activities",
                                         "Experience",   "Goals and plans", "Relationships",
                                         "Demographics", "Possessions"};
  RawAnnotation r;
  for (std::size_t i = 0, n = rng.below(3); i < n; ++i) r.categories.push_back(pick(rng, cats));
  auto with_none = cats;
  with_none.push_back("None");
  r.main_category = pick(rng, with_none);
  r.time = pick(rng, {"Past", "Present", "Future", "None"});
  r.referent = pick(rng, {"Self", "Other", "None"});
  r.specificity = pick(rng, {"Specific", "General", "None"});
  const auto dur = rng.below(4);
  if (dur & 1) r.duration.push_back("Short-term");
  if (dur & 2) r.duration.push_back("Long-term");
  r.context_sufficient = pick(rng, {"Yes", "No", "None"});
  r.broken = pick(rng, {"Yes", "No"});
  r.broken_reason = pick(
      rng, {"Multiple facts", "Opinion", "Not about self/known people", "No fact", "None"});
  if (r.broken == "Yes" && r.broken_reason == "None" && r.context_sufficient != "No") {
    r.broken_reason = "Opinion";
  }
  r.followup = pick(rng, {"Yes", "No", "Maybe", "None"});
  return r;
}

// `n` facts with valid random labels; embedding row = one-hot block per
// dimension (scaled by `scale`) plus uniform noise in +-noise.
struct SyntheticData {
  std::vector<FactRecord> facts;
  EmbeddingMatrix embeddings;
};

inline SyntheticData separable_dataset(std::size_t n, std::uint64_t seed, double scale = 1.0,
                                       double noise = 0.05) {
  Rng rng(seed);
  std::size_t d = 0;
  for (auto dim : kAllDimensions) d += label_count(dim);
  SyntheticData out;
  RowMatrixF rows = RowMatrixF::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    FactRecord f;
    f.id = "f" + std::to_string(i);
    f.text = "synthetic fact " + std::to_string(i);
    f.labels = random_valid_labelset(rng);
    std::size_t offset = 0;
    for (auto dim : kAllDimensions) {
      for (std::size_t j = 0; j < label_count(dim); ++j) {
        rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(offset + j)) =
            static_cast<float>(rng.uniform(-noise, noise));
      }
      rows(static_cast<Eigen::Index>(i),
           static_cast<Eigen::Index>(offset + static_cast<std::size_t>(f.labels->index(dim)))) +=
          static_cast<float>(scale);
      offset += label_count(dim);
    }
    ids.push_back(f.id);
    out.facts.push_back(std::move(f));
  }
  out.embeddings = EmbeddingMatrix(std::move(rows), std::move(ids));
  return out;
}

// ---- brute-force oracles ----

inline std::vector<std::string> present_ratings(const std::vector<std::optional<std::string>>& u) {
  std::vector<std::string> r;
  for (const auto& v : u) {
    if (v) r.push_back(*v);
  }
  return r;
}

inline double oracle_percent(const RatingsTable& t) {
  double sum = 0.0;
  int units = 0;
  for (const auto& u : t.values) {
    const auto r = present_ratings(u);
    if (r.size() < 2) continue;
    int agree = 0;
    int total = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (i == j) continue;
        ++total;
        agree += r[i] == r[j];
      }
    }
    sum += static_cast<double>(agree) / total;
    ++units;
  }
  return sum / units;
}

inline double oracle_cohen(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> labels(a.begin(), a.end());
  labels.insert(b.begin(), b.end());
  std::map<std::pair<std::string, std::string>, double> confusion;
  for (std::size_t i = 0; i < a.size(); ++i) confusion[{a[i], b[i]}] += 1.0;
  const double n = static_cast<double>(a.size());
  double po = 0.0;
  double pe = 0.0;
  for (const auto& x : labels) {
    po += confusion[{x, x}] / n;
    double row = 0.0;
    double col = 0.0;
    for (const auto& y : labels) {
      row += confusion[{x, y}];
      col += confusion[{y, x}];
    }
    pe += (row / n) * (col / n);
  }
  if (pe == 1.0) return po == 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

inline double oracle_fleiss(const RatingsTable& t) {
  const double n = static_cast<double>(t.raters());
  double pbar = 0.0;
  std::map<std::string, double> totals;
  for (const auto& u : t.values) {
    double agree = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      totals[*u[i]] += 1.0;
      for (std::size_t j = 0; j < u.size(); ++j) {
        if (i != j && *u[i] == *u[j]) agree += 1.0;
      }
    }
    pbar += agree / (n * (n - 1.0));
  }
  pbar /= static_cast<double>(t.units());
  double pe = 0.0;
  for (const auto& [k, c] : totals) {
    const double p = c / (n * static_cast<double>(t.units()));
    pe += p * p;
  }
  if (pe == 1.0) return pbar == 1.0 ? 1.0 : 0.0;
  return (pbar - pe) / (1.0 - pe);
}

// Pairwise enumeration over the flattened list of pairable values.
inline double oracle_alpha(const RatingsTable& t) {
  std::vector<std::string> pool;
  double observed = 0.0;
  for (const auto& u : t.values) {
    const auto r = present_ratings(u);
    if (r.size() < 2) continue;
    double mismatch = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (i != j && r[i] != r[j]) mismatch += 1.0;
      }
    }
    observed += mismatch / static_cast<double>(r.size() - 1);
    pool.insert(pool.end(), r.begin(), r.end());
  }
  const double n = static_cast<double>(pool.size());
  double expected = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = 0; j < pool.size(); ++j) {
      if (i != j && pool[i] != pool[j]) expected += 1.0;
    }
  }
  const double d_o = observed / n;
  const double d_e = expected / (n * (n - 1.0));
  if (d_e == 0.0) return 1.0;
  return 1.0 - d_o / d_e;
}

inline RatingsTable random_table(Rng& rng, bool allow_missing) {
  RatingsTable t;
  const auto units = 1 + rng.below(6);
  const auto raters = 2 + rng.below(3);
  const auto labels = 1 + rng.below(4);
  for (std::size_t u = 0; u < units; ++u) {
    std::vector<std::optional<std::string>> row;
    for (std::size_t r = 0; r < raters; ++r) {
      if (allow_missing && rng.below(5) == 0) {
        row.emplace_back();
      } else {
        row.emplace_back(std::string(1, static_cast<char>('a' + rng.below(labels))));
      }
    }
    t.values.push_back(std::move(row));
  }
  return t;
}

inline bool has_pairable_unit(const RatingsTable& t) {
  for (const auto& u : t.values) {
    if (present_ratings(u).size() >= 2) return true;
  }
  return false;
}

// Macro-F1 from an explicit confusion matrix, labels = gold U pred.
inline double oracle_macro_f1(const std::vector<int>& gold, const std::vector<int>& pred) {
  std::set<int> labels(gold.begin(), gold.end());
  labels.insert(pred.begin(), pred.end());
  std::map<std::pair<int, int>, int> cm;
  for (std::size_t i = 0; i < gold.size(); ++i) ++cm[{gold[i], pred[i]}];
  double sum = 0.0;
  for (int l : labels) {
    int tp = cm[{l, l}];
    int gold_l = 0;
    int pred_l = 0;
    for (int m : labels) {
      gold_l += cm[{l, m}];
      pred_l += cm[{m, l}];
    }
    const double p = pred_l ? static_cast<double>(tp) / pred_l : 0.0;
    const double r = gold_l ? static_cast<double>(tp) / gold_l : 0.0;
    sum += (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  return sum / static_cast<double>(labels.size());
}

// Pooled macro-F1: label type = dimension * 100 + label.
inline double oracle_pooled(const std::vector<LabelSet>& gold, const std::vector<LabelSet>& pred) {
  std::vector<int> g;
  std::vector<int> p;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t d = 0; d < kNumDimensions; ++d) {
      g.push_back(static_cast<int>(d) * 100 + gold[i].index(kAllDimensions[d]));
      p.push_back(static_cast<int>(d) * 100 + pred[i].index(kAllDimensions[d]));
    }
  }
  return oracle_macro_f1(g, p);
}

}  // namespace pfacts::testing
