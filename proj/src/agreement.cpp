#include "pfacts/agreement.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace pfacts {

namespace {

Error no_comparable_units() {
  return Error(ErrorCategory::kData, "NoComparableUnits",
               "no unit has two or more ratings");
}

std::vector<std::string> present(const std::vector<std::optional<std::string>>& unit) {
  std::vector<std::string> out;
  for (const auto& v : unit) {
    if (v) out.push_back(*v);
  }
  return out;
}

void check_shape(const RatingsTable& table) {
  for (const auto& unit : table.values) {
    if (unit.size() != table.raters()) {
      throw Error(ErrorCategory::kData, "RaggedTable", "units have differing rater counts");
    }
  }
}

double chance_corrected(double observed, double expected) {
  if (expected >= 1.0) return observed >= 1.0 ? 1.0 : 0.0;
  return (observed - expected) / (1.0 - expected);
}

}  // namespace

double percent_agreement(const RatingsTable& table) {
  check_shape(table);
  double total = 0.0;
  std::size_t units = 0;
  for (const auto& unit : table.values) {
    const auto r = present(unit);
    if (r.size() < 2) continue;
    std::size_t agree = 0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      for (std::size_t j = i + 1; j < r.size(); ++j) {
        ++pairs;
        if (r[i] == r[j]) ++agree;
      }
    }
    total += static_cast<double>(agree) / static_cast<double>(pairs);
    ++units;
  }
  if (units == 0) throw no_comparable_units();
  return total / static_cast<double>(units);
}

double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCategory::kData, "LengthMismatch", "rater lists differ in length");
  }
  if (a.empty()) throw Error(ErrorCategory::kData, "EmptyInput", "no ratings");
  const double n = static_cast<double>(a.size());
  std::map<std::string, std::pair<double, double>> marginals;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    marginals[a[i]].first += 1.0;
    marginals[b[i]].second += 1.0;
    if (a[i] == b[i]) agree += 1.0;
  }
  double expected = 0.0;
  for (const auto& [label, m] : marginals) expected += (m.first / n) * (m.second / n);
  return chance_corrected(agree / n, expected);
}

double fleiss_kappa(const RatingsTable& table) {
  check_shape(table);
  const std::size_t raters = table.raters();
  if (table.units() == 0 || raters < 2) throw no_comparable_units();
  std::map<std::string, double> totals;
  double p_bar = 0.0;
  const double n = static_cast<double>(raters);
  for (const auto& unit : table.values) {
    std::map<std::string, double> counts;
    for (const auto& v : unit) {
      if (!v) {
        throw Error(ErrorCategory::kData, "MissingRatings",
                    "Fleiss' kappa requires a complete ratings table");
      }
      counts[*v] += 1.0;
    }
    double sum_sq = 0.0;
    for (const auto& [label, c] : counts) {
      sum_sq += c * c;
      totals[label] += c;
    }
    p_bar += (sum_sq - n) / (n * (n - 1.0));
  }
  const double units = static_cast<double>(table.units());
  p_bar /= units;
  double p_e = 0.0;
  for (const auto& [label, c] : totals) {
    const double p = c / (units * n);
    p_e += p * p;
  }
  return chance_corrected(p_bar, p_e);
}

double krippendorff_alpha_nominal(const RatingsTable& table) {
  check_shape(table);
  // o[c][k]: coincidences; each unit with m ratings adds 1/(m-1) per ordered
  // pair of distinct raters.
  std::map<std::string, std::map<std::string, double>> o;
  bool any = false;
  for (const auto& unit : table.values) {
    const auto r = present(unit);
    if (r.size() < 2) continue;
    any = true;
    const double w = 1.0 / static_cast<double>(r.size() - 1);
    for (std::size_t i = 0; i < r.size(); ++i) {
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (i != j) o[r[i]][r[j]] += w;
      }
    }
  }
  if (!any) throw no_comparable_units();

  std::map<std::string, double> n_c;
  double n = 0.0;
  double disagree = 0.0;
  for (const auto& [c, row] : o) {
    for (const auto& [k, v] : row) {
      n_c[c] += v;
      n += v;
      if (c != k) disagree += v;
    }
  }
  double expected = 0.0;
  for (const auto& [c, nc] : n_c) {
    for (const auto& [k, nk] : n_c) {
      if (c != k) expected += nc * nk;
    }
  }
  if (expected == 0.0) return 1.0;
  const double d_o = disagree / n;
  const double d_e = expected / (n * (n - 1.0));
  return 1.0 - d_o / d_e;
}

std::string_view band_name(AgreementBand band) {
  switch (band) {
    case AgreementBand::kPoor: return "Poor";
    case AgreementBand::kSlight: return "Slight";
    case AgreementBand::kFair: return "Fair";
    case AgreementBand::kModerate: return "Moderate";
    case AgreementBand::kSubstantial: return "Substantial";
    case AgreementBand::kAlmostPerfect: return "Almost Perfect";
  }
  return "";
}

AgreementBand landis_koch(double value) {
  if (!(value >= -1.0 - 1e-9 && value <= 1.0 + 1e-9)) {
    throw Error(ErrorCategory::kData, "OutOfRange",
                "agreement value " + std::to_string(value) + " outside [-1, 1]");
  }
  const long long milli = std::llround(value * 1000.0);
  if (milli < 0) return AgreementBand::kPoor;
  if (milli <= 200) return AgreementBand::kSlight;
  if (milli <= 400) return AgreementBand::kFair;
  if (milli <= 600) return AgreementBand::kModerate;
  if (milli <= 800) return AgreementBand::kSubstantial;
  return AgreementBand::kAlmostPerfect;
}

AgreementReport agreement_report(const RatingsTable& table, std::string label) {
  check_shape(table);
  RatingsTable complete;
  complete.dimension = table.dimension;
  for (const auto& unit : table.values) {
    bool full = true;
    for (const auto& v : unit) full = full && v.has_value();
    if (full) complete.values.push_back(unit);
  }
  AgreementReport report;
  report.label = std::move(label);
  report.n = complete.units();
  report.percent = percent_agreement(complete);
  report.fleiss_kappa = fleiss_kappa(complete);
  report.kripp_alpha = krippendorff_alpha_nominal(table);
  if (table.raters() == 2) {
    std::vector<std::string> a;
    std::vector<std::string> b;
    for (const auto& unit : complete.values) {
      a.push_back(*unit[0]);
      b.push_back(*unit[1]);
    }
    report.cohen_kappa = cohen_kappa(a, b);
  }
  report.interpretation = landis_koch(report.cohen_kappa.value_or(report.fleiss_kappa));
  return report;
}

AgreementReport average_report(const std::vector<AgreementReport>& rows) {
  AgreementReport avg;
  avg.label = "Average";
  if (rows.empty()) return avg;
  const double n = static_cast<double>(rows.size());
  double cohen = 0.0;
  bool has_cohen = true;
  for (const auto& r : rows) {
    avg.percent += r.percent / n;
    avg.fleiss_kappa += r.fleiss_kappa / n;
    avg.kripp_alpha += r.kripp_alpha / n;
    has_cohen = has_cohen && r.cohen_kappa.has_value();
    cohen += r.cohen_kappa.value_or(0.0) / n;
  }
  if (has_cohen) avg.cohen_kappa = cohen;
  avg.interpretation = landis_koch(avg.cohen_kappa.value_or(avg.fleiss_kappa));
  return avg;
}

std::string format_agreement(const std::vector<AgreementReport>& rows,
                             const AgreementReport& average) {
  std::ostringstream os;
  const bool pairwise = average.cohen_kappa.has_value();
  os << std::left << std::setw(20) << "Class" << std::setw(14) << "% Agreement"
     << std::setw(10) << (pairwise ? "Cohen k" : "Fleiss k") << std::setw(17)
     << "Interpretation" << std::setw(12) << "Kripp. a" << "N\n";
  auto line = [&](const AgreementReport& r, bool with_n) {
    std::ostringstream pct;
    pct << std::fixed << std::setprecision(1) << 100.0 * r.percent << "%";
    std::ostringstream k;
    k << std::fixed << std::setprecision(3) << r.cohen_kappa.value_or(r.fleiss_kappa);
    std::ostringstream a;
    a << std::fixed << std::setprecision(3) << r.kripp_alpha;
    os << std::setw(20) << r.label << std::setw(14) << pct.str() << std::setw(10) << k.str()
       << std::setw(17) << band_name(r.interpretation) << std::setw(12) << a.str();
    if (with_n) os << r.n;
    os << "\n";
  };
  for (const auto& r : rows) line(r, true);
  line(average, false);
  os << "\n";
  os << std::setprecision(6) << std::fixed;
  for (const auto& r : rows) {
    std::string key = r.label;
    for (auto dim : kAllDimensions) {
      if (dimension_name(dim) == r.label) key = std::string(dimension_key(dim));
    }
    os << "agreement." << key << ".percent=" << r.percent << "\n";
    if (r.cohen_kappa) os << "agreement." << key << ".cohen_kappa=" << *r.cohen_kappa << "\n";
    os << "agreement." << key << ".fleiss_kappa=" << r.fleiss_kappa << "\n";
    os << "agreement." << key << ".kripp_alpha=" << r.kripp_alpha << "\n";
    os << "agreement." << key << ".interpretation=" << band_name(r.interpretation) << "\n";
    os << "agreement." << key << ".n=" << r.n << "\n";
  }
  os << "agreement.average.percent=" << average.percent << "\n";
  if (average.cohen_kappa) os << "agreement.average.cohen_kappa=" << *average.cohen_kappa << "\n";
  os << "agreement.average.fleiss_kappa=" << average.fleiss_kappa << "\n";
  os << "agreement.average.kripp_alpha=" << average.kripp_alpha << "\n";
  os << "agreement.average.interpretation=" << band_name(average.interpretation) << "\n";
  return os.str();
}

}  // namespace pfacts
