#pragma once

// Inter-annotator agreement: percent agreement, Cohen's kappa, Fleiss'
// kappa, Krippendorff's alpha (nominal) and Landis-Koch bands.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pfacts/core.hpp"

namespace pfacts {

// N units x R raters; nullopt marks a missing rating.
struct RatingsTable {
  std::vector<std::vector<std::optional<std::string>>> values;
  std::optional<Dimension> dimension;

  std::size_t units() const { return values.size(); }
  std::size_t raters() const { return values.empty() ? 0 : values.front().size(); }
};

// Mean over units with >= 2 ratings of (agreeing pairs / pairs).
double percent_agreement(const RatingsTable& table);

// Degenerate chance agreement (p_e = 1) yields 1 if p_o = 1, else 0.
double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Complete tables only (MissingRatings otherwise); same degenerate rule.
double fleiss_kappa(const RatingsTable& table);

// Coincidence-matrix alpha with nominal distance. Units with fewer than two
// ratings are ignored. D_e = 0 yields 1.
double krippendorff_alpha_nominal(const RatingsTable& table);

enum class AgreementBand {
  kPoor,
  kSlight,
  kFair,
  kModerate,
  kSubstantial,
  kAlmostPerfect,
};

std::string_view band_name(AgreementBand band);

// Bands applied to the value rounded to three decimals, upper edges
// inclusive: <0 Poor, <=0.20 Slight, <=0.40 Fair, <=0.60 Moderate,
// <=0.80 Substantial, else Almost Perfect.
AgreementBand landis_koch(double value);

struct AgreementReport {
  std::string label;  // dimension name
  double percent = 0.0;
  std::optional<double> cohen_kappa;  // two raters only
  double fleiss_kappa = 0.0;
  double kripp_alpha = 0.0;
  AgreementBand interpretation = AgreementBand::kPoor;
  std::size_t n = 0;
};

// Units with a missing rating are dropped for percent/kappa statistics and
// kept for alpha. The band follows Cohen's kappa with two raters and
// Fleiss' kappa otherwise.
AgreementReport agreement_report(const RatingsTable& table, std::string label);

// Row-wise averages, band taken from the averaged kappa.
AgreementReport average_report(const std::vector<AgreementReport>& rows);

// Table-shaped text plus `key=value` lines.
std::string format_agreement(const std::vector<AgreementReport>& rows,
                             const AgreementReport& average);

}  // namespace pfacts
