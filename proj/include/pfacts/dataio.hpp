#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pfacts/core.hpp"

namespace pfacts {

class ParseError : public Error {
 public:
  ParseError(std::size_t line_no, const std::string& message)
      : Error(ErrorCategory::kParse, "ParseError",
              "line " + std::to_string(line_no) + ": " + message),
        line_no_(line_no) {}
  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

// Facts files are JSON Lines. One object per line:
//   {"id": "...", "text": "...", "context": "..." | null,
//    "source": "MSC" | "PersonaChat" | "Other",
//    "labels": {"main_category": "Preferences", ..., "followup": "None"},
//    "excluded": false, "exclusion_reason": null}
// `context`, `labels`, `excluded` and `exclusion_reason` are optional.
std::vector<FactRecord> read_facts(std::istream& in);
std::vector<FactRecord> read_facts(const std::filesystem::path& path);
void write_facts(std::ostream& out, const std::vector<FactRecord>& facts);
void write_facts(const std::filesystem::path& path,
                 const std::vector<FactRecord>& facts);

// Raw annotation files carry the prompt JSON under "annotation":
//   {"id": "...", "text": "...", "context": ..., "source": ...,
//    "annotation": {"categories": [...], "main_category": ..., ...}}
struct RawRecord {
  FactRecord fact;
  RawAnnotation annotation;
};
std::vector<RawRecord> read_raw_annotations(const std::filesystem::path& path);

// Keeps the first occurrence of each trimmed text, in input order.
std::vector<FactRecord> dedup_exact(const std::vector<FactRecord>& facts);

// Exact non-negative rational.
struct Ratio {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Ratio parse(const std::string& text);  // "0.7", "7/10", "1"
  std::string str() const;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

struct SplitSpec {
  Ratio train{7, 10};
  Ratio val{1, 10};
  Ratio test{2, 10};
  std::uint64_t seed = 42;
  Dimension stratify_by = Dimension::kMainCategory;

  // Throws a ConfigError unless the fractions sum to exactly 1.
  void check() const;
};

struct SplitAssignment {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;

  friend bool operator==(const SplitAssignment&,
                         const SplitAssignment&) = default;
};

// Largest-remainder allocation of `n` items over the three fractions,
// remainder ties going to train, then val, then test.
std::array<std::size_t, 3> apportion(std::size_t n, const SplitSpec& spec);

// Per stratum: seeded Fisher-Yates shuffle, then the apportioned prefix
// lengths become train/val/test. Each output list is in input order.
SplitAssignment stratified_split(const std::vector<FactRecord>& facts,
                                 const SplitSpec& spec);

// Split file:
//   # seed=42 train=7/10 val=1/10 test=1/5
//   <comma-separated train ids>
//   <comma-separated val ids>
//   <comma-separated test ids>
void write_split(const std::filesystem::path& path, const SplitSpec& spec,
                 const SplitAssignment& split);
SplitAssignment read_split(const std::filesystem::path& path,
                           SplitSpec* spec = nullptr);

// Drops facts flagged as excluded or lacking labels.
std::vector<FactRecord> supervised_only(const std::vector<FactRecord>& facts);

}  // namespace pfacts
