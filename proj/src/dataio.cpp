#include "pfacts/dataio.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "pfacts/rng.hpp"

namespace pfacts {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCategory::kIo, "FileNotFound",
                "cannot open " + path.string());
  }
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCategory::kIo, "FileWriteError",
                "cannot write " + path.string());
  }
  return out;
}

std::string get_string(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw ParseError(line_no, std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

std::optional<std::string> get_optional_string(const json& obj, const char* key,
                                               std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw ParseError(line_no, std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

FactRecord parse_fact_fields(const json& obj, std::size_t line_no) {
  if (!obj.is_object()) throw ParseError(line_no, "record is not an object");
  FactRecord fact;
  fact.id = get_string(obj, "id", line_no);
  fact.text = get_string(obj, "text", line_no);
  if (trim(fact.text).empty()) throw ParseError(line_no, "empty fact text");
  fact.context = get_optional_string(obj, "context", line_no);
  if (auto src = get_optional_string(obj, "source", line_no)) {
    auto parsed = source_from_name(*src);
    if (!parsed) throw ParseError(line_no, "unknown source '" + *src + "'");
    fact.source = *parsed;
  }
  return fact;
}

LabelSet parse_labels(const json& obj, std::size_t line_no) {
  if (!obj.is_object()) throw ParseError(line_no, "labels must be an object");
  LabelSet labels;
  for (auto dim : kAllDimensions) {
    const std::string key(dimension_key(dim));
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
      throw ParseError(line_no, "labels missing '" + key + "'");
    }
    auto idx = label_from_name(dim, it->get<std::string>());
    if (!idx) {
      throw ParseError(line_no, "unknown " + key + " value '" +
                                    it->get<std::string>() + "'");
    }
    labels.set_index(dim, *idx);
  }
  return labels;
}

json labels_to_json(const LabelSet& labels) {
  json obj = json::object();
  for (auto dim : kAllDimensions) {
    obj[std::string(dimension_key(dim))] =
        std::string(label_name(dim, labels.index(dim)));
  }
  return obj;
}

std::vector<std::string> string_or_list(const json& v, const char* field,
                                        std::size_t line_no) {
  std::vector<std::string> out;
  if (v.is_string()) {
    out.push_back(v.get<std::string>());
  } else if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_string()) {
        throw ParseError(line_no, std::string("non-string in '") + field + "'");
      }
      out.push_back(e.get<std::string>());
    }
  } else if (!v.is_null()) {
    throw ParseError(line_no, std::string("bad type for '") + field + "'");
  }
  return out;
}

template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    fn(obj, line_no);
  }
}

void check_id(const std::string& id) {
  if (id.empty() || id.find_first_of(",\n\r") != std::string::npos) {
    throw Error(ErrorCategory::kData, "BadId",
                "fact id '" + id + "' is empty or contains ',' or a newline");
  }
}

}  // namespace

std::vector<FactRecord> read_facts(std::istream& in) {
  std::vector<FactRecord> facts;
  std::unordered_set<std::string> seen;
  for_each_json_line(in, [&](const json& obj, std::size_t line_no) {
    FactRecord fact = parse_fact_fields(obj, line_no);
    if (auto it = obj.find("labels"); it != obj.end() && !it->is_null()) {
      fact.labels = parse_labels(*it, line_no);
    }
    if (auto it = obj.find("excluded"); it != obj.end() && !it->is_null()) {
      if (!it->is_boolean()) throw ParseError(line_no, "'excluded' must be boolean");
      fact.excluded = it->get<bool>();
    }
    fact.exclusion_reason = get_optional_string(obj, "exclusion_reason", line_no);
    if (!seen.insert(fact.id).second) {
      throw Error(ErrorCategory::kData, "DuplicateId",
                  "duplicate fact id '" + fact.id + "' at line " +
                      std::to_string(line_no));
    }
    facts.push_back(std::move(fact));
  });
  return facts;
}

std::vector<FactRecord> read_facts(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_facts(in);
}

void write_facts(std::ostream& out, const std::vector<FactRecord>& facts) {
  for (const auto& fact : facts) {
    json obj;
    obj["id"] = fact.id;
    obj["text"] = fact.text;
    obj["context"] = fact.context ? json(*fact.context) : json(nullptr);
    obj["source"] = std::string(source_name(fact.source));
    obj["labels"] = fact.labels ? labels_to_json(*fact.labels) : json(nullptr);
    if (fact.excluded) {
      obj["excluded"] = true;
      obj["exclusion_reason"] =
          fact.exclusion_reason ? json(*fact.exclusion_reason) : json(nullptr);
    }
    out << obj.dump() << '\n';
  }
}

void write_facts(const std::filesystem::path& path,
                 const std::vector<FactRecord>& facts) {
  auto out = open_out(path);
  write_facts(out, facts);
}

std::vector<RawRecord> read_raw_annotations(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<RawRecord> records;
  std::unordered_set<std::string> seen;
  for_each_json_line(in, [&](const json& obj, std::size_t line_no) {
    RawRecord rec;
    rec.fact = parse_fact_fields(obj, line_no);
    if (!seen.insert(rec.fact.id).second) {
      throw Error(ErrorCategory::kData, "DuplicateId",
                  "duplicate fact id '" + rec.fact.id + "'");
    }
    auto it = obj.find("annotation");
    if (it == obj.end() || !it->is_object()) {
      throw ParseError(line_no, "missing 'annotation' object");
    }
    const json& a = *it;
    auto& raw = rec.annotation;
    auto str = [&](const char* key, std::string& dst) {
      if (auto v = get_optional_string(a, key, line_no)) dst = *v;
    };
    if (a.contains("categories")) {
      raw.categories = string_or_list(a["categories"], "categories", line_no);
    }
    str("main_category", raw.main_category);
    str("time", raw.time);
    str("referent", raw.referent);
    str("specificity", raw.specificity);
    if (a.contains("duration")) {
      raw.duration = string_or_list(a["duration"], "duration", line_no);
    }
    str("context_sufficient", raw.context_sufficient);
    str("broken", raw.broken);
    str("broken_reason", raw.broken_reason);
    str("followup", raw.followup);
    records.push_back(std::move(rec));
  });
  return records;
}

std::vector<FactRecord> dedup_exact(const std::vector<FactRecord>& facts) {
  std::vector<FactRecord> out;
  std::unordered_set<std::string_view> seen;
  for (const auto& fact : facts) {
    if (seen.insert(trim(fact.text)).second) out.push_back(fact);
  }
  return out;
}

Ratio Ratio::parse(const std::string& text) {
  auto bad = [&] {
    return Error(ErrorCategory::kConfig, "BadFraction",
                 "cannot parse fraction '" + text + "'");
  };
  auto t = std::string(trim(text));
  Ratio r;
  try {
    if (auto slash = t.find('/'); slash != std::string::npos) {
      std::size_t used = 0;
      r.num = std::stoll(t.substr(0, slash), &used);
      if (used != slash) throw bad();
      auto den_str = t.substr(slash + 1);
      r.den = std::stoll(den_str, &used);
      if (used != den_str.size()) throw bad();
    } else {
      auto dot = t.find('.');
      std::string digits = t;
      r.den = 1;
      if (dot != std::string::npos) {
        digits = t.substr(0, dot) + t.substr(dot + 1);
        for (std::size_t i = dot + 1; i < t.size(); ++i) r.den *= 10;
      }
      if (digits.empty() ||
          !std::all_of(digits.begin(), digits.end(),
                       [](char c) { return c >= '0' && c <= '9'; }) ||
          digits.size() > 15) {
        throw bad();
      }
      r.num = std::stoll(digits);
    }
  } catch (const std::logic_error&) {
    throw bad();
  }
  if (r.num < 0 || r.den <= 0) throw bad();
  const auto g = std::gcd(r.num, r.den);
  if (g > 1) {
    r.num /= g;
    r.den /= g;
  }
  return r;
}

std::string Ratio::str() const {
  return std::to_string(num) + "/" + std::to_string(den);
}

void SplitSpec::check() const {
  // a/b + c/d + e/f == 1  <=>  a*d*f + c*b*f + e*b*d == b*d*f
  const __int128 lhs = static_cast<__int128>(train.num) * val.den * test.den +
                       static_cast<__int128>(val.num) * train.den * test.den +
                       static_cast<__int128>(test.num) * train.den * val.den;
  const __int128 rhs = static_cast<__int128>(train.den) * val.den * test.den;
  if (lhs != rhs) {
    throw Error(ErrorCategory::kConfig, "BadSplitFractions",
                "split fractions " + train.str() + ", " + val.str() + ", " +
                    test.str() + " do not sum to 1");
  }
}

std::array<std::size_t, 3> apportion(std::size_t n, const SplitSpec& spec) {
  const std::array<Ratio, 3> fracs = {spec.train, spec.val, spec.test};
  std::array<std::size_t, 3> counts{};
  // Remainders compared exactly as (num*n mod den)/den via cross products.
  std::array<std::pair<std::int64_t, std::int64_t>, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t p = 0; p < 3; ++p) {
    const auto scaled = static_cast<std::int64_t>(n) * fracs[p].num;
    counts[p] = static_cast<std::size_t>(scaled / fracs[p].den);
    rem[p] = {scaled % fracs[p].den, fracs[p].den};
    assigned += counts[p];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return static_cast<__int128>(rem[a].first) * rem[b].second >
           static_cast<__int128>(rem[b].first) * rem[a].second;
  });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % 3]];
  return counts;
}

SplitAssignment stratified_split(const std::vector<FactRecord>& facts,
                                 const SplitSpec& spec) {
  spec.check();
  if (facts.empty()) {
    throw Error(ErrorCategory::kData, "EmptyInput", "no facts to split");
  }
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    const auto& fact = facts[i];
    if (!fact.labels) {
      throw Error(ErrorCategory::kData, "MissingLabels",
                  "fact '" + fact.id + "' has no labels");
    }
    if (fact.excluded) {
      throw Error(ErrorCategory::kData, "ExcludedFact",
                  "fact '" + fact.id + "' is excluded and cannot be split");
    }
    strata[fact.labels->index(spec.stratify_by)].push_back(i);
  }

  Rng rng(spec.seed);
  std::vector<int> part(facts.size(), -1);
  for (auto& [label, members] : strata) {
    rng.shuffle(std::span<std::size_t>(members));
    const auto counts = apportion(members.size(), spec);
    std::size_t pos = 0;
    for (int p = 0; p < 3; ++p) {
      for (std::size_t k = 0; k < counts[static_cast<std::size_t>(p)]; ++k) {
        part[members[pos++]] = p;
      }
    }
  }

  SplitAssignment out;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    switch (part[i]) {
      case 0: out.train.push_back(facts[i].id); break;
      case 1: out.val.push_back(facts[i].id); break;
      default: out.test.push_back(facts[i].id); break;
    }
  }
  return out;
}

void write_split(const std::filesystem::path& path, const SplitSpec& spec,
                 const SplitAssignment& split) {
  auto out = open_out(path);
  out << "# seed=" << spec.seed << " train=" << spec.train.str()
      << " val=" << spec.val.str() << " test=" << spec.test.str() << '\n';
  for (const auto* ids : {&split.train, &split.val, &split.test}) {
    for (std::size_t i = 0; i < ids->size(); ++i) {
      check_id((*ids)[i]);
      if (i) out << ',';
      out << (*ids)[i];
    }
    out << '\n';
  }
}

SplitAssignment read_split(const std::filesystem::path& path, SplitSpec* spec) {
  auto in = open_in(path);
  std::string header;
  if (!std::getline(in, header) || header.rfind("# ", 0) != 0) {
    throw ParseError(1, "split file lacks '# seed=...' header");
  }
  SplitSpec parsed;
  {
    std::istringstream hs(header.substr(2));
    std::string kv;
    while (hs >> kv) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw ParseError(1, "bad header token " + kv);
      auto key = kv.substr(0, eq);
      auto value = kv.substr(eq + 1);
      if (key == "seed") {
        parsed.seed = std::stoull(value);
      } else if (key == "train") {
        parsed.train = Ratio::parse(value);
      } else if (key == "val") {
        parsed.val = Ratio::parse(value);
      } else if (key == "test") {
        parsed.test = Ratio::parse(value);
      } else {
        throw ParseError(1, "unknown header key " + key);
      }
    }
  }
  SplitAssignment split;
  std::size_t line_no = 1;
  for (auto* ids : {&split.train, &split.val, &split.test}) {
    std::string line;
    ++line_no;
    if (!std::getline(in, line)) throw ParseError(line_no, "missing id line");
    std::istringstream ls(line);
    std::string id;
    while (std::getline(ls, id, ',')) {
      if (!id.empty()) ids->push_back(id);
    }
  }
  if (spec) *spec = parsed;
  return split;
}

std::vector<FactRecord> supervised_only(const std::vector<FactRecord>& facts) {
  std::vector<FactRecord> out;
  for (const auto& f : facts) {
    if (f.labels && !f.excluded) out.push_back(f);
  }
  return out;
}

}  // namespace pfacts
