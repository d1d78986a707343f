#include "pfacts/config.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>
#include <openssl/evp.h>

namespace pfacts {

namespace {

Error config_error(const std::string& msg) {
  return Error(ErrorCategory::kConfig, "ConfigError", msg);
}

template <typename T>
T parse_uint(std::string_view key, std::string_view text) {
  const auto t = trim(text);
  T value{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw config_error(std::string(key) + ": expected a non-negative integer, got '" +
                       std::string(text) + "'");
  }
  return value;
}

double parse_double(std::string_view key, std::string_view text) {
  const std::string t(trim(text));
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used == t.size()) return v;
  } catch (const std::exception&) {
  }
  throw config_error(std::string(key) + ": expected a number, got '" + std::string(text) + "'");
}

bool parse_bool(std::string_view key, std::string_view text) {
  const auto t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw config_error(std::string(key) + ": expected true/false, got '" + std::string(text) + "'");
}

std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    const auto item = trim(text.substr(start, comma - start));
    if (!item.empty()) seeds.push_back(parse_uint<std::uint64_t>("run.seeds", item));
    start = comma + 1;
  }
  return seeds;
}

void assign(RunConfig& c, const std::string& section, const std::string& key,
            const std::string& value) {
  const std::string full = section + "." + key;
  auto unknown = [&] { return config_error("unknown setting '" + full + "'"); };
  if (section == "paths") {
    c.paths[key] = std::string(trim(value));
  } else if (section == "run") {
    if (key != "seeds") throw unknown();
    c.seeds = parse_seeds(value);
  } else if (section == "split") {
    if (key == "train") c.split.train = Ratio::parse(value);
    else if (key == "val") c.split.val = Ratio::parse(value);
    else if (key == "test") c.split.test = Ratio::parse(value);
    else if (key == "seed") c.split.seed = parse_uint<std::uint64_t>(full, value);
    else if (key == "stratify_by") {
      auto dim = dimension_from_key(trim(value));
      if (!dim) throw config_error(full + ": unknown dimension '" + value + "'");
      c.split.stratify_by = *dim;
    } else {
      throw unknown();
    }
  } else if (section == "train") {
    auto& t = c.train;
    if (key == "learning_rate") t.learning_rate = parse_double(full, value);
    else if (key == "batch_size") t.batch_size = parse_uint<std::size_t>(full, value);
    else if (key == "max_epochs") t.max_epochs = parse_uint<std::size_t>(full, value);
    else if (key == "patience") t.patience = parse_uint<std::size_t>(full, value);
    else if (key == "weight_decay") t.weight_decay = parse_double(full, value);
    else if (key == "beta1") t.adam_beta1 = parse_double(full, value);
    else if (key == "beta2") t.adam_beta2 = parse_double(full, value);
    else if (key == "eps") t.adam_eps = parse_double(full, value);
    else if (key == "per_label_weights") t.per_label_weights = parse_bool(full, value);
    else throw unknown();
  } else if (section == "model") {
    if (key == "hidden") c.model.hidden = parse_uint<std::size_t>(full, value);
    else if (key == "dropout") c.model.dropout = parse_double(full, value);
    else throw unknown();
  } else if (section == "sampling") {
    if (key == "k") c.sampling.k = parse_uint<std::size_t>(full, value);
    else if (key == "cap") c.sampling.cap = parse_uint<std::size_t>(full, value);
    else if (key == "max_iter") c.sampling.max_iter = parse_uint<std::size_t>(full, value);
    else if (key == "tol") c.sampling.tol = parse_double(full, value);
    else throw unknown();
  } else if (section == "embedding") {
    auto& e = c.embedding;
    if (key == "mode") {
      const auto m = trim(value);
      if (m == "file") e.mode = EmbeddingConfig::Mode::kFile;
      else if (m == "http") e.mode = EmbeddingConfig::Mode::kHttp;
      else throw config_error(full + ": expected file or http, got '" + value + "'");
    } else if (key == "path") {
      e.path = std::string(trim(value));
    } else if (key == "endpoint") {
      e.endpoint = std::string(trim(value));
    } else if (key == "batch_size") {
      e.batch_size = parse_uint<std::size_t>(full, value);
    } else if (key == "timeout_ms") {
      e.timeout_ms = parse_uint<std::size_t>(full, value);
    } else if (key == "retries") {
      e.retries = parse_uint<int>(full, value);
    } else {
      throw unknown();
    }
  } else {
    throw config_error("unknown section [" + section + "]");
  }
}

}  // namespace

void RunConfig::check() const {
  if (seeds.empty()) throw config_error("run.seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw config_error("run.seeds must be distinct");
  }
  split.check();
  train.check();
  if (!(model.dropout >= 0.0 && model.dropout < 1.0)) {
    throw config_error("model.dropout must lie in [0, 1)");
  }
  if (sampling.k == 0) throw config_error("sampling.k must be positive");
  if (sampling.cap == 0) throw config_error("sampling.cap must be positive");
  if (embedding.batch_size == 0) throw config_error("embedding.batch_size must be positive");
  if (embedding.retries < 0) throw config_error("embedding.retries must be non-negative");
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "run.seeds=";
  for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
  os << "\n";
  os << "split.train=" << split.train.str() << "\nsplit.val=" << split.val.str()
     << "\nsplit.test=" << split.test.str() << "\nsplit.seed=" << split.seed
     << "\nsplit.stratify_by=" << dimension_key(split.stratify_by) << "\n";
  os << "train.learning_rate=" << train.learning_rate << "\ntrain.batch_size=" << train.batch_size
     << "\ntrain.max_epochs=" << train.max_epochs << "\ntrain.patience=" << train.patience
     << "\ntrain.weight_decay=" << train.weight_decay << "\ntrain.beta1=" << train.adam_beta1
     << "\ntrain.beta2=" << train.adam_beta2 << "\ntrain.eps=" << train.adam_eps
     << "\ntrain.per_label_weights=" << (train.per_label_weights ? "true" : "false") << "\n";
  os << "model.hidden=" << model.hidden << "\nmodel.dropout=" << model.dropout << "\n";
  os << "sampling.k=" << sampling.k << "\nsampling.cap=" << sampling.cap
     << "\nsampling.max_iter=" << sampling.max_iter << "\nsampling.tol=" << sampling.tol << "\n";
  os << "embedding.mode=" << (embedding.mode == EmbeddingConfig::Mode::kFile ? "file" : "http")
     << "\nembedding.path=" << embedding.path << "\nembedding.endpoint=" << embedding.endpoint
     << "\nembedding.batch_size=" << embedding.batch_size
     << "\nembedding.timeout_ms=" << embedding.timeout_ms
     << "\nembedding.retries=" << embedding.retries << "\n";
  for (const auto& [k, v] : paths) os << "paths." << k << "=" << v << "\n";
  return os.str();
}

std::string RunConfig::path_or(const std::string& key, const std::string& fallback) const {
  auto it = paths.find(key);
  return it == paths.end() ? fallback : it->second;
}

RunConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw config_error("line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw config_error("setting '" + section + "' is outside any section");
    for (const auto& [key, node] : body) assign(config, section, key, node.data());
  }
  config.check();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path.string());
  return parse_config(in);
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
    throw config_error("override '" + std::string(assignment) + "' is not section.key=value");
  }
  assign(config, std::string(trim(assignment.substr(0, dot))),
         std::string(trim(assignment.substr(dot + 1, eq - dot - 1))),
         std::string(assignment.substr(eq + 1)));
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCategory::kIo, "DigestError", "sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::kIo, "FileNotFound", "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

RunManifest make_manifest(const std::string& command, const RunConfig& config,
                          const std::vector<std::filesystem::path>& inputs) {
  RunManifest m;
  m.command = command;
  m.config_hash = sha256_hex(config.canonical());
  m.seeds = config.seeds;
  for (const auto& p : inputs) {
    if (!p.empty()) m.inputs[p.string()] = file_sha256(p);
  }
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  m.timestamp = os.str();
  return m;
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["version"] = m.version;
  j["config_hash"] = m.config_hash;
  j["seeds"] = m.seeds;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["timestamp"] = m.timestamp;
  return j.dump(2) + "\n";
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::kIo, "WriteError", "cannot write " + path.string());
  out << manifest_json(manifest);
}

std::string embed_token_from_env() {
  const char* v = std::getenv(kEmbedTokenEnv);
  return v ? std::string(v) : std::string();
}

}  // namespace pfacts
