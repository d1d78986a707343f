#include "pfacts/embed.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>

#include "pfacts/binio.hpp"

namespace pfacts {

namespace {

Error embedding_error(const char* kind, const std::string& message) {
  return Error(ErrorCategory::kEmbedding, kind, message);
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(RowMatrixF rows,
                                 std::vector<std::string> row_ids)
    : data_(std::move(rows)), ids_(std::move(row_ids)) {
  if (data_.cols() == 0) {
    throw embedding_error("DimensionMismatch", "embedding dimension is zero");
  }
  if (ids_.size() != static_cast<std::size_t>(data_.rows())) {
    throw embedding_error("DimensionMismatch",
                          "row id count does not match row count");
  }
  if (!data_.allFinite()) {
    throw embedding_error("NonFiniteValue", "embedding contains NaN or Inf");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : ids_) {
    if (!seen.insert(id).second) {
      throw embedding_error("DuplicateId", "duplicate embedding row id '" + id + "'");
    }
  }
}

std::size_t EmbeddingMatrix::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == id) return i;
  }
  throw embedding_error("MissingId", "no embedding for id '" + id + "'");
}

Eigen::MatrixXd EmbeddingMatrix::gather(const std::vector<std::string>& ids) const {
  std::unordered_map<std::string_view, Eigen::Index> index;
  index.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    index.emplace(ids_[i], static_cast<Eigen::Index>(i));
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), data_.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto it = index.find(ids[r]);
    if (it == index.end()) {
      throw embedding_error("MissingId", "no embedding for id '" + ids[r] + "'");
    }
    out.row(static_cast<Eigen::Index>(r)) = data_.row(it->second).cast<double>();
  }
  return out;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCategory::kIo, "FileNotFound", "cannot open " + path.string());
  }
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  ByteReader reader(bytes);
  auto truncated = [&] {
    return embedding_error("TruncatedFile", path.string() + " is truncated");
  };
  if (bytes.size() < 16) {
    if (bytes.size() >= 4 && reader.peek_u32() != kEmbeddingMagic) {
      throw embedding_error("BadMagic", path.string() + " is not an .emb file");
    }
    throw truncated();
  }
  if (reader.u32() != kEmbeddingMagic) {
    throw embedding_error("BadMagic", path.string() + " is not an .emb file");
  }
  if (const auto version = reader.u32(); version != kEmbeddingVersion) {
    throw embedding_error("BadMagic", "unsupported .emb version " +
                                          std::to_string(version));
  }
  const std::uint64_t n = reader.u32();
  const std::uint64_t d = reader.u32();
  if (d == 0) throw embedding_error("DimensionMismatch", "header declares d = 0");
  if (reader.remaining() < n * d * 4) throw truncated();
  RowMatrixF rows(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::uint64_t i = 0; i < n * d; ++i) rows.data()[i] = reader.f32();
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (reader.remaining() < 4) throw truncated();
    const auto len = reader.u32();
    if (reader.remaining() < len) throw truncated();
    ids.push_back(reader.bytes(len));
  }
  if (reader.remaining() != 0) {
    throw embedding_error("DimensionMismatch",
                          "trailing bytes after declared N x d payload");
  }
  return EmbeddingMatrix(std::move(rows), std::move(ids));
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  ByteWriter w;
  w.u32(kEmbeddingMagic);
  w.u32(kEmbeddingVersion);
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.dim()));
  const auto& data = m.data();
  for (Eigen::Index i = 0; i < data.size(); ++i) w.f32(data.data()[i]);
  for (const auto& id : m.ids()) {
    w.u32(static_cast<std::uint32_t>(id.size()));
    w.bytes(id);
  }
  w.save(path);
}

EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m) {
  RowMatrixF out = m.data();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double norm = out.row(r).cast<double>().norm();
    if (norm == 0.0) {
      throw embedding_error("ZeroVector",
                            "row " + std::to_string(r) + " has zero norm");
    }
    out.row(r) = (out.row(r).cast<double>() / norm).cast<float>();
  }
  return EmbeddingMatrix(std::move(out), m.ids());
}

namespace {

struct Endpoint {
  std::string base;
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, "/embed"};
  std::string path = url.substr(slash);
  if (path == "/") path = "/embed";
  return {url.substr(0, slash), path};
}

Error protocol_error(int status, const std::string& body) {
  return Error(ErrorCategory::kProtocol, "ProtocolError",
               "status " + std::to_string(status) + ": " + body.substr(0, 200));
}

}  // namespace

EmbeddingMatrix fetch_embeddings(const HttpEmbedConfig& config,
                                 const std::vector<std::string>& texts,
                                 const std::vector<std::string>& ids) {
  using nlohmann::json;
  if (config.batch_size == 0) {
    throw Error(ErrorCategory::kConfig, "BadBatchSize", "batch_size must be positive");
  }
  if (!ids.empty() && ids.size() != texts.size()) {
    throw Error(ErrorCategory::kData, "AlignmentError",
                "ids and texts differ in length");
  }
  const auto endpoint = split_endpoint(config.endpoint);
  httplib::Client client(endpoint.base);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!config.bearer_token.empty()) {
    headers.emplace("Authorization", "Bearer " + config.bearer_token);
  }

  std::optional<std::size_t> dim;
  std::vector<float> values;
  for (std::size_t start = 0; start < texts.size(); start += config.batch_size) {
    const auto end = std::min(texts.size(), start + config.batch_size);
    json body;
    body["texts"] = std::vector<std::string>(texts.begin() + start, texts.begin() + end);
    const auto payload = body.dump();

    httplib::Result res;
    for (int attempt = 0;; ++attempt) {
      res = client.Post(endpoint.path, headers, payload, "application/json");
      const bool retryable = !res || res->status >= 500;
      if (!retryable || attempt >= config.retries) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(50 << attempt));
    }
    if (!res) {
      throw Error(ErrorCategory::kTransport, "TransportError",
                  "POST " + config.endpoint + " failed: " +
                      httplib::to_string(res.error()));
    }
    if (res->status != 200) throw protocol_error(res->status, res->body);

    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::parse_error&) {
      throw protocol_error(res->status, "response is not JSON");
    }
    if (!reply.is_object() || !reply.contains("dim") ||
        !reply["dim"].is_number_unsigned() || !reply.contains("embeddings") ||
        !reply["embeddings"].is_array()) {
      throw protocol_error(res->status, "response lacks 'dim' or 'embeddings'");
    }
    const auto batch_dim = reply["dim"].get<std::size_t>();
    if (dim && *dim != batch_dim) {
      throw Error(ErrorCategory::kEmbedding, "DimensionDrift",
                  "server returned d=" + std::to_string(batch_dim) +
                      " after d=" + std::to_string(*dim));
    }
    dim = batch_dim;
    const auto& rows = reply["embeddings"];
    if (rows.size() != end - start) {
      throw protocol_error(res->status, "expected " + std::to_string(end - start) +
                                            " embeddings, got " +
                                            std::to_string(rows.size()));
    }
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != batch_dim) {
        throw Error(ErrorCategory::kEmbedding, "DimensionDrift",
                    "embedding row length differs from declared dim");
      }
      for (const auto& v : row) {
        if (!v.is_number()) throw protocol_error(res->status, "non-numeric value");
        values.push_back(v.get<float>());
      }
    }
  }

  const auto n = static_cast<Eigen::Index>(texts.size());
  RowMatrixF mat(n, static_cast<Eigen::Index>(dim.value_or(0)));
  std::copy(values.begin(), values.end(), mat.data());
  std::vector<std::string> row_ids = ids;
  if (row_ids.empty()) {
    for (std::size_t i = 0; i < texts.size(); ++i) row_ids.push_back(std::to_string(i));
  }
  return EmbeddingMatrix(std::move(mat), std::move(row_ids));
}

}  // namespace pfacts
