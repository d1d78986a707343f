#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pfacts/errors.hpp"

namespace pfacts {

using RowMatrixF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// N x d embeddings with one id per row. Storage is single precision; use
// `to_double()` for training arithmetic.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  // Throws EmbeddingError on non-finite entries, d == 0 or id problems.
  EmbeddingMatrix(RowMatrixF rows, std::vector<std::string> row_ids);

  std::size_t rows() const { return static_cast<std::size_t>(data_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(data_.cols()); }
  const RowMatrixF& data() const { return data_; }
  const std::vector<std::string>& ids() const { return ids_; }

  Eigen::MatrixXd to_double() const { return data_.cast<double>(); }
  // Row index of `id`; throws if absent.
  std::size_t index_of(const std::string& id) const;
  // Rows for `ids`, in the given order, as doubles.
  Eigen::MatrixXd gather(const std::vector<std::string>& ids) const;

 private:
  RowMatrixF data_;
  std::vector<std::string> ids_;
};

// .emb layout, all little-endian:
//   u32 magic 'PFEM' (0x4d454650), u32 version (1), u32 N, u32 d,
//   N*d f32 row-major,
//   N times: u32 byte length + UTF-8 id bytes.
inline constexpr std::uint32_t kEmbeddingMagic = 0x4d454650;
inline constexpr std::uint32_t kEmbeddingVersion = 1;

EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path,
                     const EmbeddingMatrix& m);

// Rows scaled to unit Euclidean norm. ZeroVector on an all-zero row.
EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m);

struct HttpEmbedConfig {
  std::string endpoint;  // e.g. "http://localhost:8080" or ".../embed"
  std::size_t batch_size = 32;
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
  // Sent as "Authorization: Bearer <token>" when non-empty.
  std::string bearer_token;
};

// POST {"texts": [...]} to <endpoint>/embed, expecting
// {"dim": d, "embeddings": [[...], ...]} with status 200.
// Rows come back in `texts` order with ids `ids` (or "0", "1", ... if empty).
EmbeddingMatrix fetch_embeddings(const HttpEmbedConfig& config,
                                 const std::vector<std::string>& texts,
                                 const std::vector<std::string>& ids = {});

}  // namespace pfacts
