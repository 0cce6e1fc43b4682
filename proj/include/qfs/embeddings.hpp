#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "qfs/binary_io.hpp"

namespace qfs::embed {

/// Token-major matrix: one row per token.
using Matrix = Eigen::MatrixXd;
using FloatMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Static word vectors (word2vec text format) with a shared out-of-vocabulary row.
class EmbeddingTable {
  public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dim);

    /// Insert or replace (last write wins).
    void set(const std::string& word, std::span<const double> vec);
    /// Replace the zero OOV vector with a fixed uniform(-0.05, 0.05) draw.
    void randomize_oov(std::uint64_t seed);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return index_.size(); }
    bool contains(const std::string& word) const { return index_.contains(word); }
    /// Row for `word`, or the OOV vector.
    Eigen::VectorXd lookup(const std::string& word) const;
    const Eigen::VectorXd& oov_vector() const noexcept { return oov_; }

  private:
    std::size_t dim_ = 0;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<Eigen::VectorXd> rows_;
    Eigen::VectorXd oov_;
};

/// Header line "count dim", then "word v1 ... v_dim" per line.
/// MalformedInput for bad headers or missing lines; DimensionMismatch for a
/// line with the wrong number of values. Duplicate words: last wins, with a warning.
EmbeddingTable load_word_embeddings(const std::string& path);
EmbeddingTable parse_word_embeddings(std::istream& in);

/// min(len, clip_len) rows of table lookups.
Matrix embed_tokens(const EmbeddingTable& table, std::span<const std::string> tokens, std::size_t clip_len);

/// Contextual token embeddings of one (question, candidate sentence) pair,
/// produced offline by a frozen encoder. Rows cover the whole encoder input;
/// the mask marks the rows belonging to the candidate sentence.
struct ContextEmbeddingRecord {
    std::string pair_id;
    FloatMatrix tokens;
    std::vector<bool> sentence_mask;

    std::size_t n_tokens() const noexcept { return static_cast<std::size_t>(tokens.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(tokens.cols()); }
    /// Bitwise equality of ids, masks and matrix payloads.
    bool operator==(const ContextEmbeddingRecord& other) const;
};

/// question id + "#" + ordinal of the sentence in the question's candidate list.
std::string make_pair_id(std::string_view question_id, std::size_t ordinal);

/// Mean of the masked rows. Throws MaskAllFalse.
Eigen::VectorXd mean_pool(const ContextEmbeddingRecord& rec);

/// Throws MalformedInput / MaskAllFalse / DimensionMismatch when `rec` is not
/// a valid record of a file with dimension `dim`.
void validate_record(const ContextEmbeddingRecord& rec, std::size_t dim);

/// Streaming reader for CEMB files:
/// "CEMB", u32 version=1, u32 dim, then records of u32 id_len, id bytes,
/// u32 n_tokens, ceil(n/8) mask bytes (LSB first), n x dim f32.
class CembReader {
  public:
    explicit CembReader(const std::string& path);

    std::uint32_t dim() const noexcept { return dim_; }
    /// Next record in file order, or nullopt at end of file.
    std::optional<ContextEmbeddingRecord> next();

  private:
    std::ifstream in_;
    io::LeReader reader_;
    std::uint32_t dim_ = 0;
};

std::vector<ContextEmbeddingRecord> read_context_embeddings(const std::string& path);

/// All records must share `dim`. Returns the number of records written.
std::size_t write_context_embeddings(const std::string& path, std::span<const ContextEmbeddingRecord> records,
                                     std::uint32_t dim);

}  // namespace qfs::embed

namespace qfs::embed {

/// Mean-pooled sentence vectors keyed by pair id, as consumed by the pooled
/// classifier. Layers are frozen, so pooling once up front is exact.
struct PooledFeatures {
    std::size_t dim = 0;
    std::unordered_map<std::string, Eigen::VectorXd> by_pair;

    const Eigen::VectorXd* find(const std::string& pair_id) const;
};

/// Streams a CEMB file and mean-pools every record. Duplicate pair ids are MalformedInput.
PooledFeatures load_pooled_features(const std::string& path);
PooledFeatures pool_records(std::span<const ContextEmbeddingRecord> records);

}  // namespace qfs::embed
