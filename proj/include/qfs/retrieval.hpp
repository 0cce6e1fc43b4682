#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qfs/corpus.hpp"
#include "qfs/textproc.hpp"

namespace qfs::retrieval {

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;

    bool operator==(const ScoredDoc&) const = default;
};

/// Descending by score, ties by ascending doc id.
using RankedList = std::vector<ScoredDoc>;

void sort_ranked(RankedList& list);
bool is_ranked(const RankedList& list);
std::vector<std::string> doc_ids(const RankedList& list);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    bool operator==(const Bm25Params&) const = default;
};

class InvertedIndex {
  public:
    struct Posting {
        std::uint32_t doc = 0;  // index into doc_id()/doc_length()
        std::uint32_t tf = 0;

        bool operator==(const Posting&) const = default;
    };

    /// Indexes the concatenated tokens of every section. Throws EmptyCollection.
    static InvertedIndex build(const corpus::DocumentCollection& docs, const text::StopwordSet& stopwords = {},
                               Bm25Params params = {});

    /// BM25 score of every indexed document (0 where no query term matches).
    /// Repeated query terms count once.
    std::vector<double> score_all(std::span<const std::string> query) const;

    /// ln(1 + (N - df + 0.5) / (df + 0.5)); 0 for terms absent from the corpus.
    double idf(const std::string& term) const;

    std::size_t n_docs() const noexcept { return doc_ids_.size(); }
    std::size_t vocabulary_size() const noexcept { return postings_.size(); }
    const std::string& doc_id(std::size_t i) const { return doc_ids_[i]; }
    std::uint32_t doc_length(std::size_t i) const { return doc_len_[i]; }
    std::optional<std::size_t> doc_index(std::string_view id) const;
    double avgdl() const noexcept { return avgdl_; }
    const Bm25Params& params() const noexcept { return params_; }
    std::span<const Posting> postings(const std::string& term) const;

    /// Binary snapshot ("QIDX", little-endian; see README).
    void save(const std::string& path) const;
    static InvertedIndex load(const std::string& path);

    bool operator==(const InvertedIndex& other) const;

  private:
    void finish();

    Bm25Params params_;
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_len_;
    std::map<std::string, std::vector<Posting>, std::less<>> postings_;
    std::unordered_map<std::string, std::size_t> by_id_;
    double avgdl_ = 0.0;
};

/// Top-k documents matching at least one query term.
RankedList bm25_search(const InvertedIndex& index, std::span<const std::string> query, std::size_t k);

/// (x - min) / (max - min); every value is 1.0 when all are equal. Throws EmptyList.
std::vector<double> minmax_normalize(std::span<const double> scores);

/// lambda * bm25_norm + (1 - lambda) * dense_cos. Throws LambdaOutOfRange.
double interpolate(double bm25_norm, double dense_cos, double lambda);

/// Unit-norm dense vectors keyed by document id.
class DenseStore {
  public:
    explicit DenseStore(std::uint32_t dim = 0) : dim_(dim) {}

    /// Normalises the vector unless it is already unit norm within 1e-6.
    /// Throws DimensionMismatch, MalformedInput (zero/non-finite vector) or DuplicateId.
    void add(const std::string& id, std::span<const float> vec);

    std::uint32_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    const std::string& id(std::size_t i) const { return ids_[i]; }
    std::span<const float> vector(std::size_t i) const;
    std::optional<std::span<const float>> find(std::string_view id) const;

    bool operator==(const DenseStore& other) const;

  private:
    std::uint32_t dim_;
    std::vector<std::string> ids_;
    std::vector<float> data_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// DVEC: "DVEC", u32 version=1, u32 dim, then records of
/// u32 id length, id bytes, dim x f32, all little-endian.
DenseStore load_dense_store(const std::string& path);
DenseStore parse_dense_store(std::istream& in);
void save_dense_store(const std::string& path, const DenseStore& store);
void write_dense_store(std::ostream& out, const DenseStore& store);

/// Cosine of a stored unit vector with an arbitrary query vector.
double dense_cosine(std::span<const float> stored, std::span<const float> query);

struct NirOptions {
    /// Add the BM25 top-N documents to the pool (unset: none beyond all_documents).
    std::optional<std::size_t> bm25_pool;
    /// Every indexed document joins the pool.
    bool all_documents = true;
};

/// Hybrid search: BM25 scores min-max normalised over the pool, interpolated
/// with the dense cosine (clamped at 0). Documents without a dense vector
/// get cosine 0. Throws DimensionMismatch, LambdaOutOfRange.
RankedList nir_search(const InvertedIndex& index, const DenseStore& dense, std::span<const std::string> query_tokens,
                      std::span<const float> query_vector, std::size_t k, double lambda, const NirOptions& options = {});

/// Re-rank only the BM25 top-`pool_size` documents with the interpolated score.
RankedList rerank_top(const InvertedIndex& index, const DenseStore& dense, std::span<const std::string> query_tokens,
                      std::span<const float> query_vector, std::size_t k, double lambda, std::size_t pool_size = 200);

}  // namespace qfs::retrieval
