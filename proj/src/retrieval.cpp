#include "qfs/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "qfs/binary_io.hpp"
#include "qfs/error.hpp"

namespace qfs::retrieval {

namespace {

bool ranked_before(const ScoredDoc& a, const ScoredDoc& b)
{
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.doc_id < b.doc_id;
}

void keep_top(RankedList& list, std::size_t k)
{
    if (list.size() > k) {
        std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(k), list.end(), ranked_before);
        list.resize(k);
    } else {
        sort_ranked(list);
    }
}

constexpr std::uint32_t kIndexVersion = 1;

}  // namespace

void sort_ranked(RankedList& list) { std::sort(list.begin(), list.end(), ranked_before); }

bool is_ranked(const RankedList& list)
{
    for (std::size_t i = 1; i < list.size(); ++i) {
        if (!ranked_before(list[i - 1], list[i])) {
            return false;
        }
    }
    return true;
}

std::vector<std::string> doc_ids(const RankedList& list)
{
    std::vector<std::string> out;
    out.reserve(list.size());
    for (const auto& d : list) {
        out.push_back(d.doc_id);
    }
    return out;
}

InvertedIndex InvertedIndex::build(const corpus::DocumentCollection& docs, const text::StopwordSet& stopwords,
                                   Bm25Params params)
{
    if (docs.empty()) {
        throw Error(ErrorCode::EmptyCollection, "cannot index an empty document collection");
    }
    InvertedIndex index;
    index.params_ = params;
    for (const auto& doc : docs) {
        const auto doc_no = static_cast<std::uint32_t>(index.doc_ids_.size());
        std::map<std::string, std::uint32_t> tf;
        std::uint32_t length = 0;
        for (const auto& section : doc.sections) {
            for (auto& tok : text::remove_stopwords(text::tokens(section.text), stopwords)) {
                ++tf[std::move(tok)];
                ++length;
            }
        }
        for (auto& [term, count] : tf) {
            index.postings_[term].push_back({doc_no, count});
        }
        index.doc_ids_.push_back(doc.id);
        index.doc_len_.push_back(length);
    }
    index.finish();
    return index;
}

void InvertedIndex::finish()
{
    by_id_.clear();
    double total = 0.0;
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
        by_id_.emplace(doc_ids_[i], i);
        total += doc_len_[i];
    }
    avgdl_ = doc_ids_.empty() ? 0.0 : total / static_cast<double>(doc_ids_.size());
}

double InvertedIndex::idf(const std::string& term) const
{
    auto it = postings_.find(term);
    if (it == postings_.end()) {
        return 0.0;
    }
    const double n = static_cast<double>(doc_ids_.size());
    const double df = static_cast<double>(it->second.size());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<double> InvertedIndex::score_all(std::span<const std::string> query) const
{
    std::vector<double> scores(doc_ids_.size(), 0.0);
    std::set<std::string_view> terms(query.begin(), query.end());
    const double k1 = params_.k1;
    const double b = params_.b;
    for (auto term : terms) {
        auto it = postings_.find(term);
        if (it == postings_.end()) {
            continue;
        }
        const double w = idf(it->first);
        for (const auto& p : it->second) {
            const double tf = p.tf;
            const double norm = avgdl_ > 0.0 ? doc_len_[p.doc] / avgdl_ : 0.0;
            scores[p.doc] += w * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
        }
    }
    return scores;
}

std::optional<std::size_t> InvertedIndex::doc_index(std::string_view id) const
{
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::span<const InvertedIndex::Posting> InvertedIndex::postings(const std::string& term) const
{
    auto it = postings_.find(term);
    if (it == postings_.end()) {
        return {};
    }
    return it->second;
}

bool InvertedIndex::operator==(const InvertedIndex& other) const
{
    return params_ == other.params_ && doc_ids_ == other.doc_ids_ && doc_len_ == other.doc_len_
        && postings_ == other.postings_;
}

// QIDX layout: magic, u32 version, f64 k1, f64 b, u32 n_docs,
// n_docs x (str id, u32 length), u32 n_terms, n_terms x (str term,
// u32 n_postings, n_postings x (u32 doc, u32 tf)). Terms in byte order.
void InvertedIndex::save(const std::string& path) const
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    }
    io::LeWriter w(out);
    w.bytes("QIDX");
    w.u32(kIndexVersion);
    w.f64(params_.k1);
    w.f64(params_.b);
    w.u32(static_cast<std::uint32_t>(doc_ids_.size()));
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
        w.str(doc_ids_[i]);
        w.u32(doc_len_[i]);
    }
    w.u32(static_cast<std::uint32_t>(postings_.size()));
    for (const auto& [term, plist] : postings_) {
        w.str(term);
        w.u32(static_cast<std::uint32_t>(plist.size()));
        for (const auto& p : plist) {
            w.u32(p.doc);
            w.u32(p.tf);
        }
    }
}

InvertedIndex InvertedIndex::load(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::MalformedInput, "cannot open index '" + path + "'");
    }
    io::LeReader r(in);
    io::expect_magic(r, "QIDX", "index");
    if (auto v = r.u32("version"); v != kIndexVersion) {
        throw Error(ErrorCode::MalformedInput, "unsupported index version " + std::to_string(v));
    }
    InvertedIndex index;
    index.params_.k1 = r.f64("k1");
    index.params_.b = r.f64("b");
    const auto n_docs = r.u32("document count");
    for (std::uint32_t i = 0; i < n_docs; ++i) {
        index.doc_ids_.push_back(r.str("document id"));
        index.doc_len_.push_back(r.u32("document length"));
    }
    const auto n_terms = r.u32("term count");
    for (std::uint32_t t = 0; t < n_terms; ++t) {
        auto term = r.str("term");
        auto n = r.u32("posting count");
        std::vector<Posting> plist;
        plist.reserve(n);
        for (std::uint32_t k = 0; k < n; ++k) {
            Posting p;
            p.doc = r.u32("posting doc");
            p.tf = r.u32("posting tf");
            if (p.doc >= n_docs) {
                throw Error(ErrorCode::MalformedInput, "posting references document " + std::to_string(p.doc)
                                                           + " beyond document count");
            }
            plist.push_back(p);
        }
        index.postings_.emplace(std::move(term), std::move(plist));
    }
    index.finish();
    if (index.by_id_.size() != index.doc_ids_.size()) {
        throw Error(ErrorCode::DuplicateId, "index contains duplicate document ids");
    }
    return index;
}

RankedList bm25_search(const InvertedIndex& index, std::span<const std::string> query, std::size_t k)
{
    if (k == 0) {
        throw Error(ErrorCode::InvalidArgument, "bm25_search needs k >= 1");
    }
    std::vector<bool> matched(index.n_docs(), false);
    for (const auto& term : query) {
        for (const auto& p : index.postings(term)) {
            matched[p.doc] = true;
        }
    }
    auto scores = index.score_all(query);
    RankedList out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (matched[i]) {
            out.push_back({index.doc_id(i), scores[i]});
        }
    }
    keep_top(out, k);
    return out;
}

std::vector<double> minmax_normalize(std::span<const double> scores)
{
    if (scores.empty()) {
        throw Error(ErrorCode::EmptyList, "cannot normalise an empty score list");
    }
    auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    const double min = *lo;
    const double range = *hi - *lo;
    std::vector<double> out(scores.size(), 1.0);
    if (range > 0.0) {
        for (std::size_t i = 0; i < scores.size(); ++i) {
            out[i] = (scores[i] - min) / range;
        }
    }
    return out;
}

double interpolate(double bm25_norm, double dense_cos, double lambda)
{
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw Error(ErrorCode::LambdaOutOfRange, "lambda must lie in [0, 1], got " + std::to_string(lambda));
    }
    return lambda * bm25_norm + (1.0 - lambda) * dense_cos;
}

namespace {

RankedList score_pool(const InvertedIndex& index, const DenseStore& dense, const std::vector<std::size_t>& pool,
                      const std::vector<double>& bm25, std::span<const float> query_vector, std::size_t k,
                      double lambda)
{
    if (query_vector.size() != dense.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "query vector has dimension " + std::to_string(query_vector.size())
                                                      + ", dense store has " + std::to_string(dense.dim()));
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw Error(ErrorCode::LambdaOutOfRange, "lambda must lie in [0, 1], got " + std::to_string(lambda));
    }
    if (k == 0) {
        throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    }
    if (pool.empty()) {
        return {};
    }
    std::vector<double> pool_bm25;
    pool_bm25.reserve(pool.size());
    for (auto i : pool) {
        pool_bm25.push_back(bm25[i]);
    }
    auto norm = minmax_normalize(pool_bm25);
    RankedList out;
    out.reserve(pool.size());
    for (std::size_t p = 0; p < pool.size(); ++p) {
        const auto& id = index.doc_id(pool[p]);
        double cos = 0.0;
        if (auto vec = dense.find(id)) {
            cos = std::max(0.0, dense_cosine(*vec, query_vector));
        }
        out.push_back({id, interpolate(norm[p], cos, lambda)});
    }
    keep_top(out, k);
    return out;
}

std::vector<std::size_t> bm25_top_indices(const InvertedIndex& index, std::span<const std::string> query,
                                          std::size_t n)
{
    std::vector<std::size_t> out;
    if (n == 0) {
        return out;
    }
    for (const auto& d : bm25_search(index, query, n)) {
        out.push_back(*index.doc_index(d.doc_id));
    }
    return out;
}

}  // namespace

RankedList nir_search(const InvertedIndex& index, const DenseStore& dense, std::span<const std::string> query_tokens,
                      std::span<const float> query_vector, std::size_t k, double lambda, const NirOptions& options)
{
    std::vector<std::size_t> pool;
    if (options.all_documents) {
        pool.resize(index.n_docs());
        for (std::size_t i = 0; i < pool.size(); ++i) {
            pool[i] = i;
        }
    } else if (options.bm25_pool) {
        pool = bm25_top_indices(index, query_tokens, *options.bm25_pool);
        std::sort(pool.begin(), pool.end());
    }
    return score_pool(index, dense, pool, index.score_all(query_tokens), query_vector, k, lambda);
}

RankedList rerank_top(const InvertedIndex& index, const DenseStore& dense, std::span<const std::string> query_tokens,
                      std::span<const float> query_vector, std::size_t k, double lambda, std::size_t pool_size)
{
    if (pool_size < k) {
        throw Error(ErrorCode::InvalidArgument, "rerank pool size " + std::to_string(pool_size)
                                                    + " is smaller than k = " + std::to_string(k));
    }
    auto pool = bm25_top_indices(index, query_tokens, pool_size);
    return score_pool(index, dense, pool, index.score_all(query_tokens), query_vector, k, lambda);
}

}  // namespace qfs::retrieval
