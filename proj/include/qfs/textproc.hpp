#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

/// Tokenization, sentence splitting and tf-idf vectors.
///
/// All character offsets in this project are Unicode code point indices
/// into the UTF-8 source text, the same convention BioASQ snippet offsets use.
namespace qfs::text {

std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);
std::size_t char_length(std::string_view utf8);
/// Code-point substring [begin, end) of a UTF-8 string.
std::string substr_chars(std::string_view utf8, std::size_t begin, std::size_t end);

struct TokenSpan {
    std::string surface;  // lowercased
    std::size_t begin = 0;
    std::size_t end = 0;

    bool operator==(const TokenSpan&) const = default;
};

/// Maximal runs of Unicode letters/digits, lowercased.
std::vector<TokenSpan> tokenize(std::string_view text);
/// Surfaces of tokenize(text).
std::vector<std::string> tokens(std::string_view text);

struct SentenceSpan {
    std::size_t index = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string text;

    bool operator==(const SentenceSpan&) const = default;
};

/// Rule-based splitter. A sentence ends after a run of . ! ? (plus any
/// closing quotes/brackets) when the next non-space character is an
/// uppercase letter, a digit, or an opening quote/bracket. A single period
/// after a known abbreviation never ends a sentence.
std::vector<SentenceSpan> split_sentences(std::string_view text);

/// Lowercase abbreviations (without the final period) recognised by split_sentences.
const std::unordered_set<std::string>& abbreviations();

using StopwordSet = std::unordered_set<std::string>;
/// One lowercase token per line; blank lines and surrounding whitespace ignored.
StopwordSet load_stopwords(const std::string& path);
std::vector<std::string> remove_stopwords(std::vector<std::string> toks, const StopwordSet& stop);

class SparseVector {
  public:
    using Entry = std::pair<std::uint32_t, double>;

    SparseVector() = default;
    /// Entries must have strictly increasing indices and non-zero weights.
    explicit SparseVector(std::vector<Entry> entries);

    std::span<const Entry> entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t size() const noexcept { return entries_.size(); }

  private:
    std::vector<Entry> entries_;
};

/// Smoothed idf: ln((1 + n_docs) / (1 + df)) + 1; raw tf; L2-normalised vectors.
class TfidfModel {
  public:
    static TfidfModel fit(std::span<const std::vector<std::string>> docs);

    /// L2-normalised tf-idf vector; out-of-vocabulary tokens are ignored.
    SparseVector vector(std::span<const std::string> toks) const;

    /// idf of a vocabulary term; throws InvalidArgument for unknown terms.
    double idf(const std::string& term) const;
    bool contains(const std::string& term) const { return vocabulary_.contains(term); }
    std::size_t vocabulary_size() const noexcept { return idf_.size(); }
    std::size_t n_docs() const noexcept { return n_docs_; }
    std::uint32_t column(const std::string& term) const;

  private:
    std::unordered_map<std::string, std::uint32_t> vocabulary_;
    std::vector<double> idf_;
    std::size_t n_docs_ = 0;
};

/// Dot product of two L2-normalised non-negative vectors, in [0, 1].
double cosine(const SparseVector& a, const SparseVector& b);

}  // namespace qfs::text
