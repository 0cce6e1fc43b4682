#include "qfs/embeddings.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "qfs/error.hpp"
#include "qfs/log.hpp"
#include "qfs/rng.hpp"

namespace qfs::embed {

namespace {
constexpr std::uint32_t kCembVersion = 1;
}

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim), oov_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)))
{}

void EmbeddingTable::set(const std::string& word, std::span<const double> vec)
{
    if (vec.size() != dim_) {
        throw Error(ErrorCode::DimensionMismatch, "vector for '" + word + "' has " + std::to_string(vec.size())
                                                      + " values, expected " + std::to_string(dim_));
    }
    Eigen::VectorXd row = Eigen::Map<const Eigen::VectorXd>(vec.data(), static_cast<Eigen::Index>(vec.size()));
    auto [it, inserted] = index_.emplace(word, rows_.size());
    if (inserted) {
        rows_.push_back(std::move(row));
    } else {
        rows_[it->second] = std::move(row);
    }
}

void EmbeddingTable::randomize_oov(std::uint64_t seed)
{
    Rng rng(seed);
    for (Eigen::Index i = 0; i < oov_.size(); ++i) {
        oov_[i] = rng.uniform(-0.05, 0.05);
    }
}

Eigen::VectorXd EmbeddingTable::lookup(const std::string& word) const
{
    auto it = index_.find(word);
    return it == index_.end() ? oov_ : rows_[it->second];
}

EmbeddingTable parse_word_embeddings(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorCode::MalformedInput, "word vector file is empty");
    }
    std::istringstream header(line);
    long long count = -1;
    long long dim = -1;
    if (!(header >> count >> dim) || count < 0 || dim <= 0) {
        throw Error(ErrorCode::MalformedInput, "word vector header must be 'count dim'");
    }
    EmbeddingTable table(static_cast<std::size_t>(dim));
    std::vector<double> values;
    for (long long i = 0; i < count; ++i) {
        if (!std::getline(in, line)) {
            throw Error(ErrorCode::MalformedInput, "word vector file ends after " + std::to_string(i) + " of "
                                                       + std::to_string(count) + " entries");
        }
        std::istringstream fields(line);
        std::string word;
        if (!(fields >> word)) {
            throw Error(ErrorCode::MalformedInput, "blank line at entry " + std::to_string(i + 1));
        }
        values.clear();
        std::string tok;
        while (fields >> tok) {
            char* end = nullptr;
            double v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0') {
                throw Error(ErrorCode::MalformedInput, "bad number '" + tok + "' for word '" + word + "'");
            }
            values.push_back(v);
        }
        if (values.size() != static_cast<std::size_t>(dim)) {
            throw Error(ErrorCode::DimensionMismatch, "word '" + word + "' has " + std::to_string(values.size())
                                                          + " values, header says " + std::to_string(dim));
        }
        if (table.contains(word)) {
            spdlog::warn("duplicate word '{}' in word vectors; keeping the last occurrence", word);
        }
        table.set(word, values);
    }
    return table;
}

EmbeddingTable load_word_embeddings(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::MalformedInput, "cannot open word vector file '" + path + "'");
    }
    return parse_word_embeddings(in);
}

Matrix embed_tokens(const EmbeddingTable& table, std::span<const std::string> tokens, std::size_t clip_len)
{
    if (clip_len == 0) {
        throw Error(ErrorCode::InvalidArgument, "clip length must be >= 1");
    }
    const std::size_t n = std::min(tokens.size(), clip_len);
    Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(table.dim()));
    for (std::size_t i = 0; i < n; ++i) {
        out.row(static_cast<Eigen::Index>(i)) = table.lookup(tokens[i]).transpose();
    }
    return out;
}

bool ContextEmbeddingRecord::operator==(const ContextEmbeddingRecord& other) const
{
    if (pair_id != other.pair_id || sentence_mask != other.sentence_mask || tokens.rows() != other.tokens.rows()
        || tokens.cols() != other.tokens.cols()) {
        return false;
    }
    for (Eigen::Index i = 0; i < tokens.size(); ++i) {
        if (std::bit_cast<std::uint32_t>(tokens.data()[i]) != std::bit_cast<std::uint32_t>(other.tokens.data()[i])) {
            return false;
        }
    }
    return true;
}

std::string make_pair_id(std::string_view question_id, std::size_t ordinal)
{
    return std::string(question_id) + "#" + std::to_string(ordinal);
}

Eigen::VectorXd mean_pool(const ContextEmbeddingRecord& rec)
{
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rec.dim()));
    std::size_t count = 0;
    for (std::size_t i = 0; i < rec.sentence_mask.size() && i < rec.n_tokens(); ++i) {
        if (rec.sentence_mask[i]) {
            sum += rec.tokens.row(static_cast<Eigen::Index>(i)).transpose().cast<double>();
            ++count;
        }
    }
    if (count == 0) {
        throw Error(ErrorCode::MaskAllFalse, "record '" + rec.pair_id + "' has no sentence tokens");
    }
    return sum / static_cast<double>(count);
}

void validate_record(const ContextEmbeddingRecord& rec, std::size_t dim)
{
    if (rec.n_tokens() == 0) {
        throw Error(ErrorCode::MalformedInput, "record '" + rec.pair_id + "' has no tokens");
    }
    if (rec.dim() != dim) {
        throw Error(ErrorCode::DimensionMismatch, "record '" + rec.pair_id + "' has dimension "
                                                      + std::to_string(rec.dim()) + ", file uses " + std::to_string(dim));
    }
    if (rec.sentence_mask.size() != rec.n_tokens()) {
        throw Error(ErrorCode::MalformedInput, "record '" + rec.pair_id + "' mask length differs from token count");
    }
    if (std::find(rec.sentence_mask.begin(), rec.sentence_mask.end(), true) == rec.sentence_mask.end()) {
        throw Error(ErrorCode::MaskAllFalse, "record '" + rec.pair_id + "' has an all-false sentence mask");
    }
}

CembReader::CembReader(const std::string& path) : in_(path, std::ios::binary), reader_(in_)
{
    if (!in_) {
        throw Error(ErrorCode::MalformedInput, "cannot open CEMB file '" + path + "'");
    }
    io::expect_magic(reader_, "CEMB", "CEMB");
    if (auto v = reader_.u32("version"); v != kCembVersion) {
        throw Error(ErrorCode::MalformedInput, "unsupported CEMB version " + std::to_string(v));
    }
    dim_ = reader_.u32("dimension");
    if (dim_ == 0) {
        throw Error(ErrorCode::MalformedInput, "CEMB dimension must be positive");
    }
}

std::optional<ContextEmbeddingRecord> CembReader::next()
{
    if (reader_.at_eof()) {
        return std::nullopt;
    }
    const auto record_offset = reader_.offset();
    ContextEmbeddingRecord rec;
    rec.pair_id = reader_.str("pair id");
    const auto n = reader_.u32("token count");
    if (n == 0) {
        throw Error(ErrorCode::MalformedInput,
                    "record '" + rec.pair_id + "' at byte offset " + std::to_string(record_offset) + " has no tokens");
    }
    auto mask_bytes = reader_.bytes((n + 7) / 8, "sentence mask");
    rec.sentence_mask.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        rec.sentence_mask[i] = ((static_cast<unsigned char>(mask_bytes[i / 8]) >> (i % 8)) & 1u) != 0;
    }
    if (n % 8 != 0 && (static_cast<unsigned char>(mask_bytes.back()) >> (n % 8)) != 0) {
        throw Error(ErrorCode::MalformedInput, "record '" + rec.pair_id + "' has non-zero mask padding bits");
    }
    rec.tokens.resize(n, dim_);
    for (Eigen::Index i = 0; i < rec.tokens.size(); ++i) {
        rec.tokens.data()[i] = reader_.f32("token embedding");
    }
    validate_record(rec, dim_);
    return rec;
}

std::vector<ContextEmbeddingRecord> read_context_embeddings(const std::string& path)
{
    CembReader reader(path);
    std::vector<ContextEmbeddingRecord> out;
    while (auto rec = reader.next()) {
        out.push_back(std::move(*rec));
    }
    return out;
}

std::size_t write_context_embeddings(const std::string& path, std::span<const ContextEmbeddingRecord> records,
                                     std::uint32_t dim)
{
    if (dim == 0) {
        throw Error(ErrorCode::InvalidArgument, "CEMB dimension must be positive");
    }
    for (const auto& rec : records) {
        validate_record(rec, dim);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    }
    io::LeWriter w(out);
    w.bytes("CEMB");
    w.u32(kCembVersion);
    w.u32(dim);
    for (const auto& rec : records) {
        w.str(rec.pair_id);
        const auto n = static_cast<std::uint32_t>(rec.n_tokens());
        w.u32(n);
        std::string mask((n + 7) / 8, '\0');
        for (std::uint32_t i = 0; i < n; ++i) {
            if (rec.sentence_mask[i]) {
                mask[i / 8] = static_cast<char>(static_cast<unsigned char>(mask[i / 8]) | (1u << (i % 8)));
            }
        }
        w.bytes(mask);
        for (Eigen::Index i = 0; i < rec.tokens.size(); ++i) {
            w.f32(rec.tokens.data()[i]);
        }
    }
    out.flush();
    if (!out) {
        throw Error(ErrorCode::IoError, "write to '" + path + "' failed");
    }
    return records.size();
}

}  // namespace qfs::embed

namespace qfs::embed {

const Eigen::VectorXd* PooledFeatures::find(const std::string& pair_id) const
{
    auto it = by_pair.find(pair_id);
    return it == by_pair.end() ? nullptr : &it->second;
}

namespace {

void add_pooled(PooledFeatures& out, const ContextEmbeddingRecord& rec)
{
    if (!out.by_pair.emplace(rec.pair_id, mean_pool(rec)).second) {
        throw Error(ErrorCode::MalformedInput, "duplicate pair id '" + rec.pair_id + "' in embeddings");
    }
}

}  // namespace

PooledFeatures load_pooled_features(const std::string& path)
{
    CembReader reader(path);
    PooledFeatures out;
    out.dim = reader.dim();
    while (auto rec = reader.next()) {
        add_pooled(out, *rec);
    }
    return out;
}

PooledFeatures pool_records(std::span<const ContextEmbeddingRecord> records)
{
    PooledFeatures out;
    for (const auto& rec : records) {
        if (out.dim == 0) {
            out.dim = rec.dim();
        } else if (rec.dim() != out.dim) {
            throw Error(ErrorCode::DimensionMismatch, "records disagree on embedding dimension");
        }
        add_pooled(out, rec);
    }
    return out;
}

}  // namespace qfs::embed
