#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "qfs/binary_io.hpp"
#include "qfs/error.hpp"
#include "qfs/retrieval.hpp"

namespace qfs::retrieval {

namespace {
constexpr std::uint32_t kDvecVersion = 1;
}

void DenseStore::add(const std::string& id, std::span<const float> vec)
{
    if (vec.size() != dim_) {
        throw Error(ErrorCode::DimensionMismatch,
                    "vector '" + id + "' has " + std::to_string(vec.size()) + " values, expected " + std::to_string(dim_));
    }
    double norm2 = 0.0;
    for (float v : vec) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::MalformedInput, "vector '" + id + "' has a non-finite value");
        }
        norm2 += static_cast<double>(v) * v;
    }
    if (norm2 == 0.0) {
        throw Error(ErrorCode::MalformedInput, "vector '" + id + "' is all zeros and cannot be normalised");
    }
    if (by_id_.contains(id)) {
        throw Error(ErrorCode::DuplicateId, "duplicate vector id '" + id + "'");
    }
    const double norm = std::sqrt(norm2);
    const bool unit = std::abs(norm - 1.0) <= 1e-6;
    by_id_.emplace(id, ids_.size());
    ids_.push_back(id);
    for (float v : vec) {
        data_.push_back(unit ? v : static_cast<float>(v / norm));
    }
}

std::span<const float> DenseStore::vector(std::size_t i) const
{
    return std::span<const float>(data_).subspan(i * dim_, dim_);
}

std::optional<std::span<const float>> DenseStore::find(std::string_view id) const
{
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return vector(it->second);
}

bool DenseStore::operator==(const DenseStore& other) const
{
    if (dim_ != other.dim_ || ids_ != other.ids_ || data_.size() != other.data_.size()) {
        return false;
    }
    // Bit-level comparison so that -0.0 / NaN payload differences count.
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (std::bit_cast<std::uint32_t>(data_[i]) != std::bit_cast<std::uint32_t>(other.data_[i])) {
            return false;
        }
    }
    return true;
}

double dense_cosine(std::span<const float> stored, std::span<const float> query)
{
    if (stored.size() != query.size()) {
        throw Error(ErrorCode::DimensionMismatch, "dense vectors differ in dimension");
    }
    double dot = 0.0;
    double qn = 0.0;
    for (std::size_t i = 0; i < query.size(); ++i) {
        dot += static_cast<double>(stored[i]) * query[i];
        qn += static_cast<double>(query[i]) * query[i];
    }
    if (qn == 0.0) {
        return 0.0;
    }
    return dot / std::sqrt(qn);
}

DenseStore parse_dense_store(std::istream& in)
{
    io::LeReader r(in);
    io::expect_magic(r, "DVEC", "DVEC");
    if (auto v = r.u32("version"); v != kDvecVersion) {
        throw Error(ErrorCode::MalformedInput, "unsupported DVEC version " + std::to_string(v));
    }
    const auto dim = r.u32("dimension");
    if (dim == 0) {
        throw Error(ErrorCode::MalformedInput, "DVEC dimension must be positive");
    }
    DenseStore store(dim);
    std::vector<float> buf(dim);
    while (!r.at_eof()) {
        auto id = r.str("vector id");
        for (auto& v : buf) {
            v = r.f32("vector value");
        }
        try {
            store.add(id, buf);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::DuplicateId) {
                throw Error(ErrorCode::MalformedInput, e.what());
            }
            throw;
        }
    }
    return store;
}

DenseStore load_dense_store(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::MalformedInput, "cannot open DVEC file '" + path + "'");
    }
    return parse_dense_store(in);
}

void write_dense_store(std::ostream& out, const DenseStore& store)
{
    io::LeWriter w(out);
    w.bytes("DVEC");
    w.u32(kDvecVersion);
    w.u32(store.dim());
    for (std::size_t i = 0; i < store.size(); ++i) {
        w.str(store.id(i));
        for (float v : store.vector(i)) {
            w.f32(v);
        }
    }
}

void save_dense_store(const std::string& path, const DenseStore& store)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    }
    write_dense_store(out, store);
}

}  // namespace qfs::retrieval
