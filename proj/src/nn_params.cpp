#include <bit>
#include <cstring>
#include <sstream>

#include "qfs/binary_io.hpp"
#include "qfs/error.hpp"
#include "qfs/neural.hpp"

namespace qfs::nn {

namespace {

constexpr std::uint32_t kParamVersion = 1;

template <typename M>
std::span<double> span_of(M& m)
{
    return {m.data(), static_cast<std::size_t>(m.size())};
}

template <typename M>
std::span<const double> span_of(const M& m)
{
    return {m.data(), static_cast<std::size_t>(m.size())};
}

template <typename M>
bool bitwise_equal(const M& a, const M& b)
{
    return a.rows() == b.rows() && a.cols() == b.cols()
        && (a.size() == 0 || std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
}

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

}  // namespace

LstmParams LstmParams::zeros(std::size_t input_dim, std::size_t hidden_dim)
{
    return {MatrixXd::Zero(idx(4 * hidden_dim), idx(input_dim)), MatrixXd::Zero(idx(4 * hidden_dim), idx(hidden_dim)),
            VectorXd::Zero(idx(4 * hidden_dim))};
}

void LstmParams::append_blocks(Blocks& out)
{
    out.push_back(span_of(w_in));
    out.push_back(span_of(w_rec));
    out.push_back(span_of(bias));
}

void LstmParams::append_blocks(ConstBlocks& out) const
{
    out.push_back(span_of(w_in));
    out.push_back(span_of(w_rec));
    out.push_back(span_of(bias));
}

bool LstmParams::operator==(const LstmParams& other) const
{
    return bitwise_equal(w_in, other.w_in) && bitwise_equal(w_rec, other.w_rec) && bitwise_equal(bias, other.bias);
}

BiLstmParams BiLstmParams::zeros(std::size_t input_dim, std::size_t hidden_dim)
{
    return {LstmParams::zeros(input_dim, hidden_dim), LstmParams::zeros(input_dim, hidden_dim)};
}

DenseHead DenseHead::zeros(std::size_t input_dim, std::size_t hidden_dim)
{
    return {MatrixXd::Zero(idx(hidden_dim), idx(input_dim)), VectorXd::Zero(idx(hidden_dim)),
            VectorXd::Zero(idx(hidden_dim)), 0.0};
}

void DenseHead::append_blocks(Blocks& out)
{
    out.push_back(span_of(hidden_w));
    out.push_back(span_of(hidden_b));
    out.push_back(span_of(out_w));
    out.push_back(std::span<double>(&out_b, 1));
}

void DenseHead::append_blocks(ConstBlocks& out) const
{
    out.push_back(span_of(hidden_w));
    out.push_back(span_of(hidden_b));
    out.push_back(span_of(out_w));
    out.push_back(std::span<const double>(&out_b, 1));
}

bool DenseHead::operator==(const DenseHead& other) const
{
    return bitwise_equal(hidden_w, other.hidden_w) && bitwise_equal(hidden_b, other.hidden_b)
        && bitwise_equal(out_w, other.out_w) && std::bit_cast<std::uint64_t>(out_b) == std::bit_cast<std::uint64_t>(other.out_b);
}

NncParams NncParams::zeros(std::size_t embed_dim, std::size_t lstm_dim, std::size_t hidden_dim)
{
    return {BiLstmParams::zeros(embed_dim, lstm_dim), DenseHead::zeros(4 * lstm_dim + 1, hidden_dim)};
}

NncParams NncParams::init(std::size_t embed_dim, std::size_t lstm_dim, std::size_t hidden_dim, Rng& rng)
{
    auto p = zeros(embed_dim, lstm_dim, hidden_dim);
    for (auto* dir : {&p.encoder.fwd, &p.encoder.bwd}) {
        fill_uniform({span_of(dir->w_in), span_of(dir->w_rec)}, rng, 0.05);
        dir->bias.segment(idx(lstm_dim), idx(lstm_dim)).setOnes();
    }
    fill_uniform({span_of(p.head.hidden_w), span_of(p.head.out_w)}, rng, 0.05);
    return p;
}

Blocks NncParams::blocks()
{
    Blocks out;
    encoder.fwd.append_blocks(out);
    encoder.bwd.append_blocks(out);
    head.append_blocks(out);
    return out;
}

ConstBlocks NncParams::blocks() const
{
    ConstBlocks out;
    encoder.fwd.append_blocks(out);
    encoder.bwd.append_blocks(out);
    head.append_blocks(out);
    return out;
}

PooledParams PooledParams::zeros(std::size_t input_dim, std::size_t hidden_dim)
{
    return {DenseHead::zeros(input_dim + 1, hidden_dim)};
}

PooledParams PooledParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng)
{
    auto p = zeros(input_dim, hidden_dim);
    fill_uniform({span_of(p.head.hidden_w), span_of(p.head.out_w)}, rng, 0.05);
    return p;
}

Blocks PooledParams::blocks()
{
    Blocks out;
    head.append_blocks(out);
    return out;
}

ConstBlocks PooledParams::blocks() const
{
    ConstBlocks out;
    head.append_blocks(out);
    return out;
}

ModelKind kind_of(const ModelParams& params)
{
    return std::holds_alternative<NncParams>(params) ? ModelKind::Nnc : ModelKind::Pooled;
}

std::string_view to_string(ModelKind kind) { return kind == ModelKind::Nnc ? "nnc" : "pooled"; }

ModelKind parse_model_kind(std::string_view name)
{
    if (name == "nnc") {
        return ModelKind::Nnc;
    }
    if (name == "pooled") {
        return ModelKind::Pooled;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown model kind '" + std::string(name) + "'");
}

std::size_t parameter_count(const ModelParams& params)
{
    std::size_t n = 0;
    std::visit(
        [&](const auto& p) {
            for (auto b : p.blocks()) {
                n += b.size();
            }
        },
        params);
    return n;
}

void fill_uniform(Blocks blocks, Rng& rng, double scale)
{
    for (auto b : blocks) {
        for (auto& v : b) {
            v = rng.uniform(-scale, scale);
        }
    }
}

std::string serialize_params(const ModelParams& params, std::uint64_t seed)
{
    std::ostringstream buf;
    io::LeWriter w(buf);
    w.bytes("QFSM");
    w.u32(kParamVersion);
    w.u8(static_cast<std::uint8_t>(kind_of(params)));
    ConstBlocks blocks;
    if (const auto* nnc = std::get_if<NncParams>(&params)) {
        w.u32(static_cast<std::uint32_t>(nnc->embed_dim()));
        w.u32(static_cast<std::uint32_t>(nnc->lstm_dim()));
        w.u32(static_cast<std::uint32_t>(nnc->head.hidden_dim()));
        blocks = nnc->blocks();
    } else {
        const auto& pooled = std::get<PooledParams>(params);
        w.u32(static_cast<std::uint32_t>(pooled.input_dim()));
        w.u32(static_cast<std::uint32_t>(pooled.head.hidden_dim()));
        blocks = pooled.blocks();
    }
    w.u64(seed);
    for (auto b : blocks) {
        for (double v : b) {
            w.f64(v);
        }
    }
    auto body = buf.str();
    std::ostringstream tail;
    io::LeWriter t(tail);
    t.u32(io::crc32(body));
    return body + tail.str();
}

void save_params(const std::string& path, const ModelParams& params, std::uint64_t seed)
{
    io::write_file(path, serialize_params(params, seed));
}

LoadedParams deserialize_params(std::string_view bytes, std::optional<ModelKind> expected)
{
    if (bytes.size() < 4 || bytes.substr(0, 4) != "QFSM") {
        throw Error(ErrorCode::MalformedInput, "bad magic for parameter file");
    }
    if (bytes.size() < 8 + 1 + 4) {
        throw Error(ErrorCode::MalformedInput, "parameter file truncated");
    }
    const auto body = bytes.substr(0, bytes.size() - 4);
    {
        std::istringstream crc_in(std::string(bytes.substr(bytes.size() - 4)));
        io::LeReader cr(crc_in);
        if (cr.u32("crc") != io::crc32(body)) {
            throw Error(ErrorCode::MalformedInput, "parameter file checksum mismatch");
        }
    }
    std::istringstream in{std::string(body)};
    io::LeReader r(in);
    io::expect_magic(r, "QFSM", "parameter");
    if (auto v = r.u32("version"); v != kParamVersion) {
        throw Error(ErrorCode::MalformedInput, "unsupported parameter file version " + std::to_string(v));
    }
    const auto kind_byte = r.u8("model kind");
    if (kind_byte != 1 && kind_byte != 2) {
        throw Error(ErrorCode::MalformedInput, "unknown model kind byte " + std::to_string(kind_byte));
    }
    const auto kind = static_cast<ModelKind>(kind_byte);
    if (expected && *expected != kind) {
        throw Error(ErrorCode::KindMismatch, "parameter file holds a " + std::string(to_string(kind))
                                                 + " model, expected " + std::string(to_string(*expected)));
    }
    constexpr std::uint32_t kMaxDim = 1u << 16;
    auto dim = [&](std::string_view what) {
        auto v = r.u32(what);
        if (v == 0 || v > kMaxDim) {
            throw Error(ErrorCode::MalformedInput, "implausible " + std::string(what) + " " + std::to_string(v));
        }
        return static_cast<std::size_t>(v);
    };
    LoadedParams out{PooledParams{}, 0};
    Blocks blocks;
    if (kind == ModelKind::Nnc) {
        auto e = dim("embedding dim");
        auto h = dim("lstm dim");
        auto hidden = dim("hidden dim");
        out.params = NncParams::zeros(e, h, hidden);
        blocks = std::get<NncParams>(out.params).blocks();
    } else {
        auto d = dim("input dim");
        auto hidden = dim("hidden dim");
        out.params = PooledParams::zeros(d, hidden);
        blocks = std::get<PooledParams>(out.params).blocks();
    }
    out.seed = r.u64("seed");
    for (auto b : blocks) {
        for (auto& v : b) {
            v = r.f64("parameter");
        }
    }
    if (!r.at_eof()) {
        throw Error(ErrorCode::MalformedInput, "trailing bytes after parameters");
    }
    return out;
}

LoadedParams load_params(const std::string& path, std::optional<ModelKind> expected)
{
    return deserialize_params(io::read_file(path), expected);
}

}  // namespace qfs::nn
