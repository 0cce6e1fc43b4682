#include "qfs/binary_io.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <zlib.h>

#include "qfs/error.hpp"

namespace qfs::io {

namespace {

template <typename T>
std::array<char, sizeof(T)> to_le(T v)
{
    std::array<char, sizeof(T)> out{};
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
    }
    return out;
}

template <typename T>
T from_le(const char* p)
{
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<T>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    return v;
}

}  // namespace

void LeWriter::bytes(std::string_view data)
{
    out_.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out_) {
        throw Error(ErrorCode::IoError, "write failed at byte offset " + std::to_string(offset_));
    }
    offset_ += data.size();
}

void LeWriter::u8(std::uint8_t v)
{
    char c = static_cast<char>(v);
    bytes(std::string_view(&c, 1));
}

void LeWriter::u32(std::uint32_t v)
{
    auto b = to_le(v);
    bytes(std::string_view(b.data(), b.size()));
}

void LeWriter::u64(std::uint64_t v)
{
    auto b = to_le(v);
    bytes(std::string_view(b.data(), b.size()));
}

void LeWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void LeWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void LeWriter::str(std::string_view s)
{
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
}

void LeReader::read_raw(char* dst, std::size_t n, std::string_view what)
{
    in_.read(dst, static_cast<std::streamsize>(n));
    auto got = static_cast<std::size_t>(in_.gcount());
    if (got != n) {
        throw Error(ErrorCode::MalformedInput,
                    "truncated input reading " + std::string(what) + " at byte offset "
                        + std::to_string(offset_ + got));
    }
    offset_ += n;
}

std::string LeReader::bytes(std::size_t n, std::string_view what)
{
    std::string out(n, '\0');
    if (n > 0) {
        read_raw(out.data(), n, what);
    }
    return out;
}

std::uint8_t LeReader::u8(std::string_view what)
{
    char c = 0;
    read_raw(&c, 1, what);
    return static_cast<std::uint8_t>(c);
}

std::uint32_t LeReader::u32(std::string_view what)
{
    std::array<char, 4> b{};
    read_raw(b.data(), b.size(), what);
    return from_le<std::uint32_t>(b.data());
}

std::uint64_t LeReader::u64(std::string_view what)
{
    std::array<char, 8> b{};
    read_raw(b.data(), b.size(), what);
    return from_le<std::uint64_t>(b.data());
}

float LeReader::f32(std::string_view what) { return std::bit_cast<float>(u32(what)); }

double LeReader::f64(std::string_view what) { return std::bit_cast<double>(u64(what)); }

std::string LeReader::str(std::string_view what, std::uint32_t max_len)
{
    auto len = u32(what);
    if (len > max_len) {
        throw Error(ErrorCode::MalformedInput,
                    std::string(what) + " length " + std::to_string(len) + " exceeds limit at byte offset "
                        + std::to_string(offset_ - 4));
    }
    return bytes(len, what);
}

bool LeReader::at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

void expect_magic(LeReader& reader, std::string_view magic, std::string_view format)
{
    auto got = reader.bytes(magic.size(), "magic");
    if (got != magic) {
        throw Error(ErrorCode::MalformedInput, "bad magic for " + std::string(format) + " file");
    }
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::MalformedInput, "cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, std::string_view contents)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
        throw Error(ErrorCode::IoError, "write to '" + path + "' failed");
    }
}

std::uint32_t crc32(std::string_view data)
{
    uLong crc = ::crc32(0L, Z_NULL, 0);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size()));
    return static_cast<std::uint32_t>(crc);
}

}  // namespace qfs::io
