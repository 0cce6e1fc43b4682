#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace qfs::io {

/// Little-endian primitive writer. All binary formats in this project
/// (DVEC, CEMB, QIDX, QFSM) go through this class.
class LeWriter {
  public:
    explicit LeWriter(std::ostream& out) : out_(out) {}

    void bytes(std::string_view data);
    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void f64(double v);
    /// u32 length prefix followed by the raw bytes.
    void str(std::string_view s);

    std::uint64_t offset() const noexcept { return offset_; }

  private:
    std::ostream& out_;
    std::uint64_t offset_ = 0;
};

/// Little-endian reader that tracks its byte offset so truncation errors
/// can say where the file ended.
class LeReader {
  public:
    explicit LeReader(std::istream& in) : in_(in) {}

    std::string bytes(std::size_t n, std::string_view what);
    std::uint8_t u8(std::string_view what);
    std::uint32_t u32(std::string_view what);
    std::uint64_t u64(std::string_view what);
    float f32(std::string_view what);
    double f64(std::string_view what);
    std::string str(std::string_view what, std::uint32_t max_len = 1u << 20);

    /// True when no further byte can be read.
    bool at_eof();
    std::uint64_t offset() const noexcept { return offset_; }

  private:
    void read_raw(char* dst, std::size_t n, std::string_view what);

    std::istream& in_;
    std::uint64_t offset_ = 0;
};

/// Check a 4-byte magic tag and throw MalformedInput naming `format` otherwise.
void expect_magic(LeReader& reader, std::string_view magic, std::string_view format);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

std::uint32_t crc32(std::string_view data);

}  // namespace qfs::io
