#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "rgns/error.hpp"

namespace rgns {

// Little-endian binary encoding helpers used by the trajectory and
// checkpoint formats. Byte order is explicit so files are host-independent.

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void i64(std::int64_t v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const void* p, std::size_t n) {
        buf_.append(static_cast<const char*>(p), n);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }

    const std::string& buffer() const { return buf_; }

    void to_file(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open for writing: " + path.string());
        out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        if (!out) throw io_error("short write: " + path.string());
    }

private:
    std::string buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::string data) : data_(std::move(data)) {}

    static ByteReader from_file(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw io_error("cannot open: " + path.string());
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return ByteReader(std::move(data));
    }

    std::uint8_t u8(const char* what) { return take(1, what)[0]; }
    std::uint32_t u32(const char* what) {
        const auto* p = take(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64(const char* what) {
        const auto* p = take(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }
    std::int64_t i64(const char* what) { return std::bit_cast<std::int64_t>(u64(what)); }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    std::string str(const char* what) {
        const std::uint32_t n = u32(what);
        const auto* p = take(n, what);
        return std::string(reinterpret_cast<const char*>(p), n);
    }
    void raw(void* dst, std::size_t n, const char* what) {
        std::memcpy(dst, take(n, what), n);
    }

    std::size_t offset() const { return off_; }
    std::size_t remaining() const { return data_.size() - off_; }
    bool exhausted() const { return off_ == data_.size(); }

private:
    const std::uint8_t* take(std::size_t n, const char* what) {
        if (off_ + n > data_.size()) {
            throw io_error(std::string("truncated payload reading ") + what + " at byte offset " +
                           std::to_string(off_) + " (need " + std::to_string(n) + ", have " +
                           std::to_string(data_.size() - off_) + ")");
        }
        const auto* p = reinterpret_cast<const std::uint8_t*>(data_.data()) + off_;
        off_ += n;
        return p;
    }

    std::string data_;
    std::size_t off_ = 0;
};

}  // namespace rgns
