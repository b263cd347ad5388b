#pragma once

// Little-endian field access for the wire formats.

#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

namespace awg::le {

inline void put_u16(std::uint8_t* p, std::uint16_t v)
{
    p[0] = static_cast<std::uint8_t>(v);
    p[1] = static_cast<std::uint8_t>(v >> 8);
}

inline void put_u32(std::uint8_t* p, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

inline void put_u64(std::uint8_t* p, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
        p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

inline std::uint16_t get_u16(const std::uint8_t* p)
{
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const std::uint8_t* p)
{
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
        v = (v << 8) | p[i];
    return v;
}

inline std::uint64_t get_u64(const std::uint8_t* p)
{
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
        v = (v << 8) | p[i];
    return v;
}

/// Append-only little-endian writer.
class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { grow(2, [&](auto* p) { put_u16(p, v); }); }
    void u32(std::uint32_t v) { grow(4, [&](auto* p) { put_u32(p, v); }); }
    void u64(std::uint64_t v) { grow(8, [&](auto* p) { put_u64(p, v); }); }
    void i16(std::int16_t v) { u16(static_cast<std::uint16_t>(v)); }
    void f64(double v)
    {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        u64(bits);
    }
    void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void reserve(std::size_t n) { buf_.reserve(n); }

    std::vector<std::uint8_t>& buffer() { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    template <typename F>
    void grow(std::size_t n, F&& f)
    {
        auto off = buf_.size();
        buf_.resize(off + n);
        f(buf_.data() + off);
    }

    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; every accessor fails soft by setting `ok() == false`.
class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    bool ok() const { return ok_; }
    std::size_t remaining() const { return data_.size() - pos_; }
    bool at_end() const { return pos_ == data_.size(); }

    std::uint8_t u8() { return take(1) ? data_[pos_ - 1] : 0; }
    std::uint16_t u16() { return take(2) ? get_u16(&data_[pos_ - 2]) : 0; }
    std::uint32_t u32() { return take(4) ? get_u32(&data_[pos_ - 4]) : 0; }
    std::uint64_t u64() { return take(8) ? get_u64(&data_[pos_ - 8]) : 0; }
    std::int16_t i16() { return static_cast<std::int16_t>(u16()); }
    double f64()
    {
        auto bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    std::span<const std::uint8_t> bytes(std::size_t n)
    {
        if (!take(n))
            return {};
        return data_.subspan(pos_ - n, n);
    }

private:
    bool take(std::size_t n)
    {
        if (!ok_ || remaining() < n) {
            ok_ = false;
            return false;
        }
        pos_ += n;
        return true;
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
    bool ok_ = true;
};

} // namespace awg::le
