// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bindis {

using ByteSpan = std::span<const uint8_t>;
using ByteVec = std::vector<uint8_t>;

// Base class for all hard errors raised by the pipeline. Decode failures are
// values, not exceptions; these are for malformed inputs and contract breaks.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct NotElfError : Error { using Error::Error; };
struct WrongClassError : Error { using Error::Error; };
struct TruncatedFileError : Error { using Error::Error; };
struct NoSymbolsError : Error { using Error::Error; };
struct MalformedDwarfError : Error { using Error::Error; };
struct MissingGroundTruthError : Error { using Error::Error; };
struct DecodeGapError : Error { using Error::Error; };
struct OverlappingFunctionsError : Error { using Error::Error; };
struct NonTerminationError : Error { using Error::Error; };
struct IdOutOfRangeError : Error { using Error::Error; };
struct VocabMismatchError : Error { using Error::Error; };
struct SchemaMismatchError : Error { using Error::Error; };
struct MissingInputError : Error { using Error::Error; };
struct DivergedLossError : Error { using Error::Error; };
struct EmptyCallsiteListError : Error { using Error::Error; };

inline uint16_t read_u16le(ByteSpan data, size_t off) {
    if (off + 2 > data.size())
        throw TruncatedFileError("read past end of buffer");
    return static_cast<uint16_t>(data[off] | (data[off + 1] << 8));
}

inline uint32_t read_u32le(ByteSpan data, size_t off) {
    if (off + 4 > data.size())
        throw TruncatedFileError("read past end of buffer");
    return static_cast<uint32_t>(data[off]) | (static_cast<uint32_t>(data[off + 1]) << 8) |
           (static_cast<uint32_t>(data[off + 2]) << 16) | (static_cast<uint32_t>(data[off + 3]) << 24);
}

inline void write_u16le(ByteVec& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

inline void write_u32le(ByteVec& out, uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

// Unsigned LEB128, as used by DWARF.
inline void write_uleb128(ByteVec& out, uint64_t v) {
    do {
        uint8_t byte = v & 0x7f;
        v >>= 7;
        if (v != 0)
            byte |= 0x80;
        out.push_back(byte);
    } while (v != 0);
}

inline void write_sleb128(ByteVec& out, int64_t v) {
    bool more = true;
    while (more) {
        uint8_t byte = v & 0x7f;
        v >>= 7;
        if ((v == 0 && !(byte & 0x40)) || (v == -1 && (byte & 0x40)))
            more = false;
        else
            byte |= 0x80;
        out.push_back(byte);
    }
}

inline uint64_t read_uleb128(ByteSpan data, size_t& off) {
    uint64_t result = 0;
    int shift = 0;
    while (true) {
        if (off >= data.size())
            throw TruncatedFileError("ULEB128 runs past end of buffer");
        uint8_t byte = data[off++];
        result |= static_cast<uint64_t>(byte & 0x7f) << shift;
        if (!(byte & 0x80))
            return result;
        shift += 7;
        if (shift > 63)
            throw MalformedDwarfError("ULEB128 too long");
    }
}

inline int64_t read_sleb128(ByteSpan data, size_t& off) {
    int64_t result = 0;
    int shift = 0;
    uint8_t byte = 0;
    do {
        if (off >= data.size())
            throw TruncatedFileError("SLEB128 runs past end of buffer");
        byte = data[off++];
        result |= static_cast<int64_t>(byte & 0x7f) << shift;
        shift += 7;
    } while (byte & 0x80);
    if (shift < 64 && (byte & 0x40))
        result |= -(static_cast<int64_t>(1) << shift);
    return result;
}

// Deterministic uniform integer in [0, n). std::uniform_int_distribution is
// implementation-defined, so the mapping is pinned here.
inline uint64_t uniform_below(std::mt19937_64& rng, uint64_t n) {
    if (n == 0)
        return 0;
    const uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % n;
    uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

inline std::string hex_addr(uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "0x%llx", static_cast<unsigned long long>(v));
    return buf;
}

// FNV-1a, used to fingerprint the token vocabulary layout in artifacts.
inline uint64_t fnv1a64(ByteSpan data, uint64_t seed = 0xcbf29ce484222325ull) {
    uint64_t h = seed;
    for (uint8_t b : data) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(ByteSpan(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

} // namespace bindis
