// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "bindis/common.hpp"
#include "bindis/decoder.hpp"
#include "bindis/regions.hpp"

namespace bindis {

// Displacement values outside [lower, upper] collapse into two overflow
// buckets; values inside are kept exact.
struct DispBounds {
    int32_t lower = -1024;
    int32_t upper = 1024;
};

// Field vocabularies and their packing into one flat id space.
//
// Opcode ids: 0..255 one-byte opcodes, 256..511 two-byte (0F xx),
// 512..591 ModRM-reg extended groups, 768..1535 reserved for VEX,
// 1536/1537 endbr32/endbr64, remainder reserved. ModRM and SIB use the
// raw byte plus one "absent" id. Rgn has six region codes. Disp has one
// "no displacement" code, two overflow buckets and the exact range.
class TokenVocab {
public:
    static constexpr int32_t kOpcodeCount = 1794;
    static constexpr int32_t kModrmCount = 257;
    static constexpr int32_t kSibCount = 257;
    static constexpr int32_t kRgnTokCount = 6;

    static constexpr int32_t kDispBottom = 0; // no displacement bytes
    static constexpr int32_t kDispBelow = 1;

    explicit TokenVocab(DispBounds bounds = {});

    const DispBounds& bounds() const { return bounds_; }
    int32_t disp_count() const { return disp_count_; }
    int32_t disp_above() const { return disp_count_ - 1; }

    int32_t opcode_offset() const { return 0; }
    int32_t modrm_offset() const { return kOpcodeCount; }
    int32_t sib_offset() const { return kOpcodeCount + kModrmCount; }
    int32_t rgn_offset() const { return sib_offset() + kSibCount; }
    int32_t disp_offset() const { return rgn_offset() + kRgnTokCount; }
    int32_t pad_id() const { return disp_offset() + disp_count_; }
    int32_t size() const { return pad_id() + 1; }

    int32_t opcode_tok(uint16_t opcode_id) const;
    int32_t modrm_tok(uint16_t modrm_id) const;
    int32_t sib_tok(uint16_t sib_id) const;
    int32_t rgn_tok(Rgn r) const;
    int32_t disp_tok(int32_t disp_code) const;

    // Bucket a raw displacement value into a disp code.
    int32_t encode_disp_value(int64_t v) const;

    // Fingerprint of the layout; artifacts carry it so mismatched
    // vocabularies are rejected instead of silently misread.
    uint64_t hash() const;

private:
    DispBounds bounds_;
    int32_t disp_count_;
};

// Field tuple fed to the entry/instruction tasks.
struct Decode1 {
    uint16_t opcode_id = 0;
    uint16_t modrm_id = kFieldAbsent;
    uint16_t sib_id = kFieldAbsent;
};

// Field tuple fed to the boundary task; adds the region guess and the
// bucketed displacement.
struct Decode2 {
    uint16_t opcode_id = 0;
    uint16_t modrm_id = kFieldAbsent;
    uint16_t sib_id = kFieldAbsent;
    Rgn rgn = Rgn::Unknown;
    int32_t disp_code = TokenVocab::kDispBottom;
};

Decode1 decode1(const DecodedInstr& ins);

// Region / displacement classification:
//  - branches carry no data access: (unknown, bottom)
//  - esp/ebp base without index: stack with the verbatim frame offset
//  - an absolute address, or a 32-bit displacement that lands in a global
//    section: that section with the offset from its start
//  - anything else: unknown with the raw bucketed displacement, bottom
//    when the encoding has no displacement bytes
// Instructions that neither access memory nor branch have no decode2 tuple.
std::optional<Decode2> decode2(const DecodedInstr& ins,
                               const RegionTable& regions,
                               const TokenVocab& vocab);

} // namespace bindis
