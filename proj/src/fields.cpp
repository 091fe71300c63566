// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
#include "bindis/fields.hpp"

#include <sstream>

namespace bindis {

TokenVocab::TokenVocab(DispBounds bounds) : bounds_(bounds) {
    if (bounds_.lower > bounds_.upper)
        throw Error("displacement bounds are inverted");
    disp_count_ =
        static_cast<int32_t>(static_cast<int64_t>(bounds_.upper) -
                             bounds_.lower + 1) +
        3;
}

int32_t TokenVocab::opcode_tok(uint16_t opcode_id) const {
    if (opcode_id >= kOpcodeCount)
        throw IdOutOfRangeError("opcode id " + std::to_string(opcode_id));
    return opcode_offset() + opcode_id;
}

int32_t TokenVocab::modrm_tok(uint16_t modrm_id) const {
    if (modrm_id >= kModrmCount)
        throw IdOutOfRangeError("modrm id " + std::to_string(modrm_id));
    return modrm_offset() + modrm_id;
}

int32_t TokenVocab::sib_tok(uint16_t sib_id) const {
    if (sib_id >= kSibCount)
        throw IdOutOfRangeError("sib id " + std::to_string(sib_id));
    return sib_offset() + sib_id;
}

int32_t TokenVocab::rgn_tok(Rgn r) const {
    return rgn_offset() + static_cast<int32_t>(r);
}

int32_t TokenVocab::disp_tok(int32_t disp_code) const {
    if (disp_code < 0 || disp_code >= disp_count_)
        throw IdOutOfRangeError("disp code " + std::to_string(disp_code));
    return disp_offset() + disp_code;
}

int32_t TokenVocab::encode_disp_value(int64_t v) const {
    if (v < bounds_.lower)
        return kDispBelow;
    if (v > bounds_.upper)
        return disp_above();
    return 2 + static_cast<int32_t>(v - bounds_.lower);
}

uint64_t TokenVocab::hash() const {
    std::ostringstream os;
    os << "opcode:" << kOpcodeCount << ";modrm:" << kModrmCount
       << ";sib:" << kSibCount << ";rgn:" << kRgnTokCount
       << ";disp:" << disp_count_ << ";lower:" << bounds_.lower
       << ";upper:" << bounds_.upper << ";pad:" << pad_id();
    return fnv1a64(os.str());
}

Decode1 decode1(const DecodedInstr& ins) {
    return Decode1{ins.opcode_id, ins.modrm_id, ins.sib_id};
}

namespace {

bool is_frame_reg(Reg r) { return r == Reg::Esp || r == Reg::Ebp; }

} // namespace

std::optional<Decode2> decode2(const DecodedInstr& ins,
                               const RegionTable& regions,
                               const TokenVocab& vocab) {
    Decode2 out;
    out.opcode_id = ins.opcode_id;
    out.modrm_id = ins.modrm_id;
    out.sib_id = ins.sib_id;

    if (ins.is_branch) {
        out.rgn = Rgn::Unknown;
        out.disp_code = TokenVocab::kDispBottom;
        return out;
    }

    const MemOperand* m = ins.mem_operand();
    if (!m)
        return std::nullopt;

    if (!m->has_disp) {
        out.rgn = (m->base && is_frame_reg(*m->base) && !m->index)
                      ? Rgn::Stack
                      : Rgn::Unknown;
        out.disp_code = TokenVocab::kDispBottom;
        return out;
    }

    if (!m->addr16) {
        if (m->absolute) {
            uint32_t addr = static_cast<uint32_t>(m->disp);
            if (auto r = regions.classify(addr)) {
                out.rgn = *r;
                out.disp_code = vocab.encode_disp_value(
                    static_cast<int64_t>(addr) - *regions.start_of(*r));
                return out;
            }
            out.rgn = Rgn::Unknown;
            out.disp_code = vocab.encode_disp_value(m->disp);
            return out;
        }

        if (m->base && is_frame_reg(*m->base)) {
            if (!m->index) {
                out.rgn = Rgn::Stack;
                out.disp_code = vocab.encode_disp_value(m->disp);
                return out;
            }
            out.rgn = Rgn::Unknown;
            out.disp_code = vocab.encode_disp_value(m->disp);
            return out;
        }

        if (m->disp_size == 4) {
            uint32_t addr = static_cast<uint32_t>(m->disp);
            if (auto r = regions.classify(addr)) {
                out.rgn = *r;
                out.disp_code = vocab.encode_disp_value(
                    static_cast<int64_t>(addr) - *regions.start_of(*r));
                return out;
            }
        }
    }

    out.rgn = Rgn::Unknown;
    out.disp_code = vocab.encode_disp_value(m->disp);
    return out;
}

} // namespace bindis
