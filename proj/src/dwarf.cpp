// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Minimal DWARF reader: enough of .debug_info/.debug_abbrev to recover
// variable names, byte sizes and locations of the forms the ground-truth
// pipeline can normalize (DW_OP_addr, DW_OP_fbreg, DW_OP_breg4/breg5).

#include <map>
#include <optional>
#include <variant>

#include "bindis/common.hpp"
#include "bindis/elf.hpp"

namespace bindis {

namespace {

constexpr uint64_t kTagCompileUnit = 0x11;
constexpr uint64_t kTagSubprogram = 0x2e;
constexpr uint64_t kTagVariable = 0x34;

constexpr uint64_t kAttrLocation = 0x02;
constexpr uint64_t kAttrName = 0x03;
constexpr uint64_t kAttrByteSize = 0x0b;
constexpr uint64_t kAttrType = 0x49;
constexpr uint64_t kAttrFrameBase = 0x40;

constexpr uint64_t kFormAddr = 0x01;
constexpr uint64_t kFormData2 = 0x05;
constexpr uint64_t kFormData4 = 0x06;
constexpr uint64_t kFormData8 = 0x07;
constexpr uint64_t kFormString = 0x08;
constexpr uint64_t kFormBlock1 = 0x0a;
constexpr uint64_t kFormData1 = 0x0b;
constexpr uint64_t kFormFlag = 0x0c;
constexpr uint64_t kFormSdata = 0x0d;
constexpr uint64_t kFormStrp = 0x0e;
constexpr uint64_t kFormUdata = 0x0f;
constexpr uint64_t kFormRefAddr = 0x10;
constexpr uint64_t kFormRef4 = 0x13;
constexpr uint64_t kFormSecOffset = 0x17;
constexpr uint64_t kFormExprloc = 0x18;
constexpr uint64_t kFormFlagPresent = 0x19;

constexpr uint8_t kOpAddr = 0x03;
constexpr uint8_t kOpBreg4 = 0x74;
constexpr uint8_t kOpBreg5 = 0x75;
constexpr uint8_t kOpFbreg = 0x91;

struct AbbrevDecl {
    uint64_t tag = 0;
    bool children = false;
    std::vector<std::pair<uint64_t, uint64_t>> attrs;
};

using AttrValue = std::variant<uint64_t, int64_t, std::string, ByteVec>;

struct Die {
    uint64_t tag = 0;
    bool children = false;
    size_t offset = 0; // CU-relative, for ref4 resolution
    std::map<uint64_t, AttrValue> attrs;
};

struct Reader {
    ByteSpan bytes;
    size_t pos = 0;

    bool eof() const { return pos >= bytes.size(); }
    uint8_t u8() {
        if (pos >= bytes.size())
            throw MalformedDwarfError("unexpected end of data");
        return bytes[pos++];
    }
    uint16_t u16() {
        uint16_t v = read_u16le(bytes, pos);
        pos += 2;
        return v;
    }
    uint32_t u32() {
        uint32_t v = read_u32le(bytes, pos);
        pos += 4;
        return v;
    }
    uint64_t uleb() {
        size_t p = pos;
        uint64_t v = read_uleb128(bytes, p);
        pos = p;
        return v;
    }
    int64_t sleb() {
        size_t p = pos;
        int64_t v = read_sleb128(bytes, p);
        pos = p;
        return v;
    }
    std::string cstr() {
        std::string s;
        for (;;) {
            uint8_t c = u8();
            if (c == 0)
                break;
            s.push_back(static_cast<char>(c));
        }
        return s;
    }
    ByteVec block(size_t n) {
        if (pos + n > bytes.size())
            throw MalformedDwarfError("block runs past end");
        ByteVec v(bytes.begin() + pos, bytes.begin() + pos + n);
        pos += n;
        return v;
    }
};

std::map<uint64_t, AbbrevDecl> parse_abbrev_table(ByteSpan abbrev,
                                                  size_t offset) {
    if (offset > abbrev.size())
        throw MalformedDwarfError("abbrev offset out of range");
    Reader r{abbrev, offset};
    std::map<uint64_t, AbbrevDecl> table;
    for (;;) {
        if (r.eof())
            break;
        uint64_t code = r.uleb();
        if (code == 0)
            break;
        AbbrevDecl d;
        d.tag = r.uleb();
        d.children = r.u8() != 0;
        for (;;) {
            uint64_t at = r.uleb();
            uint64_t form = r.uleb();
            if (at == 0 && form == 0)
                break;
            d.attrs.emplace_back(at, form);
        }
        table[code] = d;
    }
    if (table.empty())
        throw MalformedDwarfError("empty abbrev table");
    return table;
}

AttrValue read_form(Reader& r, uint64_t form, ByteSpan debug_str) {
    switch (form) {
    case kFormAddr: return static_cast<uint64_t>(r.u32());
    case kFormData1: return static_cast<uint64_t>(r.u8());
    case kFormData2: return static_cast<uint64_t>(r.u16());
    case kFormData4: return static_cast<uint64_t>(r.u32());
    case kFormData8: {
        uint64_t lo = r.u32();
        uint64_t hi = r.u32();
        return lo | (hi << 32);
    }
    case kFormString: return r.cstr();
    case kFormStrp: {
        uint32_t off = r.u32();
        if (off >= debug_str.size())
            throw MalformedDwarfError("strp offset out of range");
        std::string s;
        for (size_t i = off; i < debug_str.size() && debug_str[i]; ++i)
            s.push_back(static_cast<char>(debug_str[i]));
        return s;
    }
    case kFormSdata: return r.sleb();
    case kFormUdata: return r.uleb();
    case kFormRef4: return static_cast<uint64_t>(r.u32());
    case kFormRefAddr: return static_cast<uint64_t>(r.u32());
    case kFormSecOffset: return static_cast<uint64_t>(r.u32());
    case kFormFlag: return static_cast<uint64_t>(r.u8());
    case kFormFlagPresent: return static_cast<uint64_t>(1);
    case kFormBlock1: {
        size_t n = r.u8();
        return r.block(n);
    }
    case kFormExprloc: {
        size_t n = r.uleb();
        return r.block(n);
    }
    default:
        throw MalformedDwarfError("unsupported form " + std::to_string(form));
    }
}

struct LocExpr {
    enum class Kind { GlobalAddr, FrameReg, FbregOffset, Unresolvable };
    Kind kind = Kind::Unresolvable;
    uint32_t addr = 0;
    FrameBase base = FrameBase::Ebp;
    int64_t disp = 0;
};

LocExpr eval_loc(const ByteVec& expr) {
    LocExpr out;
    Reader r{expr, 0};
    if (r.eof())
        return out;
    uint8_t op = r.u8();
    switch (op) {
    case kOpAddr:
        out.addr = r.u32();
        out.kind = LocExpr::Kind::GlobalAddr;
        break;
    case kOpBreg5:
        out.base = FrameBase::Ebp;
        out.disp = r.sleb();
        out.kind = LocExpr::Kind::FrameReg;
        break;
    case kOpBreg4:
        out.base = FrameBase::Esp;
        out.disp = r.sleb();
        out.kind = LocExpr::Kind::FrameReg;
        break;
    case kOpFbreg:
        out.disp = r.sleb();
        out.kind = LocExpr::Kind::FbregOffset;
        break;
    default:
        return out;
    }
    // Trailing operations (deref chains etc.) make the location dynamic.
    if (!r.eof())
        out.kind = LocExpr::Kind::Unresolvable;
    return out;
}

std::optional<uint64_t> attr_u64(const Die& die, uint64_t at) {
    auto it = die.attrs.find(at);
    if (it == die.attrs.end())
        return std::nullopt;
    if (auto* u = std::get_if<uint64_t>(&it->second))
        return *u;
    if (auto* s = std::get_if<int64_t>(&it->second))
        return static_cast<uint64_t>(*s);
    return std::nullopt;
}

std::optional<std::string> attr_str(const Die& die, uint64_t at) {
    auto it = die.attrs.find(at);
    if (it == die.attrs.end())
        return std::nullopt;
    if (auto* s = std::get_if<std::string>(&it->second))
        return *s;
    return std::nullopt;
}

const ByteVec* attr_block(const Die& die, uint64_t at) {
    auto it = die.attrs.find(at);
    if (it == die.attrs.end())
        return nullptr;
    return std::get_if<ByteVec>(&it->second);
}

// Follow DW_AT_type references until a DIE carrying DW_AT_byte_size.
std::optional<uint32_t> resolve_byte_size(const std::map<size_t, Die>& by_off,
                                          const Die& die) {
    const Die* cur = &die;
    for (int depth = 0; depth < 8; ++depth) {
        if (auto sz = attr_u64(*cur, kAttrByteSize))
            return static_cast<uint32_t>(*sz);
        auto ref = attr_u64(*cur, kAttrType);
        if (!ref)
            return std::nullopt;
        auto it = by_off.find(static_cast<size_t>(*ref));
        if (it == by_off.end())
            return std::nullopt;
        cur = &it->second;
    }
    return std::nullopt;
}

} // namespace

std::vector<DwarfVariable> parse_dwarf(ByteSpan debug_info,
                                       ByteSpan debug_abbrev,
                                       ByteSpan debug_str, size_t& skipped) {
    std::vector<DwarfVariable> out;
    skipped = 0;
    Reader cu_reader{debug_info, 0};

    while (!cu_reader.eof()) {
        size_t cu_start = cu_reader.pos;
        uint32_t unit_length = cu_reader.u32();
        size_t cu_end = cu_reader.pos + unit_length;
        if (cu_end > debug_info.size())
            throw MalformedDwarfError("unit length exceeds section");
        uint16_t version = cu_reader.u16();
        if (version < 2 || version > 5)
            throw MalformedDwarfError("unsupported version " +
                                      std::to_string(version));
        uint32_t abbrev_off = cu_reader.u32();
        uint8_t addr_size = cu_reader.u8();
        if (version == 5) {
            // v5 swaps unit_type in before the abbrev offset; not produced
            // by the fixture writer, rejected as unsupported layout.
            throw MalformedDwarfError("DWARF v5 layout not supported");
        }
        if (addr_size != 4)
            throw MalformedDwarfError("address size " +
                                      std::to_string(addr_size));

        auto abbrevs = parse_abbrev_table(debug_abbrev, abbrev_off);

        // First pass: flatten the DIE tree, tracking depth to recover the
        // enclosing subprogram for each variable.
        struct FlatDie {
            Die die;
            int depth = 0;
        };
        std::vector<FlatDie> flat;
        std::map<size_t, Die> by_off;
        int depth = 0;
        Reader r{debug_info, cu_reader.pos};
        while (r.pos < cu_end) {
            size_t die_off = r.pos - cu_start;
            uint64_t code = r.uleb();
            if (code == 0) {
                if (depth > 0)
                    --depth;
                if (depth == 0 && r.pos >= cu_end)
                    break;
                continue;
            }
            auto it = abbrevs.find(code);
            if (it == abbrevs.end())
                throw MalformedDwarfError("abbrev code " +
                                          std::to_string(code) +
                                          " not declared");
            Die die;
            die.tag = it->second.tag;
            die.children = it->second.children;
            die.offset = die_off;
            for (auto [at, form] : it->second.attrs)
                die.attrs[at] = read_form(r, form, debug_str);
            flat.push_back({die, depth});
            by_off[die_off] = die;
            if (die.children)
                ++depth;
        }
        cu_reader.pos = cu_end;

        // Second pass: emit variables.
        std::vector<std::pair<int, const Die*>> func_stack;
        for (const auto& fd : flat) {
            while (!func_stack.empty() && fd.depth <= func_stack.back().first)
                func_stack.pop_back();
            if (fd.die.tag == kTagSubprogram) {
                func_stack.push_back({fd.depth, &fd.die});
                continue;
            }
            if (fd.die.tag != kTagVariable)
                continue;

            const Die& var = fd.die;
            const ByteVec* loc = attr_block(var, kAttrLocation);
            if (!loc) {
                ++skipped;
                continue;
            }
            LocExpr e = eval_loc(*loc);

            DwarfVariable v;
            v.name = attr_str(var, kAttrName).value_or("");
            if (!func_stack.empty())
                v.enclosing_function =
                    attr_str(*func_stack.back().second, kAttrName);
            if (auto sz = resolve_byte_size(by_off, var))
                v.byte_size = *sz;

            switch (e.kind) {
            case LocExpr::Kind::GlobalAddr:
                v.global_addr = e.addr;
                break;
            case LocExpr::Kind::FrameReg:
                v.frame_rel = DwarfVariable::FrameRel{
                    e.base, static_cast<int32_t>(e.disp)};
                break;
            case LocExpr::Kind::FbregOffset: {
                // Resolve against the enclosing subprogram's frame base.
                if (func_stack.empty()) {
                    ++skipped;
                    continue;
                }
                const ByteVec* fb =
                    attr_block(*func_stack.back().second, kAttrFrameBase);
                if (!fb) {
                    ++skipped;
                    continue;
                }
                LocExpr fbe = eval_loc(*fb);
                if (fbe.kind != LocExpr::Kind::FrameReg) {
                    ++skipped;
                    continue;
                }
                v.frame_rel = DwarfVariable::FrameRel{
                    fbe.base, static_cast<int32_t>(fbe.disp + e.disp)};
                break;
            }
            case LocExpr::Kind::Unresolvable:
                ++skipped;
                continue;
            }
            out.push_back(std::move(v));
        }

        if (cu_reader.pos <= cu_start)
            throw MalformedDwarfError("compilation unit does not advance");
    }
    return out;
}

} // namespace bindis
