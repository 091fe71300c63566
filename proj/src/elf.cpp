// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
#include "bindis/elf.hpp"

#include <algorithm>
#include <fstream>

namespace bindis {

std::vector<DwarfVariable> parse_dwarf(ByteSpan debug_info, ByteSpan debug_abbrev,
                                       ByteSpan debug_str, size_t& skipped);

namespace {

constexpr uint32_t kShtProgbits = 1;
constexpr uint32_t kShtSymtab = 2;
constexpr uint32_t kShtNobits = 8;
constexpr uint32_t kShfExecinstr = 0x4;

struct Section {
    std::string name;
    uint32_t type = 0;
    uint32_t flags = 0;
    uint32_t addr = 0;
    uint32_t offset = 0;
    uint32_t size = 0;
    uint32_t link = 0;
};

std::string cstr_at(ByteSpan bytes, size_t off) {
    std::string out;
    while (off < bytes.size() && bytes[off] != 0)
        out.push_back(static_cast<char>(bytes[off++]));
    return out;
}

ByteSpan section_bytes(ByteSpan file, const Section& s) {
    if (s.type == kShtNobits)
        return {};
    if (static_cast<size_t>(s.offset) + s.size > file.size())
        throw TruncatedFileError("section " + s.name + " exceeds file size");
    return file.subspan(s.offset, s.size);
}

} // namespace

BinaryImage load_elf_bytes(ByteSpan bytes, const std::string& path) {
    bool has_magic = bytes.size() >= 4 && bytes[0] == 0x7f &&
                     bytes[1] == 'E' && bytes[2] == 'L' && bytes[3] == 'F';
    if (!has_magic)
        throw NotElfError(path);
    if (bytes.size() < 52)
        throw TruncatedFileError(path);
    uint8_t ei_class = bytes[4];
    uint8_t ei_data = bytes[5];
    if (ei_class != 1)
        throw WrongClassError(path + ": not a 32-bit ELF (class " +
                              std::to_string(ei_class) + ")");
    if (ei_data != 1)
        throw NotElfError(path + ": not little-endian");
    uint16_t machine = read_u16le(bytes, 18);
    if (machine != 3) // EM_386
        throw WrongClassError(path + ": machine " + std::to_string(machine) +
                              " is not i386");

    uint32_t shoff = read_u32le(bytes, 32);
    uint16_t shentsize = read_u16le(bytes, 46);
    uint16_t shnum = read_u16le(bytes, 48);
    uint16_t shstrndx = read_u16le(bytes, 50);
    if (shentsize < 40)
        throw NotElfError(path + ": bad section header size");
    if (static_cast<size_t>(shoff) + static_cast<size_t>(shnum) * shentsize >
        bytes.size())
        throw TruncatedFileError(path + ": section headers out of range");
    if (shstrndx >= shnum)
        throw NotElfError(path + ": bad string table index");

    std::vector<Section> sections(shnum);
    for (uint16_t i = 0; i < shnum; ++i) {
        size_t off = shoff + static_cast<size_t>(i) * shentsize;
        Section& s = sections[i];
        uint32_t name_off = read_u32le(bytes, off);
        s.type = read_u32le(bytes, off + 4);
        s.flags = read_u32le(bytes, off + 8);
        s.addr = read_u32le(bytes, off + 12);
        s.offset = read_u32le(bytes, off + 16);
        s.size = read_u32le(bytes, off + 20);
        s.link = read_u32le(bytes, off + 24);
        s.name = std::to_string(name_off); // patched below once shstrtab known
    }
    ByteSpan shstr = section_bytes(bytes, sections[shstrndx]);
    for (uint16_t i = 0; i < shnum; ++i) {
        size_t off = shoff + static_cast<size_t>(i) * shentsize;
        sections[i].name = cstr_at(shstr, read_u32le(bytes, off));
    }

    BinaryImage img;
    img.path = path;

    std::vector<size_t> exec_idx;
    for (size_t i = 0; i < sections.size(); ++i) {
        const Section& s = sections[i];
        img.sections.push_back(
            {s.name, s.addr, s.size, (s.flags & kShfExecinstr) != 0});
        if ((s.flags & kShfExecinstr) && s.type == kShtProgbits && s.size > 0)
            exec_idx.push_back(i);
        if (s.size > 0) {
            if (s.name == ".data")
                img.regions.set(Rgn::Data, s.addr, s.addr + s.size - 1);
            else if (s.name == ".rodata")
                img.regions.set(Rgn::Rodata, s.addr, s.addr + s.size - 1);
            else if (s.name == ".bss")
                img.regions.set(Rgn::Bss, s.addr, s.addr + s.size - 1);
        }
    }
    std::sort(exec_idx.begin(), exec_idx.end(), [&](size_t a, size_t b) {
        return sections[a].addr < sections[b].addr;
    });
    for (size_t i : exec_idx) {
        const Section& s = sections[i];
        ByteSpan sb = section_bytes(bytes, s);
        img.exec_segments.push_back({img.code.size(), s.addr, s.size});
        img.code.insert(img.code.end(), sb.begin(), sb.end());
    }
    img.code_vaddr = img.exec_segments.empty() ? 0 : img.exec_segments[0].vaddr;

    // Symbols.
    for (const Section& s : sections) {
        if (s.type != kShtSymtab)
            continue;
        ByteSpan symtab = section_bytes(bytes, s);
        if (s.link >= sections.size())
            throw NotElfError(path + ": symtab string link out of range");
        ByteSpan strtab = section_bytes(bytes, sections[s.link]);
        for (size_t off = 0; off + 16 <= symtab.size(); off += 16) {
            SymbolEntry e;
            uint32_t name_off = read_u32le(symtab, off);
            e.name = cstr_at(strtab, name_off);
            e.vaddr = read_u32le(symtab, off + 4);
            e.size = read_u32le(symtab, off + 8);
            uint8_t info = symtab[off + 12];
            uint16_t shndx = read_u16le(symtab, off + 14);
            switch (info & 0xf) {
            case 2: e.kind = SymbolKind::Function; break;
            case 1: e.kind = SymbolKind::Object; break;
            default: e.kind = SymbolKind::Other; break;
            }
            if (shndx < sections.size())
                e.section = sections[shndx].name;
            if (e.name.empty() && e.vaddr == 0)
                continue;
            img.symbols.push_back(e);
        }
    }

    // DWARF.
    ByteSpan dinfo, dabbrev, dstr;
    for (const Section& s : sections) {
        if (s.name == ".debug_info")
            dinfo = section_bytes(bytes, s);
        else if (s.name == ".debug_abbrev")
            dabbrev = section_bytes(bytes, s);
        else if (s.name == ".debug_str")
            dstr = section_bytes(bytes, s);
    }
    if (!dinfo.empty())
        img.dwarf_vars = parse_dwarf(dinfo, dabbrev, dstr, img.dwarf_skipped);

    return img;
}

BinaryImage load_elf(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw NotElfError(path + ": cannot open");
    ByteVec bytes((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
    return load_elf_bytes(bytes, path);
}

std::vector<uint32_t> function_entry_ground_truth(const BinaryImage& img) {
    if (img.symbols.empty())
        throw NoSymbolsError(img.path);
    std::vector<uint32_t> out;
    for (const auto& sym : img.symbols) {
        if (sym.kind != SymbolKind::Function)
            continue;
        if (sym.section == ".plt")
            continue;
        if (!img.offset_of(sym.vaddr))
            continue;
        out.push_back(sym.vaddr);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace bindis
