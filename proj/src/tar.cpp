#include "stresslab/tar.hpp"

#include "stresslab/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cstring>

namespace stresslab {

namespace {

constexpr std::size_t kBlock = 512;

void put_octal(char* field, std::size_t width, unsigned long long value) {
    // width - 1 digits followed by NUL
    const std::string digits = fmt::format("{:0{}o}", value, width - 1);
    if (digits.size() != width - 1) throw InvalidArgument("tar field overflow");
    std::memcpy(field, digits.data(), width - 1);
    field[width - 1] = '\0';
}

unsigned long long get_octal(const char* field, std::size_t width) {
    unsigned long long value = 0;
    for (std::size_t k = 0; k < width; ++k) {
        const char c = field[k];
        if (c == '\0' || c == ' ') {
            if (value != 0) break;
            continue;
        }
        if (c < '0' || c > '7') throw InvalidArgument("tar header has a non-octal numeric field");
        value = value * 8 + static_cast<unsigned>(c - '0');
    }
    return value;
}

unsigned checksum(const std::array<char, kBlock>& header) {
    unsigned sum = 0;
    for (std::size_t k = 0; k < kBlock; ++k) {
        const bool in_field = k >= 148 && k < 156;
        sum += in_field ? static_cast<unsigned>(' ') : static_cast<unsigned char>(header[k]);
    }
    return sum;
}

}  // namespace

std::string write_tar(std::span<const TarEntry> entries) {
    std::string out;
    for (const auto& e : entries) {
        if (e.name.empty() || e.name.size() > 100) throw InvalidArgument(fmt::format("tar name '{}' unsupported", e.name));
        std::array<char, kBlock> h{};
        std::memcpy(h.data(), e.name.data(), e.name.size());
        put_octal(h.data() + 100, 8, 0644);
        put_octal(h.data() + 108, 8, 0);
        put_octal(h.data() + 116, 8, 0);
        put_octal(h.data() + 124, 12, e.data.size());
        put_octal(h.data() + 136, 12, 0);
        h[156] = '0';
        std::memcpy(h.data() + 257, "ustar", 6);
        std::memcpy(h.data() + 263, "00", 2);
        const std::string sum = fmt::format("{:06o}", checksum(h));
        std::memcpy(h.data() + 148, sum.data(), 6);
        h[154] = '\0';
        h[155] = ' ';
        out.append(h.data(), kBlock);
        out += e.data;
        out.append((kBlock - e.data.size() % kBlock) % kBlock, '\0');
    }
    out.append(2 * kBlock, '\0');
    return out;
}

std::vector<TarEntry> read_tar(std::string_view archive) {
    std::vector<TarEntry> entries;
    std::size_t pos = 0;
    while (pos + kBlock <= archive.size()) {
        std::array<char, kBlock> h;
        std::memcpy(h.data(), archive.data() + pos, kBlock);
        if (std::all_of(h.begin(), h.end(), [](char c) { return c == '\0'; })) return entries;
        if (get_octal(h.data() + 148, 8) != checksum(h)) throw InvalidArgument("tar header checksum mismatch");
        const std::size_t size = get_octal(h.data() + 124, 12);
        pos += kBlock;
        if (pos + size > archive.size()) throw InvalidArgument("truncated tar archive");
        if (h[156] == '0' || h[156] == '\0') {
            std::string name(h.data(), strnlen(h.data(), 100));
            const std::string prefix(h.data() + 345, strnlen(h.data() + 345, 155));
            if (!prefix.empty()) name = prefix + "/" + name;
            entries.push_back({std::move(name), std::string(archive.substr(pos, size))});
        }
        pos += (size + kBlock - 1) / kBlock * kBlock;
    }
    throw InvalidArgument("tar archive lacks its end-of-archive marker");
}

}  // namespace stresslab
