#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stresslab {

struct TarEntry {
    std::string name;  // at most 100 bytes
    std::string data;
};

/// POSIX ustar archive of regular files with zeroed mtime/uid/gid, so equal
/// inputs produce byte-identical archives.
std::string write_tar(std::span<const TarEntry> entries);

/// Reads regular-file entries; throws InvalidArgument on a bad checksum or truncation.
std::vector<TarEntry> read_tar(std::string_view archive);

}  // namespace stresslab
