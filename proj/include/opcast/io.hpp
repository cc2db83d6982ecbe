#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace opcast {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

/// Writes through a uniquely named sibling temp file and renames it over
/// `path`, so readers only ever see complete files.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

struct PendingFile {
  std::filesystem::path path;
  std::vector<std::uint8_t> bytes;
};

/// Writes every file to a temp sibling first and renames only when all
/// writes succeeded. On failure no target path is left behind.
void commit_files(const std::vector<PendingFile>& files);

/// Sibling temp path used by the atomic writers; exposed for multi-file commits.
std::filesystem::path temp_sibling(const std::filesystem::path& path);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace opcast
