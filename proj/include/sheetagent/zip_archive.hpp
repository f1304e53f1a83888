#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sheetagent {

/// Central-directory record for one archive member.
struct ZipEntry
{
    std::string name;
    std::uint16_t version_made_by = 20;
    std::uint16_t flags = 0;
    std::uint16_t method = 0; // 0 = stored, 8 = deflate
    std::uint16_t mod_time = 0;
    std::uint16_t mod_date = 0;
    std::uint32_t crc32 = 0;
    std::uint32_t compressed_size = 0;
    std::uint32_t uncompressed_size = 0;
    std::uint32_t external_attr = 0;
    std::uint32_t local_header_offset = 0;
};

/// In-memory view of a zip container. No zip64, no encryption; both are
/// outside what spreadsheet applications write for ordinary workbooks.
class ZipArchive
{
public:
    /// Throws IoError if unreadable, NotAZip if the bytes are not a zip.
    static ZipArchive open(const std::filesystem::path& path);
    static ZipArchive from_bytes(std::string bytes);

    const std::vector<ZipEntry>& entries() const { return entries_; }

    /// Exact match first, then ASCII case-insensitive (OOXML part names are
    /// case-insensitive).
    const ZipEntry* find(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name) != nullptr; }

    /// Decompressed member contents. Throws MissingPart.
    std::string read(std::string_view name) const;
    std::string read(const ZipEntry& entry) const;

    /// Compressed bytes exactly as stored in the archive.
    std::string_view raw_data(const ZipEntry& entry) const;

private:
    std::string bytes_;
    std::vector<ZipEntry> entries_;
};

class ZipWriter
{
public:
    /// Copies a member through without recompressing it.
    void add_raw(const ZipEntry& entry, std::string_view compressed);
    /// Adds a new member, deflated.
    void add(const std::string& name, std::string_view content, const ZipEntry* like = nullptr);

    /// Produces the archive bytes; the writer is spent afterwards.
    std::string finish();

private:
    void append_local(const ZipEntry& entry, std::string_view data);

    std::string out_;
    std::vector<ZipEntry> written_;
};

std::uint32_t crc32_of(std::string_view data);

} // namespace sheetagent
