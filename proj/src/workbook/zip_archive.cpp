#include "sheetagent/zip_archive.hpp"

#include "sheetagent/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>

namespace sheetagent {
namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint16_t kFlagDataDescriptor = 0x0008;

std::uint16_t get16(std::string_view b, std::size_t at)
{
    if (at + 2 > b.size())
        throw NotAZip("truncated zip structure");
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                      (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t get32(std::string_view b, std::size_t at)
{
    return static_cast<std::uint32_t>(get16(b, at)) | (static_cast<std::uint32_t>(get16(b, at + 2)) << 16);
}

void put16(std::string& out, std::uint16_t v)
{
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put32(std::string& out, std::uint32_t v)
{
    put16(out, static_cast<std::uint16_t>(v & 0xffff));
    put16(out, static_cast<std::uint16_t>(v >> 16));
}

bool iequals(std::string_view a, std::string_view b)
{
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

std::string inflate_raw(std::string_view compressed, std::size_t expected)
{
    std::string out(expected, '\0');
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK)
        throw IoError("inflateInit2 failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
    zs.avail_in = static_cast<uInt>(compressed.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = inflate(&zs, Z_FINISH);
    auto produced = zs.total_out;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || produced != expected)
        throw IoError("corrupt deflate stream in zip member");
    return out;
}

std::string deflate_raw(std::string_view data)
{
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw IoError("deflateInit2 failed");
    std::string out(deflateBound(&zs, static_cast<uLong>(data.size())), '\0');
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = deflate(&zs, Z_FINISH);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END)
        throw IoError("deflate failed");
    return out;
}

} // namespace

std::uint32_t crc32_of(std::string_view data)
{
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

ZipArchive ZipArchive::open(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path.string() + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_bytes(std::move(bytes));
}

ZipArchive ZipArchive::from_bytes(std::string bytes)
{
    static const char kOle[] = "\xD0\xCF\x11\xE0\xA1\xB1\x1A\xE1";
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kOle, 8) == 0)
        throw NotAZip("legacy binary .xls workbooks are not supported");
    if (bytes.size() < 22)
        throw NotAZip("file too small to be a zip archive");

    // The end record sits within the last 64 KiB + 22 bytes (max comment size).
    std::string_view view(bytes);
    std::size_t floor = view.size() > 65557 ? view.size() - 65557 : 0;
    std::size_t eocd = std::string_view::npos;
    for (std::size_t i = view.size() - 22 + 1; i-- > floor;) {
        if (get32(view, i) == kEndSig) {
            eocd = i;
            break;
        }
    }
    if (eocd == std::string_view::npos)
        throw NotAZip("no end-of-central-directory record");

    auto count = get16(view, eocd + 10);
    auto cd_size = get32(view, eocd + 12);
    auto cd_offset = get32(view, eocd + 16);
    if (count == 0xffff || cd_offset == 0xffffffff)
        throw NotAZip("zip64 archives are not supported");
    if (std::size_t(cd_offset) + cd_size > view.size())
        throw NotAZip("central directory out of bounds");

    ZipArchive archive;
    std::size_t at = cd_offset;
    for (std::uint16_t i = 0; i < count; ++i) {
        if (get32(view, at) != kCentralSig)
            throw NotAZip("bad central directory signature");
        ZipEntry e;
        e.version_made_by = get16(view, at + 4);
        e.flags = get16(view, at + 8);
        e.method = get16(view, at + 10);
        e.mod_time = get16(view, at + 12);
        e.mod_date = get16(view, at + 14);
        e.crc32 = get32(view, at + 16);
        e.compressed_size = get32(view, at + 20);
        e.uncompressed_size = get32(view, at + 24);
        auto name_len = get16(view, at + 28);
        auto extra_len = get16(view, at + 30);
        auto comment_len = get16(view, at + 32);
        e.external_attr = get32(view, at + 38);
        e.local_header_offset = get32(view, at + 42);
        if (at + 46 + name_len > view.size())
            throw NotAZip("truncated central directory");
        e.name.assign(view.substr(at + 46, name_len));
        at += 46 + std::size_t(name_len) + extra_len + comment_len;
        archive.entries_.push_back(std::move(e));
    }
    archive.bytes_ = std::move(bytes);
    return archive;
}

const ZipEntry* ZipArchive::find(std::string_view name) const
{
    for (const auto& e : entries_)
        if (e.name == name)
            return &e;
    for (const auto& e : entries_)
        if (iequals(e.name, name))
            return &e;
    return nullptr;
}

std::string_view ZipArchive::raw_data(const ZipEntry& entry) const
{
    std::string_view view(bytes_);
    std::size_t at = entry.local_header_offset;
    if (get32(view, at) != kLocalSig)
        throw NotAZip("bad local header for '" + entry.name + "'");
    auto name_len = get16(view, at + 26);
    auto extra_len = get16(view, at + 28);
    std::size_t data_at = at + 30 + name_len + extra_len;
    if (data_at + entry.compressed_size > view.size())
        throw NotAZip("member '" + entry.name + "' runs past end of archive");
    return view.substr(data_at, entry.compressed_size);
}

std::string ZipArchive::read(std::string_view name) const
{
    const auto* e = find(name);
    if (!e)
        throw MissingPart(std::string(name));
    return read(*e);
}

std::string ZipArchive::read(const ZipEntry& entry) const
{
    auto raw = raw_data(entry);
    std::string out;
    if (entry.method == 0)
        out.assign(raw);
    else if (entry.method == 8)
        out = inflate_raw(raw, entry.uncompressed_size);
    else
        throw IoError("unsupported compression method " + std::to_string(entry.method) + " for '" + entry.name + "'");
    if (crc32_of(out) != entry.crc32)
        throw IoError("CRC mismatch in zip member '" + entry.name + "'");
    return out;
}

void ZipWriter::append_local(const ZipEntry& entry, std::string_view data)
{
    ZipEntry e = entry;
    // Sizes are known up front, so trailing data descriptors are dropped.
    e.flags = static_cast<std::uint16_t>(e.flags & ~kFlagDataDescriptor);
    e.local_header_offset = static_cast<std::uint32_t>(out_.size());

    put32(out_, kLocalSig);
    put16(out_, 20);
    put16(out_, e.flags);
    put16(out_, e.method);
    put16(out_, e.mod_time);
    put16(out_, e.mod_date);
    put32(out_, e.crc32);
    put32(out_, e.compressed_size);
    put32(out_, e.uncompressed_size);
    put16(out_, static_cast<std::uint16_t>(e.name.size()));
    put16(out_, 0);
    out_ += e.name;
    out_.append(data);
    written_.push_back(std::move(e));
}

void ZipWriter::add_raw(const ZipEntry& entry, std::string_view compressed)
{
    append_local(entry, compressed);
}

void ZipWriter::add(const std::string& name, std::string_view content, const ZipEntry* like)
{
    ZipEntry e;
    if (like)
        e = *like;
    e.name = name;
    e.method = 8;
    e.flags = static_cast<std::uint16_t>(e.flags & 0x0800); // keep only the UTF-8 name bit
    e.crc32 = crc32_of(content);
    e.uncompressed_size = static_cast<std::uint32_t>(content.size());
    auto packed = deflate_raw(content);
    e.compressed_size = static_cast<std::uint32_t>(packed.size());
    append_local(e, packed);
}

std::string ZipWriter::finish()
{
    auto cd_offset = static_cast<std::uint32_t>(out_.size());
    for (const auto& e : written_) {
        put32(out_, kCentralSig);
        put16(out_, e.version_made_by);
        put16(out_, 20);
        put16(out_, e.flags);
        put16(out_, e.method);
        put16(out_, e.mod_time);
        put16(out_, e.mod_date);
        put32(out_, e.crc32);
        put32(out_, e.compressed_size);
        put32(out_, e.uncompressed_size);
        put16(out_, static_cast<std::uint16_t>(e.name.size()));
        put16(out_, 0);
        put16(out_, 0);
        put16(out_, 0);
        put16(out_, 0);
        put32(out_, e.external_attr);
        put32(out_, e.local_header_offset);
        out_ += e.name;
    }
    auto cd_size = static_cast<std::uint32_t>(out_.size() - cd_offset);
    put32(out_, kEndSig);
    put16(out_, 0);
    put16(out_, 0);
    put16(out_, static_cast<std::uint16_t>(written_.size()));
    put16(out_, static_cast<std::uint16_t>(written_.size()));
    put32(out_, cd_size);
    put32(out_, cd_offset);
    put16(out_, 0);
    written_.clear();
    return std::move(out_);
}

} // namespace sheetagent
