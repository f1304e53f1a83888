#pragma once

#include "sheetagent/zip_archive.hpp"

#include <map>
#include <string>

namespace sheetagent::detail {

struct Relationship
{
    std::string type;
    std::string target; // archive path, already resolved
};

std::string resolve_target(const std::string& base_dir, const std::string& target);

/// Relationships of `part_path` keyed by Id; "" reads the package-level rels.
std::map<std::string, Relationship> read_relationships(const ZipArchive& zip, const std::string& part_path);

std::string find_workbook_part(const ZipArchive& zip);

} // namespace sheetagent::detail
