#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace acl {

/// Flat binary container: an 8-byte little-endian header length, a JSON
/// header, then the declared float64 blocks in order, little-endian.
///
/// The header carries "format", "version", "kind", free-form "meta", and a
/// "blocks" array of {name, shape}. Block payload sizes must match the
/// declared shapes exactly.
struct ContainerBlock {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

struct Container {
  nlohmann::json meta;
  std::string kind;
  std::vector<ContainerBlock> blocks;
};

void write_container(const std::filesystem::path& path, const std::string& kind,
                     const nlohmann::json& meta,
                     const std::vector<ContainerBlock>& blocks);

Container read_container(const std::filesystem::path& path);

}  // namespace acl
