#include "acl/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "acl/errors.hpp"

namespace acl {

namespace {

constexpr const char* kFormat = "acl-container";
constexpr int kVersion = 1;

void put_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw FormatError("container: truncated header length");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64_le(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64_le(os, bits);
}

double get_f64_le(std::istream& is) {
  const std::uint64_t bits = get_u64_le(is);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

std::size_t numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

}  // namespace

void write_container(const std::filesystem::path& path, const std::string& kind,
                     const nlohmann::json& meta,
                     const std::vector<ContainerBlock>& blocks) {
  nlohmann::json header;
  header["format"] = kFormat;
  header["version"] = kVersion;
  header["kind"] = kind;
  header["meta"] = meta;
  auto& jb = header["blocks"] = nlohmann::json::array();
  for (const auto& b : blocks) {
    if (numel(b.shape) != b.values.size()) {
      throw ContractError("container: block '" + b.name + "' shape/value mismatch");
    }
    jb.push_back({{"name", b.name}, {"shape", b.shape}});
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("container: cannot open for write: " + path.string());
  const std::string hs = header.dump();
  put_u64_le(os, hs.size());
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& b : blocks) {
    for (double v : b.values) put_f64_le(os, v);
  }
  if (!os) throw DataError("container: write failed: " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("container: cannot open: " + path.string());
  const std::uint64_t hlen = get_u64_le(is);
  if (hlen > (1ull << 30)) throw FormatError("container: implausible header length");
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw FormatError("container: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("container: bad header JSON: ") + e.what());
  }
  if (header.value("format", "") != kFormat) {
    throw FormatError("container: unexpected format tag '" +
                      header.value("format", std::string("<missing>")) + "'");
  }
  Container c;
  c.kind = header.value("kind", "");
  c.meta = header.value("meta", nlohmann::json::object());
  for (const auto& jb : header.value("blocks", nlohmann::json::array())) {
    ContainerBlock b;
    b.name = jb.at("name").get<std::string>();
    b.shape = jb.at("shape").get<std::vector<std::size_t>>();
    b.values.resize(numel(b.shape));
    for (auto& v : b.values) v = get_f64_le(is);
    if (!is) throw FormatError("container: truncated block '" + b.name + "'");
    c.blocks.push_back(std::move(b));
  }
  return c;
}

}  // namespace acl
