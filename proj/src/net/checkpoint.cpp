#include "phosc/net/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "phosc/error.hpp"

namespace phosc::net {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace

std::string serialize_checkpoint(const nlohmann::json& meta, const ParamStore<float>& params) {
  nlohmann::json header = meta;
  auto tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    tensors.push_back({{"name", params.name(i)}, {"shape", params[i].shape()}, {"dtype", "f32"}});
  }
  header["tensors"] = tensors;
  const std::string text = header.dump();
  std::string out(kCheckpointMagic);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (float v : params[i].values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  const std::size_t magic_len = std::strlen(kCheckpointMagic);
  if (bytes.size() < magic_len + 4 || bytes.compare(0, magic_len, kCheckpointMagic) != 0) {
    throw Error(ErrorCode::kFormatError, "not a PHOSC1 checkpoint");
  }
  const std::uint32_t len = get_u32(bytes, magic_len);
  std::size_t pos = magic_len + 4;
  if (bytes.size() < pos + len) throw Error(ErrorCode::kFormatError, "truncated checkpoint header");
  Checkpoint ckpt;
  try {
    ckpt.meta = nlohmann::json::parse(bytes.substr(pos, len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, std::string("bad checkpoint header: ") + e.what());
  }
  pos += len;
  if (!ckpt.meta.contains("tensors") || !ckpt.meta["tensors"].is_array()) {
    throw Error(ErrorCode::kFormatError, "checkpoint header lacks tensor table");
  }
  for (const auto& t : ckpt.meta["tensors"]) {
    if (t.value("dtype", "") != "f32") throw Error(ErrorCode::kFormatError, "unsupported tensor dtype");
    const auto idx = ckpt.params.add(t.at("name").get<std::string>(), t.at("shape").get<Shape>());
    auto& tensor = ckpt.params[idx];
    if (bytes.size() < pos + 4 * tensor.size()) throw Error(ErrorCode::kFormatError, "truncated tensor data");
    for (std::size_t i = 0; i < tensor.size(); ++i, pos += 4) tensor[i] = std::bit_cast<float>(get_u32(bytes, pos));
  }
  if (pos != bytes.size()) throw Error(ErrorCode::kFormatError, "trailing bytes after tensor data");
  ckpt.meta.erase("tensors");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta, const ParamStore<float>& params) {
  const std::string bytes = serialize_checkpoint(meta, params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace phosc::net
