#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "phosc/net/params.hpp"

namespace phosc::net {

inline constexpr char kCheckpointMagic[] = "PHOSC1";

// Layout: "PHOSC1", u32 little-endian header length, UTF-8 JSON header,
// then every tensor as little-endian float32 in header order. The header is
// the caller's metadata object plus a "tensors" array of {name, shape, dtype}.
struct Checkpoint {
  nlohmann::json meta;
  ParamStore<float> params;
};

std::string serialize_checkpoint(const nlohmann::json& meta, const ParamStore<float>& params);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta, const ParamStore<float>& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace phosc::net
