#pragma once

// Network description files (YAML). Schema: docs/network_format.md.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sparq/conv.hpp"
#include "sparq/delta_gru.hpp"
#include "sparq/mem_model.hpp"

namespace sparq {

enum class NetworkKind { Conv, Gru };

struct NetworkDesc {
  std::string name = "network";
  NetworkKind kind = NetworkKind::Conv;
  std::vector<ConvLayerSpec> conv;
  std::vector<GruLayerSpec> gru;
  std::vector<std::uint32_t> input_shape;  // (C, H, W) for conv, (I) for gru
  std::optional<std::filesystem::path> mem_config;  // resolved against the net file

  std::uint32_t input_size() const noexcept;  // element count of one input
};

// Relative paths inside the file resolve against `base_dir`. `seed` drives
// layers declared with `init: random` that carry no seed of their own.
NetworkDesc parse_network(const std::string& text, const std::filesystem::path& base_dir, std::uint64_t seed = 0);
NetworkDesc load_network(const std::filesystem::path& path, std::uint64_t seed = 0);

// Checks that each layer consumes what the previous one produces; throws ShapeMismatch.
void validate_chain(const NetworkDesc& net);

struct RunConfig {
  MemConfig mem{};
  bool fuse_relu_pool = true;
};

// A YAML mapping with an optional `mem:` block and `fuse_relu_pool:`. A file
// holding only memory keys is accepted too.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
MemConfig load_mem_config(const std::filesystem::path& path, MemConfig base = {});

// YAML scalars become numbers or booleans where they parse as such.
nlohmann::json yaml_to_json(const std::string& text);

}  // namespace sparq
