#pragma once

#include <optional>
#include <string>

#include "histokit/network.hpp"
#include "histokit/optim.hpp"

namespace histokit::io {

// On-disk model snapshot. Binary layout (integers little-endian):
//   magic "HMIC1" | u32 version | u64 spec-json length | spec json |
//   u64 tensor count | tensors (u32 rank, i32 dims..., f32 data) |
//   u8 optimizer flag | optimizer json + aux tensor blocks when set.
// load(save(x)) reproduces bit-identical parameters.
struct Checkpoint {
    nn::NetworkSpec spec;
    nn::Parameters params;
    std::optional<optim::OptimizerState> optimizer;
};

inline constexpr char kCheckpointMagic[5] = {'H', 'M', 'I', 'C', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string network_spec_to_json(const nn::NetworkSpec& spec);
nn::NetworkSpec network_spec_from_json(const std::string& json_text);

}  // namespace histokit::io
