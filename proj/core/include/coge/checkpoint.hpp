#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "coge/gcn.hpp"

namespace coge {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Binary checkpoint layout (all integers little-endian):
///
///   magic   8 bytes  "COGEGCN\0"
///   version u32      kCheckpointVersion
///   prop    u32      Propagation code (0 symmetric, 1 degree_scaled)
///   count   u32      number of tensors
///   count x { name_len u32, name bytes, rows u32, cols u32,
///             rows*cols IEEE-754 float64, row-major }
///
/// Tensor names: conv{i}.weight, classifier.weight, classifier.bias. The
/// bias is stored as 1 x d.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string model_to_bytes(const GcnModel& model);
GcnModel model_from_bytes(const std::string& bytes);

void save_model(const GcnModel& model, const std::filesystem::path& path);
GcnModel load_model(const std::filesystem::path& path);

}  // namespace coge
