#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "funl/model.hpp"

namespace funl {

// Model file format (PRIMARY interchange format, little-endian throughout):
//   magic   "FUNL"
//   version u16 (currently 1)
//   arch_id u32 length + bytes
//   params  u32 count, then per parameter:
//             name  u32 length + bytes
//             shape u32 rank + u32 dims
//             data  numel * f64
// Round-trips are bit-exact on all parameters.

std::vector<std::uint8_t> serialize_model(const Model& m);
Model deserialize_model(const std::vector<std::uint8_t>& bytes);

void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);
// Additionally rejects files whose arch_id differs from `expected_arch_id`.
Model load_model(const std::string& path, const std::string& expected_arch_id);

std::size_t serialized_size(const Model& m);

// Per-parameter dense difference between two models with identical
// parameter names; used for communication accounting and diagnostics.
struct ModelDelta {
    std::vector<std::pair<std::string, std::vector<double>>> entries;

    static ModelDelta between(const Model& from, const Model& to);
    void apply_to(Model& m) const;
    std::size_t byte_size() const;
};

}  // namespace funl
