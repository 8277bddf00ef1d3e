#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "csifuse/nn/param.hpp"

namespace csifuse::nn {

/// A named f32 tensor; `data` is row-major over `dims`.
struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

inline constexpr std::uint8_t kCheckpointVersion = 1;

/// GFBW v1: "GFBW" | version u8 | count u32 | per tensor: name length u16,
/// name bytes, rank u8, dims u32 each, f32 payload. Little-endian; tensors
/// are written in lexicographic name order.
std::vector<std::uint8_t> encode_checkpoint(std::vector<NamedTensor> tensors);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, std::vector<NamedTensor> tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

template <typename Scalar>
NamedTensor to_named_tensor(const Param<Scalar>& p) {
  NamedTensor t;
  t.name = p.name;
  if (p.rank == 1) {
    t.dims = {static_cast<std::uint32_t>(p.value.size())};
  } else {
    t.dims = {static_cast<std::uint32_t>(p.value.rows()), static_cast<std::uint32_t>(p.value.cols())};
  }
  t.data.reserve(static_cast<std::size_t>(p.value.size()));
  for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.value.cols(); ++j) t.data.push_back(static_cast<float>(p.value(i, j)));
  }
  return t;
}

template <typename Scalar>
std::vector<NamedTensor> to_named_tensors(const ParamRefs<Scalar>& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const auto* p : params) out.push_back(to_named_tensor(*p));
  return out;
}

/// Copies tensors into matching parameters; every parameter must be present
/// with the same element count and leading dimension.
template <typename Scalar>
void assign_named_tensors(const ParamRefs<Scalar>& params, const std::vector<NamedTensor>& tensors) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  for (auto* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw FormatError("checkpoint: missing tensor '" + p->name + "'");
    const NamedTensor& t = *it->second;
    const bool shape_ok = p->rank == 1 ? (t.dims.size() == 1 && t.dims[0] == p->value.size())
                                       : (t.dims.size() == 2 && t.dims[0] == p->value.rows() &&
                                          t.dims[1] == p->value.cols());
    if (!shape_ok) throw ShapeError("checkpoint: tensor '" + p->name + "' has unexpected shape");
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) p->value(i, j) = static_cast<Scalar>(t.data[k++]);
    }
  }
}

/// Looks up a tensor by name.
const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);

}  // namespace csifuse::nn
