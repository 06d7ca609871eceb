#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "numerics/tensor.hpp"

namespace tgpt::nn {

// Deterministic uniform in [0, 1) from a 64-bit engine, independent of the
// standard library's distribution implementations.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Named, ordered parameter collection. Order is creation order and is the
// checkpoint record order.
class ParameterSet {
 public:
  // Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Tensor& add_uniform(const std::string& name, Shape shape, std::size_t fan_in,
                      std::mt19937_64& rng);
  Tensor& add_zeros(const std::string& name, Shape shape);

  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const;

  std::span<Tensor> tensors() { return tensors_; }
  std::span<const Tensor> tensors() const { return tensors_; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;

  // Overwrites values from `other` (same names and shapes required).
  void assign_from(const std::vector<std::pair<std::string, Tensor>>& other);

 private:
  Tensor& push(const std::string& name, Tensor t);

  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

// ---- checkpoint ------------------------------------------------------------
// "TGPT1" then records: u32 name length, name bytes, u32 rank, u32 extents,
// little-endian f64 values. Records run to end of file.

std::string encode_checkpoint(const ParameterSet& params);
std::vector<std::pair<std::string, Tensor>> decode_checkpoint(std::string_view bytes);
void save_checkpoint(const ParameterSet& params, const std::string& path);
std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path);

}  // namespace tgpt::nn
