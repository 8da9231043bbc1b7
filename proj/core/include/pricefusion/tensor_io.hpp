#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "pricefusion/tensor.hpp"

namespace pricefusion {

/// Raised for unreadable, truncated or malformed files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// PFT1 layout: "PFT1", u32 rank, rank x u32 dims, product(dims) x f32.
// Every integer and float is little-endian; the payload is row-major.

void write_tensor(std::ostream& out, const Tensor& tensor);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace pricefusion
