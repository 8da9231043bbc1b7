#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "pricefusion/tensor.hpp"

namespace pricefusion {

/// Decodes raster files into [H, W, 3] tensors with values in [0, 1].
class ImageDecoder {
 public:
  virtual ~ImageDecoder() = default;
  /// Returns nullopt and fills `reason` when the file cannot be decoded.
  virtual std::optional<Tensor> decode(const std::filesystem::path& path, std::string& reason) const = 0;
  virtual std::string name() const = 0;
};

/// Binary (P6) and ASCII (P3) portable pixmaps, 8 or 16 bit.
class PpmDecoder final : public ImageDecoder {
 public:
  std::optional<Tensor> decode(const std::filesystem::path& path, std::string& reason) const override;
  std::string name() const override { return "ppm"; }
};

/// PPM natively, everything else through OpenCV when the library was built with it.
std::unique_ptr<ImageDecoder> default_image_decoder();
bool opencv_available() noexcept;

/// Bilinear resampling of [H, W, C] with pixel-centre alignment.
Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width);

/// Writes a binary PPM from [H, W, 3] values in [0, 1].
void write_ppm(const std::filesystem::path& path, const Tensor& image);

}  // namespace pricefusion
