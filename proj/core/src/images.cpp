#include "pricefusion/images.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pricefusion/tensor_io.hpp"

#ifdef PRICEFUSION_HAVE_OPENCV
#include <opencv2/imgcodecs.hpp>
#endif

namespace pricefusion {
namespace {

bool read_token(std::istream& in, std::string& token) {
  token.clear();
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      token += c;
      break;
    }
  }
  while (in.get(c)) {
    if (std::isspace(static_cast<unsigned char>(c))) break;
    token += c;
  }
  return !token.empty();
}

#ifdef PRICEFUSION_HAVE_OPENCV
class OpenCvDecoder final : public ImageDecoder {
 public:
  std::optional<Tensor> decode(const std::filesystem::path& path, std::string& reason) const override {
    if (path.extension() == ".ppm") return ppm_.decode(path, reason);
    const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) {
      reason = "cannot decode " + path.string();
      return std::nullopt;
    }
    const auto h = static_cast<std::size_t>(bgr.rows), w = static_cast<std::size_t>(bgr.cols);
    Tensor out(Shape{h, w, 3});
    for (std::size_t y = 0; y < h; ++y) {
      const auto* row = bgr.ptr<unsigned char>(static_cast<int>(y));
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t c = 0; c < 3; ++c) out[(y * w + x) * 3 + c] = static_cast<float>(row[x * 3 + (2 - c)]) / 255.0f;
    }
    return out;
  }
  std::string name() const override { return "opencv"; }

 private:
  PpmDecoder ppm_;
};
#endif

}  // namespace

std::optional<Tensor> PpmDecoder::decode(const std::filesystem::path& path, std::string& reason) const {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    reason = "missing image " + path.string();
    return std::nullopt;
  }
  std::string magic, ws, hs, ms;
  if (!read_token(in, magic) || (magic != "P6" && magic != "P3") || !read_token(in, ws) || !read_token(in, hs) ||
      !read_token(in, ms)) {
    reason = "not a PPM image " + path.string();
    return std::nullopt;
  }
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(ws);
    h = std::stoul(hs);
    maxval = std::stoul(ms);
  } catch (const std::exception&) {
    reason = "bad PPM header in " + path.string();
    return std::nullopt;
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535 || w * h > (1u << 26)) {
    reason = "bad PPM header in " + path.string();
    return std::nullopt;
  }
  Tensor out(Shape{h, w, 3});
  const float scale = 1.0f / static_cast<float>(maxval);
  if (magic == "P6") {
    const std::size_t bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(w * h * 3 * bytes);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
      reason = "truncated PPM " + path.string();
      return std::nullopt;
    }
    for (std::size_t i = 0; i < w * h * 3; ++i) {
      const unsigned v = bytes == 2 ? (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
      out[i] = std::min(1.0f, static_cast<float>(v) * scale);
    }
  } else {
    std::string tok;
    for (std::size_t i = 0; i < w * h * 3; ++i) {
      if (!read_token(in, tok)) {
        reason = "truncated PPM " + path.string();
        return std::nullopt;
      }
      out[i] = std::min(1.0f, static_cast<float>(std::stoul(tok)) * scale);
    }
  }
  return out;
}

std::unique_ptr<ImageDecoder> default_image_decoder() {
#ifdef PRICEFUSION_HAVE_OPENCV
  return std::make_unique<OpenCvDecoder>();
#else
  return std::make_unique<PpmDecoder>();
#endif
}

bool opencv_available() noexcept {
#ifdef PRICEFUSION_HAVE_OPENCV
  return true;
#else
  return false;
#endif
}

Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width) {
  if (image.rank() != 3 || height == 0 || width == 0) {
    throw ShapeError("resize expects [H, W, C] and a positive target, got " + shape_string(image.shape()));
  }
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor out(Shape{height, width, c});
  const double sy = static_cast<double>(h) / static_cast<double>(height);
  const double sx = static_cast<double>(w) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        auto at = [&](std::size_t yy, std::size_t xx) { return static_cast<double>(image[(yy * w + xx) * c + ch]); };
        const double top = at(y0, x0) * (1.0 - tx) + at(y0, x1) * tx;
        const double bottom = at(y1, x0) * (1.0 - tx) + at(y1, x1) * tx;
        out[(y * width + x) * c + ch] = static_cast<float>(top * (1.0 - ty) + bottom * ty);
      }
    }
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) throw ShapeError("write_ppm expects [H, W, 3]");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << image.dim(1) << ' ' << image.dim(0) << "\n255\n";
  for (float v : image.data()) {
    const auto b = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    out.put(static_cast<char>(b));
  }
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace pricefusion
