#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tgpt {

// Row-major grayscale image with values in [0, 1].
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  Frame() = default;
  Frame(int w, int h, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const Frame&, const Frame&) = default;
};

// Frame stack file: "TGFR1", u32 n_frames, u32 height, u32 width, then every
// frame's pixels as little-endian f64 in row-major order.
std::string encode_frames(const std::vector<Frame>& frames);
std::vector<Frame> decode_frames(std::string_view bytes);
void write_frames(const std::string& path, const std::vector<Frame>& frames);
std::vector<Frame> read_frames(const std::string& path);

}  // namespace tgpt
