#include "common/frame.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "common/error.hpp"

namespace tgpt {
namespace {

constexpr std::string_view kMagic = "TGFR1";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::string_view b, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[pos + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string encode_frames(const std::vector<Frame>& frames) {
  std::string out(kMagic);
  const int h = frames.empty() ? 0 : frames[0].height;
  const int w = frames.empty() ? 0 : frames[0].width;
  put_u32(out, static_cast<std::uint32_t>(frames.size()));
  put_u32(out, static_cast<std::uint32_t>(h));
  put_u32(out, static_cast<std::uint32_t>(w));
  out.reserve(out.size() + frames.size() * static_cast<std::size_t>(h) * w * 8);
  for (const Frame& f : frames) {
    if (f.width != w || f.height != h) fail(ErrorCode::kBadFrameShape, "frames differ in size");
    for (double v : f.pixels) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
  }
  return out;
}

std::vector<Frame> decode_frames(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 12 || bytes.substr(0, kMagic.size()) != kMagic) {
    fail(ErrorCode::kBadFrameShape, "not a TGFR1 frame file");
  }
  std::size_t pos = kMagic.size();
  const auto n = static_cast<std::size_t>(get_le(bytes, pos, 4));
  const auto h = static_cast<std::size_t>(get_le(bytes, pos + 4, 4));
  const auto w = static_cast<std::size_t>(get_le(bytes, pos + 8, 4));
  pos += 12;
  if (bytes.size() - pos != n * h * w * 8) fail(ErrorCode::kBadFrameShape, "frame file size mismatch");
  std::vector<Frame> frames;
  frames.reserve(n);
  for (std::size_t f = 0; f < n; ++f) {
    Frame fr(static_cast<int>(w), static_cast<int>(h));
    for (double& v : fr.pixels) {
      v = std::bit_cast<double>(get_le(bytes, pos, 8));
      pos += 8;
    }
    frames.push_back(std::move(fr));
  }
  return frames;
}

void write_frames(const std::string& path, const std::vector<Frame>& frames) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIo, "cannot write " + path);
  const std::string bytes = encode_frames(frames);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorCode::kIo, "write failed for " + path);
}

std::vector<Frame> read_frames(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_frames(ss.str());
}

}  // namespace tgpt
