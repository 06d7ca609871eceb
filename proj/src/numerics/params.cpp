#include "numerics/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tgpt::nn {

Tensor& ParameterSet::push(const std::string& name, Tensor t) {
  if (contains(name)) fail(ErrorCode::kInvalidArgument, "duplicate parameter " + name);
  names_.push_back(name);
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

Tensor& ParameterSet::add_uniform(const std::string& name, Shape shape, std::size_t fan_in,
                                  std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(numel(shape));
  for (double& x : v) x = (2.0 * unit_uniform(rng) - 1.0) * bound;
  return push(name, Tensor::from(std::move(shape), std::move(v), true));
}

Tensor& ParameterSet::add_zeros(const std::string& name, Shape shape) {
  return push(name, Tensor::zeros(std::move(shape), true));
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& n : names_)
    if (n == name) return true;
  return false;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return tensors_[i];
  fail(ErrorCode::kInvalidArgument, "unknown parameter " + name);
}

Tensor& ParameterSet::get(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

void ParameterSet::assign_from(const std::vector<std::pair<std::string, Tensor>>& other) {
  if (other.size() != names_.size()) {
    fail(ErrorCode::kBadCheckpoint, "checkpoint holds " + std::to_string(other.size()) +
                                        " tensors, model has " + std::to_string(names_.size()));
  }
  for (const auto& [name, t] : other) {
    Tensor& dst = get(name);
    if (dst.shape() != t.shape()) {
      fail(ErrorCode::kBadCheckpoint, "shape mismatch for " + name + ": " +
                                          shape_str(dst.shape()) + " vs " + shape_str(t.shape()));
    }
    std::copy(t.values().begin(), t.values().end(), dst.mutable_values().begin());
  }
}

namespace {

constexpr std::string_view kMagic = "TGPT1";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}
  bool done() const { return pos_ == b_.size(); }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(b_.substr(pos_, n));
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) fail(ErrorCode::kBadCheckpoint, "truncated checkpoint");
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ParameterSet& params) {
  std::string out(kMagic);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.names()[i];
    const Tensor& t = params.tensors()[i];
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (double v : t.values()) put_f64(out, v);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor>> decode_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) {
    fail(ErrorCode::kBadCheckpoint, "unknown checkpoint header");
  }
  Reader r(bytes.substr(kMagic.size()));
  std::vector<std::pair<std::string, Tensor>> out;
  while (!r.done()) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len);
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) fail(ErrorCode::kBadCheckpoint, "bad rank for " + name);
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t e = r.u32();
      if (e == 0) fail(ErrorCode::kBadCheckpoint, "zero extent for " + name);
      shape.push_back(e);
    }
    const std::size_t n = numel(shape);
    if (n > (std::size_t{1} << 28)) fail(ErrorCode::kBadCheckpoint, "oversized tensor " + name);
    std::vector<double> v(n);
    for (double& x : v) x = r.f64();
    out.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(v)));
  }
  return out;
}

void save_checkpoint(const ParameterSet& params, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIo, "cannot write " + path);
  const std::string bytes = encode_checkpoint(params);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorCode::kIo, "write failed for " + path);
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace tgpt::nn
