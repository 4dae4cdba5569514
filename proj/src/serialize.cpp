#include "fedaudit/serialize.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace fedaudit {

namespace {

constexpr char kMagic[4] = {'F', 'L', 'P', 'D'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  auto bits = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.insert(out.end(), bits.begin(), bits.end());
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  template <typename T>
  T get(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T))
      throw std::runtime_error(std::string("flpd: truncated while reading ") + what + " at byte " +
                               std::to_string(pos_));
    std::array<std::uint8_t, sizeof(T)> bits;
    std::memcpy(bits.data(), bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    return std::bit_cast<T>(bits);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_;
};

}  // namespace

std::vector<std::uint8_t> serialize_params(const ModelParams& params) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kFlpdVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& t : params.tensors) {
    if (t.values.size() != Tensor::element_count(t.shape))
      throw std::invalid_argument("flpd: tensor shape does not match its value count");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : t.values) put<double>(out, v);
  }
  return out;
}

ModelParams deserialize_params(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw std::runtime_error("flpd: bad magic");
  Reader in(bytes, 4);
  const auto version = in.get<std::uint32_t>("version");
  if (version != kFlpdVersion) throw std::runtime_error("flpd: unsupported version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>("tensor count");
  ModelParams params;
  for (std::uint32_t t = 0; t < count; ++t) {
    Tensor tensor;
    const auto rank = in.get<std::uint32_t>("rank");
    if (rank > in.remaining() / 4) throw std::runtime_error("flpd: truncated shape of tensor " + std::to_string(t));
    for (std::uint32_t r = 0; r < rank; ++r) tensor.shape.push_back(in.get<std::uint32_t>("dimension"));
    std::size_t n = 1;
    for (auto d : tensor.shape)
      if (d != 0 && n > in.remaining() / 8 / d) n = in.remaining() / 8 + 1;  // cannot fit; reported below
      else n *= d;
    if (n > in.remaining() / 8) throw std::runtime_error("flpd: truncated values of tensor " + std::to_string(t));
    tensor.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) tensor.values.push_back(in.get<double>("value"));
    params.tensors.push_back(std::move(tensor));
  }
  if (in.remaining() != 0) throw std::runtime_error("flpd: " + std::to_string(in.remaining()) + " trailing bytes");
  return params;
}

void save_params(const ModelParams& params, const std::filesystem::path& path) {
  const auto bytes = serialize_params(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_params(bytes);
}

}  // namespace fedaudit
