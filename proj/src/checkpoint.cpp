#include "kneeflex/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "kneeflex/error.hpp"

namespace kneeflex {

namespace {

constexpr char kMagic[4] = {'E', 'V', 'A', '1'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Network& net, const CheckpointMeta& meta) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  const auto names = net.parameter_names();
  const auto tensors = net.parameter_tensors();
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(names[t].size()));
    out.insert(out.end(), names[t].begin(), names[t].end());
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensors[t]->rank()));
    for (int d : tensors[t]->shape()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (float f : tensors[t]->values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  put_le<std::uint32_t>(out, meta.epoch);
  put_le<std::uint8_t>(out, meta.scenario);
  put_le<std::uint64_t>(out, meta.seed);
  return out;
}

LoadedCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const Network& architecture) {
  Reader r(bytes);
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("checkpoint: bad magic");

  LoadedCheckpoint ck{architecture.clone(), {}};
  auto params = ck.network.parameters();
  const auto count = r.get<std::uint32_t>();
  if (count != params.size())
    throw ShapeError("checkpoint holds " + std::to_string(count) + " tensors, network expects " +
                     std::to_string(params.size()));
  for (auto& p : params) {
    const auto name_len = r.get<std::uint16_t>();
    const auto name_bytes = r.take(name_len);
    const std::string name(name_bytes.begin(), name_bytes.end());
    if (name != p.name) throw ShapeError("checkpoint tensor '" + name + "' where '" + p.name + "' was expected");
    const auto rank = r.get<std::uint8_t>();
    std::vector<int> shape;
    for (int i = 0; i < rank; ++i) shape.push_back(static_cast<int>(r.get<std::uint32_t>()));
    if (shape != p.value->shape()) throw ShapeError("checkpoint tensor '" + name + "' has the wrong shape");
    for (float& f : p.value->values()) f = std::bit_cast<float>(r.get<std::uint32_t>());
  }
  ck.meta.epoch = r.get<std::uint32_t>();
  ck.meta.scenario = r.get<std::uint8_t>();
  ck.meta.seed = r.get<std::uint64_t>();
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const Network& net, const CheckpointMeta& meta, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(net, meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const Network& architecture) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes, architecture);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) { return load_checkpoint(path, build_eva()); }

}  // namespace kneeflex
