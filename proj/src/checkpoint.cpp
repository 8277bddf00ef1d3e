#include "csifuse/nn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "csifuse/csib.hpp"

namespace csifuse::nn {
namespace {

constexpr char kMagic[4] = {'G', 'F', 'B', 'W'};

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{bytes_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw CorruptionError("GFBW: truncated at byte " + std::to_string(pos_) + ", need " + std::to_string(n) +
                            " more of " + std::to_string(bytes_.size()));
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::vector<NamedTensor> tensors) {
  std::sort(tensors.begin(), tensors.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(kCheckpointVersion);
  put_le(out, tensors.size(), 4);
  for (const auto& t : tensors) {
    if (t.name.size() > 0xFFFF) throw FormatError("GFBW: tensor name too long");
    std::size_t count = 1;
    for (auto d : t.dims) count *= d;
    if (count != t.data.size()) throw ShapeError("GFBW: tensor '" + t.name + "' payload does not match dims");
    put_le(out, t.name.size(), 2);
    out.insert(out.end(), t.name.begin(), t.name.end());
    out.push_back(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put_le(out, d, 4);
    for (float f : t.data) put_le(out, std::bit_cast<std::uint32_t>(f), 4);
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("GFBW: bad magic bytes");
  Reader r(bytes.subspan(4));
  const auto version = r.le(1);
  if (version != kCheckpointVersion) throw VersionError("GFBW: unsupported version " + std::to_string(version));
  const auto count = r.le(4);
  std::vector<NamedTensor> tensors;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str(static_cast<std::size_t>(r.le(2)));
    const auto rank = r.le(1);
    std::size_t n = 1;
    for (std::uint64_t d = 0; d < rank; ++d) {
      t.dims.push_back(static_cast<std::uint32_t>(r.le(4)));
      n *= t.dims.back();
    }
    t.data.resize(n);
    for (auto& f : t.data) f = std::bit_cast<float>(static_cast<std::uint32_t>(r.le(4)));
    tensors.push_back(std::move(t));
  }
  if (!r.done()) throw CorruptionError("GFBW: trailing bytes after last tensor");
  return tensors;
}

void save_checkpoint(const std::filesystem::path& path, std::vector<NamedTensor> tensors) {
  write_file_bytes(path, encode_checkpoint(std::move(tensors)));
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

}  // namespace csifuse::nn
