#include "csifuse/csib.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace csifuse {
namespace {

static_assert(std::endian::native == std::endian::little, "CSIB codec assumes a little-endian host");

constexpr char kMagic[4] = {'C', 'S', 'I', 'B'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
         std::uint32_t{p[3]} << 24;
}

}  // namespace

std::vector<std::uint8_t> encode_csib(std::span<const LabeledSample> samples, const CsibShape& shape) {
  CsibShape s = shape;
  if (!samples.empty()) {
    const auto& first = samples.front();
    s.channels = static_cast<std::uint32_t>(first.channels.size());
    s.subcarriers = static_cast<std::uint32_t>(first.subcarriers());
    s.packets = static_cast<std::uint32_t>(first.packets());
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& smp = samples[i];
    bool ok = smp.channels.size() == s.channels;
    for (const auto& ch : smp.channels) {
      ok = ok && ch.subcarriers() == s.subcarriers && ch.packets() == s.packets &&
           ch.imag.rows() == ch.real.rows() && ch.imag.cols() == ch.real.cols();
    }
    if (!ok) throw ShapeError("write_csib: sample " + std::to_string(i) + " differs in shape from sample 0");
  }

  std::vector<std::uint8_t> out;
  out.reserve(kCsibHeaderBytes + samples.size() * csib_record_bytes(s));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kCsibVersion);
  put_u32(out, s.subcarriers);
  put_u32(out, s.packets);
  put_u32(out, s.channels);
  put_u32(out, static_cast<std::uint32_t>(samples.size()));
  for (const auto& smp : samples) {
    out.push_back(smp.label);
    out.push_back(static_cast<std::uint8_t>(smp.velocity));
    for (const auto& ch : smp.channels) {
      for (Eigen::Index k = 0; k < ch.subcarriers(); ++k) {
        for (Eigen::Index t = 0; t < ch.packets(); ++t) {
          put_f32(out, ch.real(k, t));
          put_f32(out, ch.imag(k, t));
        }
      }
    }
  }
  return out;
}

CsibShape decode_csib_shape(std::span<const std::uint8_t> bytes, std::uint32_t* n_samples) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("CSIB: bad magic bytes");
  }
  if (bytes.size() < kCsibHeaderBytes) {
    throw CorruptionError("CSIB: truncated header, expected " + std::to_string(kCsibHeaderBytes) +
                          " bytes, got " + std::to_string(bytes.size()));
  }
  if (bytes[4] != kCsibVersion) {
    throw VersionError("CSIB: unsupported version " + std::to_string(bytes[4]));
  }
  CsibShape s;
  s.subcarriers = get_u32(bytes.data() + 5);
  s.packets = get_u32(bytes.data() + 9);
  s.channels = get_u32(bytes.data() + 13);
  if (n_samples != nullptr) *n_samples = get_u32(bytes.data() + 17);
  return s;
}

std::vector<LabeledSample> decode_csib(std::span<const std::uint8_t> bytes) {
  std::uint32_t n = 0;
  const CsibShape s = decode_csib_shape(bytes, &n);
  const std::size_t record = csib_record_bytes(s);
  const std::size_t expected = kCsibHeaderBytes + std::size_t{n} * record;
  if (bytes.size() != expected) {
    throw CorruptionError("CSIB: payload length mismatch, expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(bytes.size()));
  }
  std::vector<LabeledSample> samples(n);
  const std::uint8_t* p = bytes.data() + kCsibHeaderBytes;
  for (auto& smp : samples) {
    smp.label = *p++;
    smp.velocity = static_cast<Velocity>(*p++);
    smp.channels.reserve(s.channels);
    for (std::uint32_t c = 0; c < s.channels; ++c) {
      ComplexCsi<float> ch(s.subcarriers, s.packets);
      for (std::uint32_t k = 0; k < s.subcarriers; ++k) {
        for (std::uint32_t t = 0; t < s.packets; ++t) {
          ch.real(k, t) = std::bit_cast<float>(get_u32(p));
          ch.imag(k, t) = std::bit_cast<float>(get_u32(p + 4));
          p += 8;
        }
      }
      smp.channels.push_back(std::move(ch));
    }
  }
  return samples;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::size_t write_csib(std::span<const LabeledSample> samples, const std::filesystem::path& path,
                       const CsibShape& shape) {
  const auto bytes = encode_csib(samples, shape);
  write_file_bytes(path, bytes);
  return bytes.size();
}

std::vector<LabeledSample> read_csib(const std::filesystem::path& path) {
  return decode_csib(read_file_bytes(path));
}

}  // namespace csifuse
