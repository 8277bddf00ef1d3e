#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "csifuse/csi.hpp"

namespace csifuse {

/// Dimensions shared by every sample in a CSIB file.
struct CsibShape {
  std::uint32_t subcarriers = 0;
  std::uint32_t packets = 0;
  std::uint32_t channels = 1;
};

inline constexpr std::uint8_t kCsibVersion = 1;
inline constexpr std::size_t kCsibHeaderBytes = 21;

/// Bytes one sample occupies in the payload.
inline std::size_t csib_record_bytes(const CsibShape& shape) {
  return 2 + std::size_t{shape.channels} * shape.subcarriers * shape.packets * 2 * sizeof(float);
}

/// Encodes samples as CSIB v1 (little-endian). `shape` is only consulted
/// when `samples` is empty; otherwise it is taken from the first sample.
std::vector<std::uint8_t> encode_csib(std::span<const LabeledSample> samples,
                                      const CsibShape& shape = {});

/// Decodes a CSIB v1 buffer. Label and velocity bytes are passed through
/// unchecked; see ingest_external for range validation.
std::vector<LabeledSample> decode_csib(std::span<const std::uint8_t> bytes);

/// Reads only the header of a CSIB buffer.
CsibShape decode_csib_shape(std::span<const std::uint8_t> bytes, std::uint32_t* n_samples = nullptr);

std::size_t write_csib(std::span<const LabeledSample> samples, const std::filesystem::path& path,
                       const CsibShape& shape = {});
std::vector<LabeledSample> read_csib(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace csifuse
