#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace bmi::io {

// Shared on-disk container for every model-like artifact (.bmimodel files,
// backbone weight archives, detector models):
//
//   bytes 0..7   magic "BMIMDL1\n"
//   bytes 8..15  little-endian u64, byte length of the JSON header
//   header       UTF-8 JSON; always carries "type", "payload_dtype"
//                ("f32"|"f64"), "payload_count" and "payload_crc32"
//   payload      packed little-endian floats
//
// The header checksum is verified on load; a mismatch is an error, never a
// silent truncation.
struct Envelope {
  nlohmann::json header;
  std::vector<double> payload_f64;  // used when payload_dtype == "f64"
  std::vector<float> payload_f32;   // used when payload_dtype == "f32"
};

void save_envelope_f64(const std::string& path, nlohmann::json header,
                       const std::vector<double>& payload);
void save_envelope_f32(const std::string& path, nlohmann::json header,
                       const std::vector<float>& payload);

Envelope load_envelope(const std::string& path);

}  // namespace bmi::io
