#include "bmi/io/envelope.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "bmi/io/checksum.hpp"

namespace bmi::io {

namespace {

constexpr char kMagic[8] = {'B', 'M', 'I', 'M', 'D', 'L', '1', '\n'};

static_assert(std::endian::native == std::endian::little,
              "payloads are written in native order and pinned little-endian");

void write_all(std::ofstream& out, const void* data, std::size_t len,
               const std::string& path) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
  if (!out) {
    throw std::runtime_error("envelope: short write to " + path);
  }
}

void save_impl(const std::string& path, nlohmann::json header,
               const void* payload, std::size_t count, std::size_t elem_size,
               const char* dtype) {
  header["payload_dtype"] = dtype;
  header["payload_count"] = count;
  header["payload_crc32"] = crc32(payload, count * elem_size);
  const std::string header_bytes = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("envelope: cannot open for write: " + path);
  }
  write_all(out, kMagic, sizeof(kMagic), path);
  const std::uint64_t header_len = header_bytes.size();
  write_all(out, &header_len, sizeof(header_len), path);
  write_all(out, header_bytes.data(), header_bytes.size(), path);
  write_all(out, payload, count * elem_size, path);
  out.flush();
  if (!out) {
    throw std::runtime_error("envelope: flush failed for " + path);
  }
}

}  // namespace

void save_envelope_f64(const std::string& path, nlohmann::json header,
                       const std::vector<double>& payload) {
  save_impl(path, std::move(header), payload.data(), payload.size(),
            sizeof(double), "f64");
}

void save_envelope_f32(const std::string& path, nlohmann::json header,
                       const std::vector<float>& payload) {
  save_impl(path, std::move(header), payload.data(), payload.size(),
            sizeof(float), "f32");
}

Envelope load_envelope(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("envelope: cannot open " + path);
  }
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("envelope: bad magic in " + path);
  }
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || header_len > (1ull << 30)) {
    throw std::runtime_error("envelope: bad header length in " + path);
  }
  std::string header_bytes(header_len, '\0');
  in.read(header_bytes.data(), static_cast<std::streamsize>(header_len));
  if (!in) {
    throw std::runtime_error("envelope: truncated header in " + path);
  }

  Envelope env;
  env.header = nlohmann::json::parse(header_bytes);
  const std::string dtype = env.header.value("payload_dtype", "f64");
  const std::uint64_t count = env.header.value("payload_count", 0ull);
  const std::uint32_t want_crc = env.header.value("payload_crc32", 0u);
  if (count > (1ull << 31)) {
    throw std::runtime_error("envelope: implausible payload count in " + path);
  }

  std::uint32_t got_crc = 0;
  if (dtype == "f64") {
    env.payload_f64.resize(count);
    in.read(reinterpret_cast<char*>(env.payload_f64.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    got_crc = crc32(env.payload_f64.data(), count * sizeof(double));
  } else if (dtype == "f32") {
    env.payload_f32.resize(count);
    in.read(reinterpret_cast<char*>(env.payload_f32.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    got_crc = crc32(env.payload_f32.data(), count * sizeof(float));
  } else {
    throw std::runtime_error("envelope: unknown payload dtype '" + dtype +
                             "' in " + path);
  }
  if (!in) {
    throw std::runtime_error("envelope: truncated payload in " + path);
  }
  if (got_crc != want_crc) {
    throw std::runtime_error("envelope: payload checksum mismatch in " + path);
  }
  return env;
}

}  // namespace bmi::io
