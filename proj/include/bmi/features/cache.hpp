#pragma once

#include <map>
#include <optional>
#include <shared_mutex>
#include <string>

#include "bmi/features/backbones.hpp"

namespace bmi::features {

// On-disk feature cache, one pair of files per backbone:
//   <backbone_id>.feat      append-only little-endian float32 payload
//   <backbone_id>.idx.json  { sample_id: {offset, dim, crc32} }
// Entries round-trip bitwise; a checksum mismatch on read degrades to a
// cache miss with a warning instead of corrupting downstream results.
class FeatureCache {
 public:
  FeatureCache(const std::string& cache_dir, const std::string& backbone_id);

  void put(const std::string& sample_id, const FeatureVector& features);
  std::optional<FeatureVector> get(const std::string& sample_id) const;

  std::size_t size() const;
  const std::string& backbone_id() const { return backbone_id_; }

 private:
  struct Entry {
    std::uint64_t offset = 0;
    int dim = 0;
    std::uint32_t crc32 = 0;
  };

  void write_index_locked() const;

  std::string backbone_id_;
  std::string feat_path_;
  std::string index_path_;
  std::map<std::string, Entry> index_;
  std::uint64_t end_offset_ = 0;  // floats, not bytes
  mutable std::shared_mutex mutex_;
};

}  // namespace bmi::features
