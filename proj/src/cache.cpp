#include "bmi/features/cache.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>

#include <json.hpp>

#include "bmi/io/checksum.hpp"

namespace bmi::features {

namespace fs = std::filesystem;

FeatureCache::FeatureCache(const std::string& cache_dir, const std::string& backbone_id)
    : backbone_id_(backbone_id) {
  fs::create_directories(cache_dir);
  feat_path_ = (fs::path(cache_dir) / (backbone_id + ".feat")).string();
  index_path_ = (fs::path(cache_dir) / (backbone_id + ".idx.json")).string();

  if (fs::exists(index_path_)) {
    std::ifstream in(index_path_);
    if (!in) {
      throw std::runtime_error("feature cache: cannot read index " + index_path_);
    }
    nlohmann::json doc = nlohmann::json::parse(in);
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      Entry e;
      e.offset = it.value().at("offset").get<std::uint64_t>();
      e.dim = it.value().at("dim").get<int>();
      e.crc32 = it.value().at("crc32").get<std::uint32_t>();
      end_offset_ = std::max(end_offset_, e.offset + static_cast<std::uint64_t>(e.dim));
      index_[it.key()] = e;
    }
  }
}

void FeatureCache::put(const std::string& sample_id, const FeatureVector& features) {
  if (features.backbone_id != backbone_id_) {
    throw std::invalid_argument("feature cache: backbone mismatch, cache is for '" +
                                backbone_id_ + "', vector from '" + features.backbone_id + "'");
  }
  std::unique_lock lock(mutex_);
  std::ofstream out(feat_path_, std::ios::binary | std::ios::app);
  if (!out) {
    throw std::runtime_error("feature cache: cannot append to " + feat_path_);
  }
  const auto bytes = static_cast<std::streamsize>(sizeof(float) * features.values.size());
  out.write(reinterpret_cast<const char*>(features.values.data()), bytes);
  out.flush();
  if (!out) {
    throw std::runtime_error("feature cache: short write to " + feat_path_);
  }
  Entry e;
  e.offset = end_offset_;
  e.dim = features.dim();
  e.crc32 = io::crc32(features.values.data(), sizeof(float) * features.values.size());
  index_[sample_id] = e;
  end_offset_ += static_cast<std::uint64_t>(e.dim);
  write_index_locked();
}

std::optional<FeatureVector> FeatureCache::get(const std::string& sample_id) const {
  std::shared_lock lock(mutex_);
  const auto it = index_.find(sample_id);
  if (it == index_.end()) {
    return std::nullopt;
  }
  std::ifstream in(feat_path_, std::ios::binary);
  if (!in) {
    std::cerr << "feature cache: payload file missing, treating '" << sample_id
              << "' as a miss\n";
    return std::nullopt;
  }
  in.seekg(static_cast<std::streamoff>(it->second.offset * sizeof(float)));
  FeatureVector fv;
  fv.backbone_id = backbone_id_;
  fv.values.resize(it->second.dim);
  in.read(reinterpret_cast<char*>(fv.values.data()),
          static_cast<std::streamsize>(sizeof(float) * it->second.dim));
  if (!in) {
    std::cerr << "feature cache: truncated payload for '" << sample_id
              << "', treating as a miss\n";
    return std::nullopt;
  }
  const std::uint32_t crc = io::crc32(fv.values.data(), sizeof(float) * it->second.dim);
  if (crc != it->second.crc32) {
    std::cerr << "feature cache: checksum mismatch for '" << sample_id
              << "', treating as a miss\n";
    return std::nullopt;
  }
  return fv;
}

std::size_t FeatureCache::size() const {
  std::shared_lock lock(mutex_);
  return index_.size();
}

void FeatureCache::write_index_locked() const {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [id, e] : index_) {
    doc[id] = {{"offset", e.offset}, {"dim", e.dim}, {"crc32", e.crc32}};
  }
  const std::string tmp = index_path_ + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) {
      throw std::runtime_error("feature cache: cannot write index " + tmp);
    }
    out << doc.dump();
  }
  fs::rename(tmp, index_path_);
}

}  // namespace bmi::features
