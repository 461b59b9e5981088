#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "graphmerge/common.hpp"

namespace graphmerge {

/// Ordered collection of named dense tensors plus a free-form metadata
/// string. On disk: magic, version, count, metadata, then per tensor
/// (name, rows, cols, row-major f64 data), and a trailing CRC-32.
class TensorArchive {
 public:
  void add(std::string name, Matrix value);
  const Matrix& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  const std::vector<std::pair<std::string, Matrix>>& entries() const { return entries_; }
  std::string metadata;

  std::string serialize() const;
  static TensorArchive deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, Matrix>> entries_;
};

}  // namespace graphmerge
