#include "graphmerge/tensor_io.hpp"

#include "graphmerge/binary_io.hpp"

namespace graphmerge {
namespace {
constexpr std::string_view kMagic{"GMTENSR\0", 8};
constexpr std::uint32_t kArchiveVersion = 1;
}  // namespace

void TensorArchive::add(std::string name, Matrix value) {
  if (contains(name)) throw ValidationError("duplicate tensor name '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(value));
}

bool TensorArchive::contains(std::string_view name) const {
  for (const auto& [n, _] : entries_)
    if (n == name) return true;
  return false;
}

const Matrix& TensorArchive::get(std::string_view name) const {
  for (const auto& [n, m] : entries_)
    if (n == name) return m;
  throw ValidationError("tensor '" + std::string(name) + "' missing from archive");
}

std::string TensorArchive::serialize() const {
  ByteWriter out;
  out.bytes(kMagic);
  out.u32(kArchiveVersion);
  out.u32(static_cast<std::uint32_t>(entries_.size()));
  out.str(metadata);
  for (const auto& [name, m] : entries_) {
    out.str(name);
    out.u64(static_cast<std::uint64_t>(m.rows()));
    out.u64(static_cast<std::uint64_t>(m.cols()));
    const double* p = m.data();
    for (Eigen::Index k = 0; k < m.size(); ++k) out.f64(p[k]);
  }
  out.u32(crc32_of(out.buffer()));
  return std::move(out.buffer());
}

TensorArchive TensorArchive::deserialize(std::string_view bytes) {
  if (bytes.size() < 4) throw ValidationError("truncated tensor archive");
  ByteReader trailer(bytes.substr(bytes.size() - 4), "tensor archive");
  const auto body = bytes.substr(0, bytes.size() - 4);
  ByteReader in(body, "tensor archive");
  if (in.bytes(kMagic.size()) != kMagic) throw ValidationError("not a tensor archive (bad magic)");
  const auto version = in.u32();
  if (version != kArchiveVersion) throw ValidationError("tensor archive version " + std::to_string(version) + " is not supported");
  if (crc32_of(body) != trailer.u32()) throw ValidationError("tensor archive checksum mismatch");
  const auto count = in.u32();
  TensorArchive out;
  out.metadata = in.str();
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = in.str();
    const auto rows = in.u64();
    const auto cols = in.u64();
    if (in.remaining() / 8 < rows * cols) throw ValidationError("truncated tensor archive");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    double* p = m.data();
    for (Eigen::Index k = 0; k < m.size(); ++k) p[k] = in.f64();
    out.add(std::move(name), std::move(m));
  }
  if (in.remaining() != 0) throw ValidationError("tensor archive has trailing bytes");
  return out;
}

void TensorArchive::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

TensorArchive TensorArchive::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace graphmerge
