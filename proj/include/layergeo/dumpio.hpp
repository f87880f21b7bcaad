#pragma once

// On-disk activation dumps: a JSON manifest plus one raw binary shard per
// (layer, file) and a single attention-mask shard.
//
// Shard layout (little-endian):
//   bytes  0..3   magic "DHAL"
//   bytes  4..23  u32 version (=1), dtype_code, n_seqs, seq_len, hidden_dim
//   bytes 24..    row-major payload [n_seqs, seq_len, hidden_dim]
// dtype_code: 0 = f16, 1 = f32, 2 = u8 (mask shards only, hidden_dim = 1).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace layergeo {

namespace fs = std::filesystem;

class DumpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DType : std::uint32_t { f16 = 0, f32 = 1, u8 = 2 };

inline constexpr std::uint32_t kShardVersion = 1;
inline constexpr std::size_t kHeaderBytes = 24;

std::size_t dtype_bytes(DType dtype);
std::string to_string(DType dtype);
DType dtype_from_string(const std::string& name);

struct ShardHeader {
  std::uint32_t version = kShardVersion;
  DType dtype = DType::f32;
  std::uint32_t n_seqs = 0;
  std::uint32_t seq_len = 0;
  std::uint32_t hidden_dim = 0;

  std::size_t payload_bytes() const;
};

/// Dense [n_seqs, seq_len, hidden] activations in working precision.
struct Tensor3 {
  std::size_t n_seqs = 0;
  std::size_t seq_len = 0;
  std::size_t hidden = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t n, std::size_t s, std::size_t h) : n_seqs(n), seq_len(s), hidden(h), data(n * s * h, 0.0) {}

  double& at(std::size_t i, std::size_t t, std::size_t k) { return data[(i * seq_len + t) * hidden + k]; }
  double at(std::size_t i, std::size_t t, std::size_t k) const { return data[(i * seq_len + t) * hidden + k]; }
  const double* token(std::size_t i, std::size_t t) const { return data.data() + (i * seq_len + t) * hidden; }
};

/// Attention mask [n_seqs, seq_len] with values in {0, 1}.
struct Mask {
  std::size_t n_seqs = 0;
  std::size_t seq_len = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(std::size_t n, std::size_t s, std::uint8_t fill = 1) : n_seqs(n), seq_len(s), data(n * s, fill) {}

  std::uint8_t& at(std::size_t i, std::size_t t) { return data[i * seq_len + t]; }
  std::uint8_t at(std::size_t i, std::size_t t) const { return data[i * seq_len + t]; }
  std::size_t valid_count(std::size_t i) const;
};

/// Round every value through IEEE half precision.
Tensor3 quantize_f16(const Tensor3& tensor);

/// Returns the number of bytes written.
std::size_t write_shard(const Tensor3& tensor, DType dtype, const fs::path& path);

struct Shard {
  ShardHeader header;
  Tensor3 tensor;
};

ShardHeader read_shard_header(const fs::path& path);
Shard read_shard(const fs::path& path);

std::size_t write_mask(const Mask& mask, const fs::path& path);
Mask read_mask(const fs::path& path);

struct ShardRef {
  int layer_index = 0;  // -1 is the embedding output
  fs::path file;
  std::size_t n_seqs = 0;
};

struct DumpManifest {
  std::string model_name;
  std::size_t num_layers = 0;
  std::size_t hidden_dim = 0;
  std::size_t seq_len = 0;
  DType dtype = DType::f16;
  std::vector<ShardRef> shards;
  fs::path mask_path;
  std::string tokenizer_note;
  fs::path base_dir;  // directory relative paths resolve against

  fs::path resolve(const fs::path& p) const;
  /// Distinct layer indices present, ascending (embedding first).
  std::vector<int> layers() const;
  std::size_t sequences_for_layer(int layer) const;
};

/// Accepts either a manifest file or a dump directory containing manifest.json.
DumpManifest load_manifest(const fs::path& path);

/// Structural checks plus shard headers on disk; throws DumpError.
void validate_manifest(const DumpManifest& manifest);

void save_manifest(const DumpManifest& manifest, const fs::path& path);

/// Shards of one layer concatenated along the sequence axis in manifest order.
Tensor3 load_layer(const DumpManifest& manifest, int layer);
Mask load_mask(const DumpManifest& manifest);

}  // namespace layergeo
