#include "layergeo/dumpio.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <set>
#include <utility>

namespace layergeo {

static_assert(std::endian::native == std::endian::little, "shard format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'H', 'A', 'L'};

void put_u32(std::vector<char>& buf, std::uint32_t v) {
  char bytes[4];
  std::memcpy(bytes, &v, 4);
  buf.insert(buf.end(), bytes, bytes + 4);
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v == 0 || v > 0xFFFFFFFFull) throw DumpError(std::string("invalid dimension: ") + what);
  return static_cast<std::uint32_t>(v);
}

std::vector<char> encode_header(const ShardHeader& h) {
  std::vector<char> buf(kMagic, kMagic + 4);
  put_u32(buf, h.version);
  put_u32(buf, static_cast<std::uint32_t>(h.dtype));
  put_u32(buf, h.n_seqs);
  put_u32(buf, h.seq_len);
  put_u32(buf, h.hidden_dim);
  return buf;
}

ShardHeader decode_header(const char* raw, const fs::path& path) {
  if (std::memcmp(raw, kMagic, 4) != 0) throw DumpError("bad magic in " + path.string());
  ShardHeader h;
  h.version = get_u32(raw + 4);
  if (h.version != kShardVersion) {
    throw DumpError("version mismatch in " + path.string() + ": " + std::to_string(h.version));
  }
  const std::uint32_t code = get_u32(raw + 8);
  if (code > 2) throw DumpError("unknown dtype code " + std::to_string(code) + " in " + path.string());
  h.dtype = static_cast<DType>(code);
  h.n_seqs = get_u32(raw + 12);
  h.seq_len = get_u32(raw + 16);
  h.hidden_dim = get_u32(raw + 20);
  if (h.n_seqs == 0 || h.seq_len == 0 || h.hidden_dim == 0) {
    throw DumpError("zero dimension in header of " + path.string());
  }
  return h;
}

void write_file(const fs::path& path, const std::vector<char>& header, const char* payload,
                std::size_t payload_bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DumpError("cannot open for writing: " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(payload, static_cast<std::streamsize>(payload_bytes));
  if (!out) throw DumpError("write failed: " + path.string());
}

std::vector<char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DumpError("cannot open shard: " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<char> buf(size);
  in.seekg(0);
  in.read(buf.data(), static_cast<std::streamsize>(size));
  if (!in) throw DumpError("read failed: " + path.string());
  return buf;
}

ShardHeader parse_and_check_size(const std::vector<char>& buf, const fs::path& path) {
  if (buf.size() < kHeaderBytes) throw DumpError("truncated header in " + path.string());
  ShardHeader h = decode_header(buf.data(), path);
  const std::size_t expected = kHeaderBytes + h.payload_bytes();
  if (buf.size() < expected) {
    throw DumpError("truncated payload in " + path.string() + ": expected " + std::to_string(expected) +
                    " bytes, found " + std::to_string(buf.size()));
  }
  if (buf.size() > expected) throw DumpError("trailing bytes in " + path.string());
  return h;
}

}  // namespace

std::size_t dtype_bytes(DType dtype) {
  switch (dtype) {
    case DType::f16: return 2;
    case DType::f32: return 4;
    case DType::u8: return 1;
  }
  throw DumpError("unknown dtype");
}

std::string to_string(DType dtype) {
  switch (dtype) {
    case DType::f16: return "f16";
    case DType::f32: return "f32";
    case DType::u8: return "u8";
  }
  throw DumpError("unknown dtype");
}

DType dtype_from_string(const std::string& name) {
  if (name == "f16") return DType::f16;
  if (name == "f32") return DType::f32;
  throw DumpError("unsupported activation dtype: " + name);
}

std::size_t ShardHeader::payload_bytes() const {
  return static_cast<std::size_t>(n_seqs) * seq_len * hidden_dim * dtype_bytes(dtype);
}

std::size_t Mask::valid_count(std::size_t i) const {
  std::size_t c = 0;
  for (std::size_t t = 0; t < seq_len; ++t) c += at(i, t);
  return c;
}

Tensor3 quantize_f16(const Tensor3& tensor) {
  Tensor3 out = tensor;
  for (double& v : out.data) v = static_cast<double>(static_cast<float>(Eigen::half(static_cast<float>(v))));
  return out;
}

std::size_t write_shard(const Tensor3& tensor, DType dtype, const fs::path& path) {
  if (dtype == DType::u8) throw DumpError("activation shards must be f16 or f32");
  ShardHeader h;
  h.dtype = dtype;
  h.n_seqs = checked_u32(tensor.n_seqs, "n_seqs");
  h.seq_len = checked_u32(tensor.seq_len, "seq_len");
  h.hidden_dim = checked_u32(tensor.hidden, "hidden_dim");
  if (tensor.data.size() != tensor.n_seqs * tensor.seq_len * tensor.hidden) {
    throw DumpError("tensor data size does not match its shape");
  }

  std::vector<char> payload(h.payload_bytes());
  if (dtype == DType::f32) {
    for (std::size_t i = 0; i < tensor.data.size(); ++i) {
      const auto f = static_cast<float>(tensor.data[i]);
      if (!std::isfinite(f)) throw DumpError("non-finite value in tensor at flat index " + std::to_string(i));
      std::memcpy(payload.data() + 4 * i, &f, 4);
    }
  } else {
    for (std::size_t i = 0; i < tensor.data.size(); ++i) {
      const Eigen::half hv(static_cast<float>(tensor.data[i]));
      if (!(Eigen::numext::isfinite)(hv)) {
        throw DumpError("value not representable in f16 at flat index " + std::to_string(i));
      }
      const auto bits = Eigen::numext::bit_cast<std::uint16_t>(hv);
      std::memcpy(payload.data() + 2 * i, &bits, 2);
    }
  }
  write_file(path, encode_header(h), payload.data(), payload.size());
  return kHeaderBytes + payload.size();
}

ShardHeader read_shard_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DumpError("cannot open shard: " + path.string());
  char raw[kHeaderBytes];
  in.read(raw, kHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kHeaderBytes)) {
    throw DumpError("truncated header in " + path.string());
  }
  ShardHeader h = decode_header(raw, path);
  const auto size = fs::file_size(path);
  if (size < kHeaderBytes + h.payload_bytes()) throw DumpError("truncated payload in " + path.string());
  return h;
}

Shard read_shard(const fs::path& path) {
  const std::vector<char> buf = read_file(path);
  Shard shard;
  shard.header = parse_and_check_size(buf, path);
  const ShardHeader& h = shard.header;
  if (h.dtype == DType::u8) throw DumpError("expected an activation shard, found a mask: " + path.string());
  shard.tensor = Tensor3(h.n_seqs, h.seq_len, h.hidden_dim);
  const char* payload = buf.data() + kHeaderBytes;
  auto& data = shard.tensor.data;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (h.dtype == DType::f32) {
      float f;
      std::memcpy(&f, payload + 4 * i, 4);
      data[i] = f;
    } else {
      std::uint16_t bits;
      std::memcpy(&bits, payload + 2 * i, 2);
      data[i] = static_cast<float>(Eigen::numext::bit_cast<Eigen::half>(bits));
    }
    if (!std::isfinite(data[i])) {
      throw DumpError("non-finite payload value in " + path.string() + " at flat index " + std::to_string(i));
    }
  }
  return shard;
}

std::size_t write_mask(const Mask& mask, const fs::path& path) {
  ShardHeader h;
  h.dtype = DType::u8;
  h.n_seqs = checked_u32(mask.n_seqs, "n_seqs");
  h.seq_len = checked_u32(mask.seq_len, "seq_len");
  h.hidden_dim = 1;
  for (std::size_t i = 0; i < mask.n_seqs; ++i) {
    for (std::size_t t = 0; t < mask.seq_len; ++t) {
      if (mask.at(i, t) > 1) throw DumpError("mask values must be 0 or 1");
    }
    if (mask.valid_count(i) == 0) throw DumpError("sequence " + std::to_string(i) + " has no valid position");
  }
  write_file(path, encode_header(h), reinterpret_cast<const char*>(mask.data.data()), mask.data.size());
  return kHeaderBytes + mask.data.size();
}

Mask read_mask(const fs::path& path) {
  const std::vector<char> buf = read_file(path);
  const ShardHeader h = parse_and_check_size(buf, path);
  if (h.dtype != DType::u8 || h.hidden_dim != 1) throw DumpError("not a mask shard: " + path.string());
  Mask mask(h.n_seqs, h.seq_len, 0);
  std::memcpy(mask.data.data(), buf.data() + kHeaderBytes, mask.data.size());
  for (std::size_t i = 0; i < mask.n_seqs; ++i) {
    for (std::size_t t = 0; t < mask.seq_len; ++t) {
      if (mask.at(i, t) > 1) throw DumpError("mask value outside {0,1} in " + path.string());
    }
    if (mask.valid_count(i) == 0) {
      throw DumpError("sequence " + std::to_string(i) + " has no valid position in " + path.string());
    }
  }
  return mask;
}

fs::path DumpManifest::resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

std::vector<int> DumpManifest::layers() const {
  std::set<int> s;
  for (const auto& shard : shards) s.insert(shard.layer_index);
  return {s.begin(), s.end()};
}

std::size_t DumpManifest::sequences_for_layer(int layer) const {
  std::size_t n = 0;
  for (const auto& shard : shards) {
    if (shard.layer_index == layer) n += shard.n_seqs;
  }
  return n;
}

DumpManifest load_manifest(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "manifest.json" : path;
  std::ifstream in(file);
  if (!in) throw DumpError("cannot open manifest: " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DumpError("malformed manifest JSON: " + std::string(e.what()));
  }

  DumpManifest m;
  try {
    m.model_name = j.at("model_name").get<std::string>();
    m.num_layers = j.at("num_layers").get<std::size_t>();
    m.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    m.seq_len = j.at("seq_len").get<std::size_t>();
    m.dtype = dtype_from_string(j.at("dtype").get<std::string>());
    for (const auto& s : j.at("shards")) {
      ShardRef ref;
      ref.layer_index = s.at("layer_index").get<int>();
      ref.file = s.at("file_path").get<std::string>();
      ref.n_seqs = s.at("n_seqs").get<std::size_t>();
      m.shards.push_back(ref);
    }
    m.mask_path = j.at("mask_path").get<std::string>();
    m.tokenizer_note = j.value("tokenizer_note", "");
  } catch (const nlohmann::json::exception& e) {
    throw DumpError("manifest field error: " + std::string(e.what()));
  }
  m.base_dir = file.parent_path();
  validate_manifest(m);
  return m;
}

void validate_manifest(const DumpManifest& m) {
  if (m.shards.empty()) throw DumpError("manifest lists no shards");
  if (m.hidden_dim == 0 || m.seq_len == 0) throw DumpError("manifest dimensions must be positive");

  std::set<std::pair<int, std::string>> seen;
  for (const auto& s : m.shards) {
    if (s.layer_index < -1 || s.layer_index >= static_cast<int>(m.num_layers)) {
      throw DumpError("layer index out of range: " + std::to_string(s.layer_index));
    }
    if (!seen.emplace(s.layer_index, s.file.lexically_normal().string()).second) {
      throw DumpError("duplicate layer " + std::to_string(s.layer_index) + " shard " + s.file.string());
    }
    const fs::path p = m.resolve(s.file);
    if (!fs::exists(p)) throw DumpError("missing shard file: " + p.string());
    const ShardHeader h = read_shard_header(p);
    if (h.dtype != m.dtype) throw DumpError("dtype mismatch in " + p.string());
    if (h.hidden_dim != m.hidden_dim || h.seq_len != m.seq_len) {
      throw DumpError("inconsistent dims in " + p.string());
    }
    if (h.n_seqs != s.n_seqs) throw DumpError("n_seqs mismatch between manifest and " + p.string());
  }

  const fs::path mask_file = m.resolve(m.mask_path);
  if (!fs::exists(mask_file)) throw DumpError("missing mask file: " + mask_file.string());
  const ShardHeader mh = read_shard_header(mask_file);
  if (mh.dtype != DType::u8 || mh.hidden_dim != 1) throw DumpError("mask shard has wrong dtype or width");
  if (mh.seq_len != m.seq_len) throw DumpError("mask seq_len differs from manifest");
  for (int layer : m.layers()) {
    if (m.sequences_for_layer(layer) != mh.n_seqs) {
      throw DumpError("mask n_seqs (" + std::to_string(mh.n_seqs) + ") differs from layer " +
                      std::to_string(layer) + " n_seqs (" + std::to_string(m.sequences_for_layer(layer)) + ")");
    }
  }
}

void save_manifest(const DumpManifest& m, const fs::path& path) {
  nlohmann::ordered_json j;
  j["model_name"] = m.model_name;
  j["num_layers"] = m.num_layers;
  j["hidden_dim"] = m.hidden_dim;
  j["seq_len"] = m.seq_len;
  j["dtype"] = to_string(m.dtype);
  j["shards"] = nlohmann::ordered_json::array();
  for (const auto& s : m.shards) {
    j["shards"].push_back({{"layer_index", s.layer_index}, {"file_path", s.file.generic_string()}, {"n_seqs", s.n_seqs}});
  }
  j["mask_path"] = m.mask_path.generic_string();
  j["tokenizer_note"] = m.tokenizer_note;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DumpError("cannot write manifest: " + path.string());
  out << j.dump(2) << "\n";
}

Tensor3 load_layer(const DumpManifest& m, int layer) {
  std::vector<Tensor3> parts;
  for (const auto& s : m.shards) {
    if (s.layer_index == layer) parts.push_back(read_shard(m.resolve(s.file)).tensor);
  }
  if (parts.empty()) throw DumpError("layer not present in dump: " + std::to_string(layer));
  if (parts.size() == 1) return std::move(parts.front());
  std::size_t n = 0;
  for (const auto& p : parts) n += p.n_seqs;
  Tensor3 out(n, m.seq_len, m.hidden_dim);
  auto it = out.data.begin();
  for (const auto& p : parts) it = std::copy(p.data.begin(), p.data.end(), it);
  return out;
}

Mask load_mask(const DumpManifest& m) { return read_mask(m.resolve(m.mask_path)); }

}  // namespace layergeo
