#pragma once

// Binary checkpoint, all integers and floats little-endian:
//   "QDVA" | u32 version | config block | u64 vocabulary hash | f64 tensors
// Config block: u64 d, h_dim, z_dim, o_w, max_len, epochs, batch_size,
// kl_anneal_steps, seed; f64 learning_rate. Tensors follow
// VaeParams::for_each order, column-major; their shapes follow from the
// config, so the file size is fully determined by the header.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "qclean/error.hpp"
#include "qclean/textenc.hpp"
#include "qclean/vae/params.hpp"

namespace qclean::vae {

inline constexpr std::array<char, 4> kCheckpointMagic = {'Q', 'D', 'V', 'A'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  VaeParams params;
  VaeConfig config;
  std::uint64_t vocab_hash = 0;
};

namespace detail {

class ByteWriter {
 public:
  void bytes(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<char>& buf, std::string path) : buf_(buf), path_(std::move(path)) {}

  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw Error(ErrorKind::io, path_ + ": checkpoint truncated (size mismatch)");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  const std::vector<char>& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<char> serialize_checkpoint(const VaeParams& params, const VaeConfig& c, std::uint64_t vocab_hash) {
  detail::ByteWriter w;
  w.bytes(kCheckpointMagic.data(), kCheckpointMagic.size());
  w.u32(kCheckpointVersion);
  for (std::uint64_t v : {c.d, c.h_dim, c.z_dim, c.o_w, c.max_len, c.epochs, c.batch_size, c.kl_anneal_steps})
    w.u64(v);
  w.u64(c.seed);
  w.f64(c.learning_rate);
  w.u64(vocab_hash);
  params.for_each([&](const std::string&, const auto& t) {
    for (Eigen::Index k = 0; k < t.size(); ++k) w.f64(t.data()[k]);
  });
  return w.data();
}

inline Checkpoint deserialize_checkpoint(const std::vector<char>& bytes, const std::string& path = "<memory>") {
  if (bytes.size() < kCheckpointMagic.size() || !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin()))
    throw Error(ErrorKind::io, path + ": not a checkpoint (bad magic)");
  std::vector<char> body(bytes.begin() + 4, bytes.end());
  detail::ByteReader r(body, path);
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw Error(ErrorKind::io, path + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  VaeConfig& c = ck.config;
  c.d = r.u64();
  c.h_dim = r.u64();
  c.z_dim = r.u64();
  c.o_w = r.u64();
  c.max_len = r.u64();
  c.epochs = r.u64();
  c.batch_size = r.u64();
  c.kl_anneal_steps = r.u64();
  c.seed = r.u64();
  c.learning_rate = r.f64();
  ck.vocab_hash = r.u64();
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::io, path + ": " + e.what());
  }
  // Guard the allocation against a corrupt header before sizing tensors.
  for (std::size_t dim : {c.d, c.h_dim, c.z_dim, c.o_w})
    if (dim > (std::size_t{1} << 24)) throw Error(ErrorKind::io, path + ": implausible tensor dimension in header");
  const std::size_t in_gru = 3 * c.h_dim * (c.d + c.h_dim + 1);
  const std::size_t expected = c.o_w * c.d + 3 * in_gru + 2 * c.z_dim * (c.h_dim + 1) + c.h_dim * (c.z_dim + 1) +
                               c.o_w * (c.h_dim + 1);
  if (r.remaining() != expected * 8)
    throw Error(ErrorKind::io, path + ": checkpoint size mismatch (expected " + std::to_string(expected * 8) +
                                   " tensor bytes, found " + std::to_string(r.remaining()) + ")");
  ck.params = VaeParams::zeros(c);
  ck.params.for_each([&](const std::string&, auto& t) {
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = r.f64();
  });
  return ck;
}

inline void save_checkpoint(const VaeParams& params, const VaeConfig& config, std::uint64_t vocab_hash,
                            const std::string& path) {
  auto bytes = serialize_checkpoint(params, config, vocab_hash);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write failure on " + path);
}

/// Loads a checkpoint; if `vocab` is given its content hash must match the
/// one recorded at training time.
inline Checkpoint load_checkpoint(const std::string& path, const Vocabulary* vocab = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Checkpoint ck = deserialize_checkpoint(bytes, path);
  if (vocab != nullptr && (vocab->content_hash() != ck.vocab_hash || vocab->size() != ck.config.o_w))
    throw Error(ErrorKind::model_mismatch, "model/vocabulary mismatch: " + path);
  return ck;
}

}  // namespace qclean::vae
