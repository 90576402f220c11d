#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "wsc/bags.hpp"
#include "wsc/error.hpp"

namespace wsc {

// Feature-store file, little-endian throughout:
//   magic "WSCF", version u8 = 1, dim u32, num_bags u32;
//   per bag: bag_id u32, label u8, has_mask u8, n_instances u32,
//            n_instances * dim float32 row-major,
//            and if has_mask, n_instances bytes of {0,1}.

namespace detail {

inline void put_u8(std::string& out, std::uint8_t x) { out.push_back(static_cast<char>(x)); }

inline void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float x) {
  std::uint32_t bits;
  std::memcpy(&bits, &x, 4);
  put_u32(out, bits);
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, const std::string& what) : b_(bytes), what_(what) {}

  std::uint8_t u8() {
    need(1, "u8");
    return static_cast<std::uint8_t>(b_[off_++]);
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i)
      x |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(b_[off_ + i])) << (8 * i);
    off_ += 4;
    return x;
  }
  float f32() {
    std::uint32_t bits = u32();
    float x;
    std::memcpy(&x, &bits, 4);
    return x;
  }
  void raw(void* dst, std::size_t n, const char* field) {
    need(n, field);
    std::memcpy(dst, b_.data() + off_, n);
    off_ += n;
  }
  std::size_t offset() const { return off_; }
  std::size_t remaining() const { return b_.size() - off_; }

  void need(std::size_t n, const char* field) {
    if (off_ + n > b_.size())
      fail(errc::bad_format, what_ + ": truncated at byte offset " + std::to_string(off_) +
                                 ": expected " + std::to_string(n) + " bytes for " + field +
                                 ", got " + std::to_string(b_.size() - off_));
  }

 private:
  const std::string& b_;
  std::string what_;
  std::size_t off_ = 0;
};

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, "cannot open '" + path + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io, "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(errc::io, "short write to '" + path + "'");
}

}  // namespace detail

inline constexpr char kFeatureStoreMagic[4] = {'W', 'S', 'C', 'F'};
inline constexpr std::uint8_t kFeatureStoreVersion = 1;

inline std::string encode_feature_store(const std::vector<Bag>& bags, std::size_t dim) {
  std::string out;
  out.append(kFeatureStoreMagic, 4);
  detail::put_u8(out, kFeatureStoreVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(dim));
  detail::put_u32(out, static_cast<std::uint32_t>(bags.size()));
  for (const Bag& bag : bags) {
    if (bag.instances.cols() != dim)
      fail(errc::shape_mismatch, "feature store: bag " + std::to_string(bag.id) + " has width " +
                                     std::to_string(bag.instances.cols()) + ", store has " +
                                     std::to_string(dim));
    const bool has_mask = !bag.witness_mask.empty();
    detail::put_u32(out, bag.id);
    detail::put_u8(out, static_cast<std::uint8_t>(bag.label));
    detail::put_u8(out, has_mask ? 1 : 0);
    detail::put_u32(out, static_cast<std::uint32_t>(bag.size()));
    for (double x : bag.instances.v) detail::put_f32(out, static_cast<float>(x));
    if (has_mask)
      for (std::uint8_t m : bag.witness_mask) detail::put_u8(out, m);
  }
  return out;
}

inline void write_feature_store(const std::string& path, const std::vector<Bag>& bags,
                                std::size_t dim) {
  detail::write_file_bytes(path, encode_feature_store(bags, dim));
}

inline std::vector<Bag> decode_feature_store(const std::string& bytes, std::size_t* dim_out = nullptr) {
  detail::ByteReader r(bytes, "feature store");
  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::memcmp(magic, kFeatureStoreMagic, 4) != 0)
    fail(errc::bad_format, "feature store: bad magic at byte offset 0");
  const std::uint8_t version = r.u8();
  if (version != kFeatureStoreVersion)
    fail(errc::bad_format, "feature store: unsupported version " + std::to_string(version));
  const std::uint32_t dim = r.u32();
  const std::uint32_t num_bags = r.u32();
  if (dim == 0) fail(errc::bad_format, "feature store: zero dimension");

  std::vector<Bag> bags;
  bags.reserve(num_bags);
  for (std::uint32_t k = 0; k < num_bags; ++k) {
    Bag bag;
    bag.id = r.u32();
    bag.label = r.u8();
    const bool has_mask = r.u8() != 0;
    const std::uint32_t n = r.u32();
    if (n == 0) fail(errc::bad_format, "feature store: empty bag " + std::to_string(bag.id));
    std::vector<double> vals;
    vals.reserve(static_cast<std::size_t>(n) * dim);
    r.need(static_cast<std::size_t>(n) * dim * 4, "instance blob");
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * dim; ++i)
      vals.push_back(static_cast<double>(r.f32()));
    bag.instances = Tensor({n, dim}, std::move(vals));
    if (has_mask) {
      bag.witness_mask.resize(n);
      r.raw(bag.witness_mask.data(), n, "witness mask");
    }
    bags.push_back(std::move(bag));
  }
  if (r.remaining() != 0)
    fail(errc::bad_format, "feature store: " + std::to_string(r.remaining()) +
                               " trailing bytes after last bag");
  if (dim_out) *dim_out = dim;
  return bags;
}

inline std::vector<Bag> read_feature_store(const std::string& path, std::size_t* dim_out = nullptr) {
  return decode_feature_store(detail::read_file_bytes(path), dim_out);
}

}  // namespace wsc
