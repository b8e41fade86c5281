#include "cfmdd/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <zlib.h>

#include "cfmdd/errors.hpp"

namespace cfmdd {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes little-endian");

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, p_, sizeof(T));
    p_ += sizeof(T);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p_), n);
    p_ += n;
    return s;
  }
  void doubles(double* out, std::size_t n) {
    need(n * sizeof(double));
    std::memcpy(out, p_, n * sizeof(double));
    p_ += n * sizeof(double);
  }
  bool done() const { return p_ == end_; }

 private:
  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end_ - p_) < n) throw ArchiveError("archive truncated");
  }
  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

std::uint32_t crc(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

}  // namespace

std::vector<std::uint8_t> encode_archive(const ModelParams& params) {
  std::vector<std::uint8_t> out(kArchiveMagic, kArchiveMagic + 4);
  put<std::uint32_t>(out, kArchiveVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.names()[i];
    const auto& t = params.tensor(i);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint8_t>(out, params.trainable(i) ? 1 : 0);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (const auto d : t.shape()) put<std::uint64_t>(out, d);
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(t.data());
    out.insert(out.end(), bytes, bytes + t.size() * sizeof(double));
  }
  put<std::uint32_t>(out, crc(out.data(), out.size()));
  return out;
}

ModelParams decode_archive(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kArchiveMagic, 4) != 0) {
    throw ArchiveError("not a model archive (bad magic)");
  }
  if (bytes.size() < 16) throw ChecksumError("archive truncated");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (crc(bytes.data(), body) != stored) throw ChecksumError("archive checksum mismatch");
  Reader r(bytes.data() + 4, body - 4);
  const auto version = r.get<std::uint32_t>();
  if (version != kArchiveVersion) {
    throw ArchiveError("unsupported archive version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>();
  ModelParams p;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>();
    const std::string name = r.str(len);
    const bool trainable = r.get<std::uint8_t>() != 0;
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw ArchiveError("tensor " + name + " has implausible rank");
    std::vector<std::size_t> shape;
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
      n *= shape.back();
    }
    ad::Tensor t(shape, 0.0);
    r.doubles(t.data(), n);
    if (p.has(name)) throw ArchiveError("duplicate tensor " + name);
    p.add(name, std::move(t), trainable);
  }
  if (!r.done()) throw ArchiveError("trailing bytes in archive");
  return p;
}

void save_model(const ModelParams& params, const std::string& path) {
  const auto bytes = encode_archive(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to " + path + " failed");
}

ModelParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model archive " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_archive(bytes);
}

ModelParams load_model(const std::string& path, const HgnnConfig& config) {
  ModelParams p = load_model(path);
  const ModelParams ref = init_params(config, 0);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const auto& name = ref.names()[i];
    if (!p.has(name)) throw ShapeError("archive lacks tensor " + name);
    const auto& got = p.at(name);
    const auto& want = ref.tensor(i);
    if (name == "meta.dims" ? got != want : !got.same_shape(want)) {
      throw ShapeError("tensor " + name + " has shape " + got.shape_str() + ", expected " +
                       want.shape_str());
    }
  }
  if (p.size() != ref.size()) throw ShapeError("archive holds tensors unknown to this model");
  return p;
}

}  // namespace cfmdd
