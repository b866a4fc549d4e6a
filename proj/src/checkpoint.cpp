#include "iris/checkpoint.hpp"

#include "iris/binary_io.hpp"

#include <algorithm>

namespace iris {

namespace {
constexpr char kMagic[4] = {'I', 'R', 'C', '1'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void Checkpoint::put(NamedTensor t) {
  std::size_t expected = 1;
  for (auto d : t.shape) expected *= d;
  if (expected != t.data.size()) throw std::invalid_argument("tensor " + t.name + ": data size does not match shape");
  for (auto& existing : tensors_)
    if (existing.name == t.name) {
      existing = std::move(t);
      return;
    }
  tensors_.push_back(std::move(t));
}

void Checkpoint::put_matrix(const std::string& name, const Mat& m) {
  NamedTensor t;
  t.name = name;
  t.shape = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.data.resize(static_cast<std::size_t>(m.size()));
  // Row-major payload.
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data[k++] = static_cast<float>(m(r, c));
  put(std::move(t));
}

void Checkpoint::put_vector(const std::string& name, const Vec& v) {
  NamedTensor t;
  t.name = name;
  t.shape = {static_cast<std::uint32_t>(v.size())};
  t.data.assign(v.data(), v.data() + v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) t.data[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
  put(std::move(t));
}

bool Checkpoint::contains(const std::string& name) const {
  return std::any_of(tensors_.begin(), tensors_.end(), [&](const NamedTensor& t) { return t.name == name; });
}

const NamedTensor& Checkpoint::get(const std::string& name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return t;
  throw FormatError("checkpoint has no tensor named " + name);
}

Mat Checkpoint::get_matrix(const std::string& name) const {
  const NamedTensor& t = get(name);
  if (t.shape.size() != 2) throw FormatError("tensor " + name + " is not a matrix");
  Mat m(t.shape[0], t.shape[1]);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.data[k++];
  return m;
}

Vec Checkpoint::get_vector(const std::string& name) const {
  const NamedTensor& t = get(name);
  if (t.shape.size() != 1) throw FormatError("tensor " + name + " is not a vector");
  Vec v(t.shape[0]);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = t.data[static_cast<std::size_t>(i)];
  return v;
}

void export_params(const nn::ParamStore& store, const std::string& prefix, Checkpoint& ckpt) {
  for (const auto& p : store.params()) ckpt.put_matrix(prefix + p.name, p.value);
}

void import_params(nn::ParamStore& store, const std::string& prefix, const Checkpoint& ckpt) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    Mat m = ckpt.get_matrix(prefix + store[i].name);
    if (m.rows() != store[i].value.rows() || m.cols() != store[i].value.cols())
      throw FormatError("shape mismatch for " + prefix + store[i].name);
    store[i].value = std::move(m);
  }
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  io::ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kVersion);
  w.u64(ckpt.config_hash);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors().size()));
  for (const auto& t : ckpt.tensors()) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.u32(d);
    for (float f : t.data) w.f32(f);
  }
  return w.str();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  io::ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != std::string_view(kMagic, 4)) throw FormatError("bad checkpoint magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.config_hash = r.u64();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.bytes(r.u32());
    const std::uint32_t rank = r.u32();
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.shape.push_back(r.u32());
      n *= t.shape.back();
    }
    if (r.remaining() / 4 < n) throw FormatError("truncated payload in tensor " + t.name);
    t.data.resize(n);
    for (auto& f : t.data) f = r.f32();
    ckpt.put(std::move(t));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint payload");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

std::uint64_t checkpoint_hash(const Checkpoint& ckpt) { return fnv1a64(encode_checkpoint(ckpt)); }

}  // namespace iris
