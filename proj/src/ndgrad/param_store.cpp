#include "lsrlab/ndgrad/param_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "lsrlab/error.hpp"

namespace lsrlab::ndgrad {

void ParamStore::add(const std::string& name, Tensor value) {
  Entry e{value, Tensor(value.shape, 0.0), Tensor(value.shape, 0.0)};
  e.value = std::move(value);
  entries_[name] = std::move(e);
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error(ErrorCode::KeyMismatch, "no parameter named " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const { return entry(name).value; }

Tensor& ParamStore::get_mut(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error(ErrorCode::KeyMismatch, "no parameter named " + name);
  return it->second.value;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += e.value.size();
  return n;
}

void ParamStore::bind(Tape& tape) const {
  for (const auto& [name, e] : entries_) tape.parameter(name, e.value);
}

bool operator==(const ParamStore& a, const ParamStore& b) { return bitwise_equal(a, b); }

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

bool bitwise_equal(const ParamStore& a, const ParamStore& b) {
  if (a.step_count != b.step_count || a.entries().size() != b.entries().size()) return false;
  auto ib = b.entries().begin();
  for (const auto& [name, e] : a.entries()) {
    if (name != ib->first) return false;
    if (!bitwise_equal(e.value, ib->second.value) || !bitwise_equal(e.m, ib->second.m) ||
        !bitwise_equal(e.v, ib->second.v)) {
      return false;
    }
    ++ib;
  }
  return true;
}

void adam_step(ParamStore& store, const Gradients& grads, const AdamConfig& cfg) {
  if (grads.size() != store.entries().size()) {
    throw Error(ErrorCode::KeyMismatch, std::to_string(grads.size()) + " gradients for " +
                                            std::to_string(store.entries().size()) + " parameters");
  }
  for (const auto& [name, g] : grads) {
    if (!store.contains(name)) throw Error(ErrorCode::KeyMismatch, "gradient for unknown parameter " + name);
    if (!g.same_shape(store.get(name))) {
      throw Error(ErrorCode::ShapeMismatch, "gradient shape for " + name);
    }
  }
  store.step_count += 1;
  const double t = static_cast<double>(store.step_count);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, e] : store.entries()) {
    const Tensor& g = grads.at(name);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = g.data[i];
      e.m.data[i] = cfg.beta1 * e.m.data[i] + (1.0 - cfg.beta1) * gi;
      e.v.data[i] = cfg.beta2 * e.v.data[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = e.m.data[i] / bc1;
      const double v_hat = e.v.data[i] / bc2;
      e.value.data[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

namespace {

constexpr char kMagic[8] = {'N', 'D', 'G', 'R', 'A', 'D', 'C', 'K'};

template <typename U>
void put_le(std::ostream& out, U value) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get_le(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw Error(ErrorCode::BadCheckpoint, "truncated checkpoint");
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

void put_payload(std::ostream& out, const Tensor& t) {
  for (double x : t.data) put_le(out, std::bit_cast<std::uint64_t>(x));
}

void get_payload(std::istream& in, Tensor& t) {
  for (double& x : t.data) x = std::bit_cast<double>(get_le<std::uint64_t>(in));
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParamStore& store) {
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, store.step_count);
  put_le<std::uint64_t>(out, store.entries().size());
  for (const auto& [name, e] : store.entries()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t d : e.value.shape) put_le<std::uint64_t>(out, d);
    put_payload(out, e.value);
    put_payload(out, e.m);
    put_payload(out, e.v);
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing checkpoint");
}

ParamStore read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::BadCheckpoint, "missing checkpoint magic");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::BadCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  }
  ParamStore store;
  store.step_count = get_le<std::uint64_t>(in);
  const auto count = get_le<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = get_le<std::uint32_t>(in);
    if (len > 4096) throw Error(ErrorCode::BadCheckpoint, "implausible name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw Error(ErrorCode::BadCheckpoint, "truncated name");
    const auto rank = get_le<std::uint32_t>(in);
    if (rank > 8) throw Error(ErrorCode::BadCheckpoint, "implausible rank");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get_le<std::uint64_t>(in));
    if (shape_product(shape) > (std::size_t{1} << 32)) {
      throw Error(ErrorCode::BadCheckpoint, "implausible tensor size");
    }
    Tensor value(shape), m(shape), v(shape);
    get_payload(in, value);
    get_payload(in, m);
    get_payload(in, v);
    store.add(name, std::move(value));
    auto& e = store.entries()[name];
    e.m = std::move(m);
    e.v = std::move(v);
  }
  return store;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_checkpoint(out, store);
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace lsrlab::ndgrad
