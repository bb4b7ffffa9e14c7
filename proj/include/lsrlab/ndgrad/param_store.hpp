#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "lsrlab/ndgrad/tape.hpp"
#include "lsrlab/ndgrad/tensor.hpp"

namespace lsrlab::ndgrad {

/// Named parameters with their Adam first/second moments.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor m;
    Tensor v;
  };

  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get_mut(const std::string& name);
  const Entry& entry(const std::string& name) const;

  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }
  std::size_t parameter_count() const;

  std::uint64_t step_count = 0;

  /// Binds every parameter on the tape (frozen prefixes bind as constants).
  void bind(Tape& tape) const;
  Var var(Tape& tape, const std::string& name) const { return tape.parameter(name, get(name)); }

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::map<std::string, Entry> entries_;
};

/// True when values, moments and step counts match bit for bit.
bool bitwise_equal(const ParamStore& a, const ParamStore& b);
bool bitwise_equal(const Tensor& a, const Tensor& b);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update. `grads` must name exactly the store's
/// parameters (KeyMismatch otherwise). Increments step_count.
void adam_step(ParamStore& store, const Gradients& grads, const AdamConfig& cfg);

// Checkpoint: "NDGRADCK" magic, u32 version, u64 step_count, u64 entry count,
// then per entry: u32 name length, name bytes, u32 rank, u64 dims,
// value/m/v payloads as little-endian IEEE-754 float64.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const ParamStore& store);
ParamStore read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const ParamStore& store);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace lsrlab::ndgrad
