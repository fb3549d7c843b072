#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "jmee/autodiff.hpp"
#include "jmee/tensor.hpp"

namespace jmee {

struct Parameter {
  std::string name;
  Tensor value;
};

/// Named, ordered collection of learned tensors. Slot ids are insertion
/// order and stay stable for the lifetime of the store.
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor init);

  std::size_t slot(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Parameter& operator[](std::size_t slot) const { return params_[slot]; }
  Parameter& operator[](std::size_t slot) { return params_[slot]; }
  const Tensor& value(const std::string& name) const { return params_[slot(name)].value; }
  Tensor& value(const std::string& name) { return params_[slot(name)].value; }

  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;
  double squared_norm() const;

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  bool operator==(const ParamStore& other) const;

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Binds parameters of a store onto a tape on first use.
class ParamBinder {
 public:
  ParamBinder(ad::Tape& tape, const ParamStore& store)
      : tape_(tape), store_(store), bound_(store.size()) {}

  ad::Var operator()(std::size_t slot);
  ad::Tape& tape() const { return tape_; }
  const ParamStore& store() const { return store_; }

 private:
  ad::Tape& tape_;
  const ParamStore& store_;
  std::vector<ad::Var> bound_;
};

/// Per-parameter gradient accumulators aligned with a ParamStore.
class GradientBuffer {
 public:
  explicit GradientBuffer(const ParamStore& store);

  void accumulate(const ad::Tape& tape);
  void add(const GradientBuffer& other);
  void zero();
  Tensor& operator[](std::size_t slot) { return grads_[slot]; }
  const Tensor& operator[](std::size_t slot) const { return grads_[slot]; }
  std::size_t size() const { return grads_.size(); }
  bool all_finite() const;

 private:
  std::vector<Tensor> grads_;
};

/// Binary container: magic, free-form header text, then (name, shape, raw
/// little-endian doubles) per parameter in slot order.
void write_checkpoint(const std::filesystem::path& path, const std::string& header,
                      const ParamStore& params);
struct CheckpointData {
  std::string header;
  ParamStore params;
};
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace jmee
