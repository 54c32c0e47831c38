#pragma once

#include <map>
#include <string>

#include "nklm/tensor.hpp"

namespace nklm {

// One named parameter tensor. Frozen entries (trainable == false) carry no
// gradient and are never touched by the optimizer.
struct ParamEntry {
  Tensor2 value;
  Tensor2 grad;  // empty for frozen entries
  bool trainable = true;
};

// Named parameter collection. std::map keeps iteration order deterministic,
// which matters for serialization and for the optimizer's update order.
class ParamStore {
 public:
  Tensor2& add(const std::string& name, Tensor2 init, bool trainable = true);

  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  Tensor2& value(const std::string& name);
  const Tensor2& value(const std::string& name) const;
  // Throws DomainError for frozen entries.
  Tensor2& grad(const std::string& name);
  bool trainable(const std::string& name) const;

  void zero_grads();
  // Multiply every gradient by s (e.g. 1/token_count before a step).
  void scale_grads(double s);

  std::map<std::string, ParamEntry>& entries() { return entries_; }
  const std::map<std::string, ParamEntry>& entries() const { return entries_; }

  std::size_t trainable_scalar_count() const;

 private:
  ParamEntry& find(const std::string& name);
  const ParamEntry& find(const std::string& name) const;

  std::map<std::string, ParamEntry> entries_;
};

// In-place SGD step with elementwise gradient clipping to [-clip, clip].
// Gradients are zeroed afterwards. Throws TrainError (naming the tensor) if a
// parameter or gradient is not finite.
void sgd_clipped_step(ParamStore& params, double lr, double clip = 5.0);

// SHA-256 over all entries (names, shapes, trainable flags, raw values).
// Bitwise-identical stores produce identical fingerprints.
std::string param_fingerprint(const ParamStore& params);

}  // namespace nklm
