#include "nklm/param_store.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "nklm/digest.hpp"
#include "nklm/errors.hpp"

namespace nklm {

Tensor2& ParamStore::add(const std::string& name, Tensor2 init, bool trainable) {
  if (entries_.count(name)) throw DomainError("ParamStore::add: duplicate name " + name);
  ParamEntry e;
  e.trainable = trainable;
  if (trainable) e.grad = Tensor2(init.rows(), init.cols(), 0.0);
  e.value = std::move(init);
  return entries_.emplace(name, std::move(e)).first->second.value;
}

ParamEntry& ParamStore::find(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw DomainError("ParamStore: unknown parameter " + name);
  return it->second;
}

const ParamEntry& ParamStore::find(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw DomainError("ParamStore: unknown parameter " + name);
  return it->second;
}

Tensor2& ParamStore::value(const std::string& name) { return find(name).value; }
const Tensor2& ParamStore::value(const std::string& name) const { return find(name).value; }

Tensor2& ParamStore::grad(const std::string& name) {
  ParamEntry& e = find(name);
  if (!e.trainable) throw DomainError("ParamStore::grad: " + name + " is frozen");
  return e.grad;
}

bool ParamStore::trainable(const std::string& name) const { return find(name).trainable; }

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_)
    if (e.trainable) e.grad.fill(0.0);
}

void ParamStore::scale_grads(double s) {
  for (auto& [name, e] : entries_)
    if (e.trainable) e.grad.scale(s);
}

std::size_t ParamStore::trainable_scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_)
    if (e.trainable) n += e.value.size();
  return n;
}

void sgd_clipped_step(ParamStore& params, double lr, double clip) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw DomainError("sgd_clipped_step: bad learning rate");
  if (!(clip > 0.0)) throw DomainError("sgd_clipped_step: bad clip");
  for (auto& [name, e] : params.entries()) {
    if (!e.trainable) continue;
    if (!e.grad.all_finite())
      throw TrainError("sgd_clipped_step: non-finite gradient in " + name);
    double* v = e.value.data();
    const double* g = e.grad.data();
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double gc = std::clamp(g[i], -clip, clip);
      v[i] -= lr * gc;
    }
    if (!e.value.all_finite())
      throw TrainError("sgd_clipped_step: non-finite parameter in " + name);
    e.grad.fill(0.0);
  }
}

std::string param_fingerprint(const ParamStore& params) {
  std::string bytes;
  for (const auto& [name, e] : params.entries()) {
    bytes += name;
    bytes.push_back('\0');
    const std::uint64_t dims[2] = {e.value.rows(), e.value.cols()};
    bytes.append(reinterpret_cast<const char*>(dims), sizeof(dims));
    bytes.push_back(e.trainable ? 1 : 0);
    bytes.append(reinterpret_cast<const char*>(e.value.data()),
                 e.value.size() * sizeof(double));
  }
  return sha256_hex(bytes);
}

}  // namespace nklm
