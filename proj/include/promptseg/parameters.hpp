// Copyright 2026 The promptseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "promptseg/autograd.hpp"
#include "promptseg/errors.hpp"

namespace promptseg {

enum class ParamGroup { kEncoderBackbone, kPromptEncoder, kAdapters, kMaskDecoder };

inline constexpr ParamGroup kAllGroups[] = {ParamGroup::kEncoderBackbone,
                                            ParamGroup::kPromptEncoder, ParamGroup::kAdapters,
                                            ParamGroup::kMaskDecoder};

std::string to_string(ParamGroup group);
/// Throws ConfigError for unknown names.
ParamGroup group_from_string(std::string_view name);

template <typename Scalar>
struct Parameter {
  std::string name;
  ParamGroup group;
  Mat<Scalar> value;
  // Fixed buffers (e.g. random Fourier features) are grouped like any other
  // entry but never updated by an optimizer.
  bool buffer = false;
};

/// Ordered, name-addressable registry of every model tensor.
template <typename Scalar>
class ParameterSet {
 public:
  using Matrix = Mat<Scalar>;

  Parameter<Scalar>& add(std::string name, ParamGroup group, Matrix value, bool buffer = false) {
    if (index_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.push_back({std::move(name), group, std::move(value), buffer});
    return entries_.back();
  }

  bool contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

  std::size_t index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
    return it->second;
  }

  const Parameter<Scalar>& operator[](std::size_t i) const { return entries_[i]; }
  Parameter<Scalar>& operator[](std::size_t i) { return entries_[i]; }
  const Parameter<Scalar>& at(std::string_view name) const { return entries_[index_of(name)]; }
  Parameter<Scalar>& at(std::string_view name) { return entries_[index_of(name)]; }

  std::size_t size() const { return entries_.size(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : entries_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  template <typename To>
  ParameterSet<To> cast() const {
    ParameterSet<To> out;
    for (const auto& p : entries_) out.add(p.name, p.group, p.value.template cast<To>(), p.buffer);
    return out;
  }

  bool operator==(const ParameterSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& a = entries_[i];
      const auto& b = other.entries_[i];
      if (a.name != b.name || a.group != b.group || a.buffer != b.buffer) return false;
      if (a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) return false;
      if (!std::equal(a.value.data(), a.value.data() + a.value.size(), b.value.data()))
        return false;
    }
    return true;
  }

 private:
  std::vector<Parameter<Scalar>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Which parameter groups the optimizer may touch.
struct FreezePolicy {
  std::set<ParamGroup> trainable_groups;
  std::set<ParamGroup> frozen_groups;

  /// Adapters and mask decoder learn; backbone and prompt encoder are fixed.
  static FreezePolicy adapter_finetune();
  static FreezePolicy all_trainable();

  /// Throws ConfigError if the two sets overlap or do not cover all groups.
  void validate() const;
  bool trainable(ParamGroup g) const { return trainable_groups.count(g) != 0; }
  bool operator==(const FreezePolicy&) const = default;
};

struct ParameterPartition {
  std::vector<std::string> trainable;
  std::vector<std::string> frozen;
};

/// Splits every registered parameter into trainable and frozen names.
/// Buffers always land in the frozen set.
template <typename Scalar>
ParameterPartition partition_parameters(const ParameterSet<Scalar>& params,
                                        const FreezePolicy& policy) {
  policy.validate();
  ParameterPartition out;
  for (const auto& p : params) {
    if (policy.trainable(p.group) && !p.buffer)
      out.trainable.push_back(p.name);
    else
      out.frozen.push_back(p.name);
  }
  return out;
}

template <typename Scalar>
std::vector<char> trainable_mask(const ParameterSet<Scalar>& params, const FreezePolicy& policy) {
  policy.validate();
  std::vector<char> mask(params.size(), 0);
  for (std::size_t i = 0; i < params.size(); ++i)
    mask[i] = policy.trainable(params[i].group) && !params[i].buffer;
  return mask;
}

/// Attaches parameters to a graph on first use for one forward pass.
template <typename Scalar>
class Binding {
 public:
  Binding(Graph<Scalar>& graph, const ParameterSet<Scalar>& params,
          std::vector<char> requires_grad = {})
      : graph_(graph), params_(params), grad_(std::move(requires_grad)),
        vars_(params.size(), Var{}) {
    if (grad_.empty()) grad_.assign(params.size(), 0);
  }

  Var operator()(std::string_view name) {
    const std::size_t i = params_.index_of(name);
    if (!vars_[i].valid()) vars_[i] = graph_.leaf(params_[i].value, grad_[i] != 0);
    return vars_[i];
  }

  Graph<Scalar>& graph() { return graph_; }
  const ParameterSet<Scalar>& params() const { return params_; }

  /// Gradient of parameter i after backward; zero if it did not participate.
  Mat<Scalar> gradient(std::size_t i) const {
    const auto& v = params_[i].value;
    if (vars_[i].valid()) {
      if (const auto* g = graph_.grad(vars_[i])) return *g;
    }
    return Mat<Scalar>::Zero(v.rows(), v.cols());
  }

 private:
  Graph<Scalar>& graph_;
  const ParameterSet<Scalar>& params_;
  std::vector<char> grad_;
  std::vector<Var> vars_;
};

/// Initialization helpers; PyTorch-style defaults.
template <typename Scalar>
struct Initializer {
  std::mt19937_64& rng;

  Mat<Scalar> uniform_fan_in(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Mat<Scalar> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
    return m;
  }
  Mat<Scalar> normal(Eigen::Index rows, Eigen::Index cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Mat<Scalar> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
    return m;
  }
  static Mat<Scalar> ones(Eigen::Index rows, Eigen::Index cols) {
    return Mat<Scalar>::Ones(rows, cols);
  }
  static Mat<Scalar> zeros(Eigen::Index rows, Eigen::Index cols) {
    return Mat<Scalar>::Zero(rows, cols);
  }
};

/// Registers `prefix.weight` (in x out) and `prefix.bias` (1 x out).
template <typename Scalar>
void add_linear(ParameterSet<Scalar>& ps, Initializer<Scalar>& init, const std::string& prefix,
                ParamGroup group, Eigen::Index in, Eigen::Index out, bool bias = true) {
  ps.add(prefix + ".weight", group, init.uniform_fan_in(in, out, in));
  if (bias) ps.add(prefix + ".bias", group, init.uniform_fan_in(1, out, in));
}

template <typename Scalar>
void add_layer_norm(ParameterSet<Scalar>& ps, const std::string& prefix, ParamGroup group,
                    Eigen::Index dim) {
  ps.add(prefix + ".weight", group, Initializer<Scalar>::ones(1, dim));
  ps.add(prefix + ".bias", group, Initializer<Scalar>::zeros(1, dim));
}

}  // namespace promptseg
