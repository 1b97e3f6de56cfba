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

#include "promptseg/autograd.hpp"

#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "promptseg/objective.hpp"

namespace promptseg {
namespace {

using M = Mat<double>;
using Builder = std::function<Var(Graph<double>&, const std::vector<Var>&)>;

M random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  M m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Reduces an arbitrary output to <out, R> so every output entry matters.
double evaluate(const Builder& build, const std::vector<M>& inputs, const M& proj,
                std::vector<M>* grads) {
  Graph<double> g;
  std::vector<Var> leaves;
  for (const auto& x : inputs) leaves.push_back(g.leaf(x, true));
  Var out = build(g, leaves);
  const M& v = g.value(out);
  EXPECT_EQ(v.rows(), proj.rows());
  EXPECT_EQ(v.cols(), proj.cols());
  M s(1, 1);
  s(0, 0) = v.cwiseProduct(proj).sum();
  Var loss = g.record(s, true, [out, proj](Graph<double>& g, const M& go) {
    g.accumulate(out, proj * go(0, 0));
  });
  if (grads) {
    g.backward(loss);
    grads->clear();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      const M* gr = g.grad(leaves[i]);
      grads->push_back(gr ? *gr : M::Zero(inputs[i].rows(), inputs[i].cols()));
    }
  }
  return s(0, 0);
}

void expect_gradients_match(const Builder& build, std::vector<M> inputs, int out_rows,
                            int out_cols, double tol = 1e-6) {
  std::mt19937_64 rng(7);
  const M proj = random_matrix(rng, out_rows, out_cols);
  std::vector<M> grads;
  evaluate(build, inputs, proj, &grads);
  const double h = 1e-6;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k].data()[i];
      inputs[k].data()[i] = orig + h;
      const double up = evaluate(build, inputs, proj, nullptr);
      inputs[k].data()[i] = orig - h;
      const double down = evaluate(build, inputs, proj, nullptr);
      inputs[k].data()[i] = orig;
      const double numeric = (up - down) / (2 * h);
      EXPECT_NEAR(grads[k].data()[i], numeric, tol * std::max(1.0, std::abs(numeric)))
          << "input " << k << " entry " << i;
    }
}

class AutogradTest : public ::testing::Test {
 protected:
  std::mt19937_64 rng{42};
  M rnd(int r, int c) { return random_matrix(rng, r, c); }
};

TEST_F(AutogradTest, Matmul) {
  expect_gradients_match([](auto& g, auto& v) { return matmul(g, v[0], v[1]); },
                         {rnd(3, 4), rnd(4, 2)}, 3, 2);
  expect_gradients_match([](auto& g, auto& v) { return matmul_nt(g, v[0], v[1]); },
                         {rnd(3, 4), rnd(5, 4)}, 3, 5);
}

TEST_F(AutogradTest, LinearWithBias) {
  expect_gradients_match([](auto& g, auto& v) { return linear(g, v[0], v[1], v[2]); },
                         {rnd(4, 3), rnd(3, 5), rnd(1, 5)}, 4, 5);
}

TEST_F(AutogradTest, ElementwiseOps) {
  expect_gradients_match([](auto& g, auto& v) { return add(g, v[0], v[1]); },
                         {rnd(2, 3), rnd(2, 3)}, 2, 3);
  expect_gradients_match([](auto& g, auto& v) { return add_row(g, v[0], v[1]); },
                         {rnd(4, 3), rnd(1, 3)}, 4, 3);
  expect_gradients_match([](auto& g, auto& v) { return scale(g, v[0], 2.5); }, {rnd(2, 2)}, 2, 2);
  expect_gradients_match([](auto& g, auto& v) { return gelu(g, v[0]); }, {rnd(3, 4)}, 3, 4);
  // keep relu inputs away from the kink
  M x = rnd(3, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (std::abs(x.data()[i]) < 0.05) x.data()[i] = 0.5;
  expect_gradients_match([](auto& g, auto& v) { return relu(g, v[0]); }, {x}, 3, 4);
}

TEST_F(AutogradTest, SoftmaxAndLayerNorm) {
  expect_gradients_match([](auto& g, auto& v) { return softmax_rows(g, v[0]); }, {rnd(3, 5)}, 3, 5);
  expect_gradients_match(
      [](auto& g, auto& v) { return layer_norm(g, v[0], v[1], v[2], 1e-5); },
      {rnd(4, 6), rnd(1, 6), rnd(1, 6)}, 4, 6);
}

TEST_F(AutogradTest, SlicingAndConcatenation) {
  expect_gradients_match([](auto& g, auto& v) { return slice_rows(g, v[0], 1, 2); }, {rnd(4, 3)}, 2, 3);
  expect_gradients_match([](auto& g, auto& v) { return slice_cols(g, v[0], 1, 2); }, {rnd(3, 4)}, 3, 2);
  expect_gradients_match([](auto& g, auto& v) { return concat_rows(g, {v[0], v[1]}); },
                         {rnd(2, 3), rnd(1, 3)}, 3, 3);
  expect_gradients_match([](auto& g, auto& v) { return concat_cols(g, {v[0], v[1]}); },
                         {rnd(2, 3), rnd(2, 2)}, 2, 5);
  expect_gradients_match([](auto& g, auto& v) { return repeat_row(g, v[0], 3); }, {rnd(1, 4)}, 3, 4);
}

TEST_F(AutogradTest, SpatialRearrangements) {
  expect_gradients_match([](auto& g, auto& v) { return im2col3x3(g, v[0], 3, 4); }, {rnd(12, 2)},
                         12, 18);
  expect_gradients_match([](auto& g, auto& v) { return space_to_depth(g, v[0], 4, 4, 2); },
                         {rnd(16, 3)}, 4, 12);
  expect_gradients_match([](auto& g, auto& v) { return depth_to_space(g, v[0], 2, 3, 2); },
                         {rnd(6, 8)}, 24, 2);
  expect_gradients_match(
      [](auto& g, auto& v) { return resize_rows_bilinear(g, v[0], 3, 4, 5, 7); }, {rnd(2, 12)}, 2,
      35);
}

TEST_F(AutogradTest, WeightedSum) {
  expect_gradients_match(
      [](auto& g, auto& v) { return weighted_sum<double>(g, {{v[0], 0.5}, {v[1], -2.0}}); },
      {rnd(1, 1), rnd(1, 1)}, 1, 1);
}

TEST_F(AutogradTest, LossNodes) {
  M target(1, 12);
  for (int i = 0; i < 12; ++i) target(0, i) = i % 3 == 0 ? 1 : 0;
  expect_gradients_match(
      [&](auto& g, auto& v) { return segmentation_loss(g, v[0], target, LossWeights{}); },
      {rnd(1, 12)}, 1, 1);
  expect_gradients_match(
      [&](auto& g, auto& v) { return segmentation_loss(g, v[0], target, LossWeights{0.3, 2.0}); },
      {rnd(1, 12)}, 1, 1);
  const M q = rnd(1, 3);
  expect_gradients_match([&](auto& g, auto& v) { return mse_loss(g, v[0], q); }, {rnd(1, 3)}, 1, 1);
}

TEST(AutogradGraph, ConstantsReceiveNoGradient) {
  Graph<double> g;
  M a = M::Ones(2, 2);
  Var c = g.constant(a);
  Var w = g.leaf(a, true);
  Var out = matmul(g, c, w);
  M s(1, 1);
  s(0, 0) = g.value(out).sum();
  Var loss = g.record(s, true, [out](Graph<double>& g, const M& go) {
    g.accumulate(out, M::Constant(2, 2, go(0, 0)));
  });
  g.backward(loss);
  EXPECT_EQ(g.grad(c), nullptr);
  ASSERT_NE(g.grad(w), nullptr);
  EXPECT_DOUBLE_EQ((*g.grad(w))(0, 0), 2.0);
}

TEST(AutogradGraph, ShapeMismatchThrows) {
  Graph<double> g;
  Var a = g.constant(M::Ones(2, 2));
  Var b = g.constant(M::Ones(3, 2));
  EXPECT_THROW(add(g, a, b), ShapeError);
}

TEST(Bilinear, IdentityAndConstantPreservation) {
  const Mat<double> same = bilinear_weights<double>(5, 5);
  EXPECT_TRUE(same.isApprox(Mat<double>::Identity(5, 5)));
  const Mat<double> up = bilinear_weights<double>(4, 9);
  for (int r = 0; r < up.rows(); ++r) EXPECT_NEAR(up.row(r).sum(), 1.0, 1e-12);
}

}  // namespace
}  // namespace promptseg
