// Copyright 2026 The socnav Authors
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

#include "socnav/tinynet.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "socnav/rng.hpp"

using namespace socnav;
using namespace socnav::tinynet;

namespace {

// Corrected relative error: small absolute deviations are ignored.
double rel_err(double a, double b) {
  const double num = std::max(0.0, std::abs(a - b) - 1e-9);
  return num / (std::abs(a) + std::abs(b) + 1e-9);
}

double loss_value(Network& net, const Matrix& x, const Matrix& c) {
  return (net.forward(x).array() * c.array()).sum();
}

// Central finite differences (eps = 1e-5) against backward() for both
// parameters and inputs.
void gradcheck(Network& net, const Matrix& x, uint64_t seed, double tol) {
  Rng rng(seed);
  net.forward(x);
  Matrix c(x.rows(), net.output_dim());
  for (long i = 0; i < c.rows(); ++i)
    for (long j = 0; j < c.cols(); ++j) c(i, j) = rng.uniform(-1.0, 1.0);

  net.zero_grads();
  net.forward(x);
  Matrix gin = net.backward(c);

  const double eps = 1e-5;
  auto params = net.param_ptrs();
  auto grads = net.grad_ptrs();
  auto sizes = net.param_sizes();
  for (size_t k = 0; k < params.size(); ++k) {
    const long n_checks = std::min<long>(sizes[k], 40);
    for (long chk = 0; chk < n_checks; ++chk) {
      const long idx = (sizes[k] <= 40) ? chk : static_cast<long>(rng.next_u64() % sizes[k]);
      double* p = params[k] + idx;
      const double old = *p;
      *p = old + eps;
      const double lp = loss_value(net, x, c);
      *p = old - eps;
      const double lm = loss_value(net, x, c);
      *p = old;
      const double numeric = (lp - lm) / (2.0 * eps);
      const double analytic = *(grads[k] + idx);
      CHECK(rel_err(analytic, numeric) <= tol);
    }
  }

  Matrix xp = x;
  for (long i = 0; i < x.rows(); ++i) {
    for (long j = 0; j < x.cols(); ++j) {
      const double old = xp(i, j);
      xp(i, j) = old + eps;
      const double lp = loss_value(net, xp, c);
      xp(i, j) = old - eps;
      const double lm = loss_value(net, xp, c);
      xp(i, j) = old;
      const double numeric = (lp - lm) / (2.0 * eps);
      CHECK(rel_err(gin(i, j), numeric) <= tol);
    }
  }
}

Matrix random_batch(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  Matrix x(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) x(i, j) = rng.uniform(-2.0, 2.0);
  return x;
}

}  // namespace

TEST_CASE("identity dense layer passes input through") {
  Network net({dense(3, 3)}, 1);
  net.layers()[0].w = Matrix::Identity(3, 3);
  net.set_mode(Mode::kEval);
  Matrix x = random_batch(4, 3, 7);
  CHECK(net.forward(x).isApprox(x));
}

TEST_CASE("scaled_tanh saturates at its scale") {
  Network net({scaled_tanh(1, 1.5)}, 1);
  Matrix x(1, 1);
  x(0, 0) = 50.0;
  CHECK(net.forward(x)(0, 0) == doctest::Approx(1.5).epsilon(1e-9));
  x(0, 0) = -50.0;
  CHECK(net.forward(x)(0, 0) == doctest::Approx(-1.5).epsilon(1e-9));
}

TEST_CASE("batchnorm train mode normalizes the batch") {
  Network net({batchnorm(3)}, 1);
  net.set_mode(Mode::kTrain);
  Matrix x = random_batch(64, 3, 8);
  x.col(1).array() += 10.0;  // offset one feature
  Matrix y = net.forward(x);
  for (int j = 0; j < 3; ++j) {
    const double mean = y.col(j).mean();
    const double var = (y.col(j).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-3);  // eps shifts variance slightly below 1
  }
}

TEST_CASE("batchnorm eval mode has no batch coupling") {
  Network net({batchnorm(3)}, 1);
  net.set_mode(Mode::kTrain);
  net.forward(random_batch(32, 3, 9));  // populate running stats
  net.set_mode(Mode::kEval);
  Matrix x = random_batch(6, 3, 10);
  Matrix whole = net.forward(x);
  for (int i = 0; i < 6; ++i) {
    Matrix row = net.forward(x.row(i));
    CHECK(row.isApprox(whole.row(i)));
  }
}

TEST_CASE("sum loss through identity dense gives unit input grads") {
  Network net({dense(3, 3)}, 1);
  net.layers()[0].w = Matrix::Identity(3, 3);
  Matrix x = random_batch(2, 3, 11);
  net.zero_grads();
  net.forward(x);
  Matrix gin = net.backward(Matrix::Ones(2, 3));
  CHECK(gin.isApprox(Matrix::Ones(2, 3)));
}

TEST_CASE("backward without forward is an error") {
  Network net({dense(2, 2)}, 1);
  CHECK_THROWS_AS(net.backward(Matrix::Ones(1, 2)), std::logic_error);
}

TEST_CASE("forward rejects shape mismatch") {
  Network net({dense(3, 2)}, 1);
  CHECK_THROWS_AS(net.forward(Matrix::Ones(1, 4)), std::invalid_argument);
}

TEST_CASE("gradcheck: each layer kind individually") {
  Matrix x = random_batch(5, 4, 21);
  SUBCASE("dense") {
    Network net({dense(4, 3)}, 2);
    gradcheck(net, x, 100, 1e-4);
  }
  SUBCASE("batchnorm train") {
    Network net({batchnorm(4)}, 3);
    net.set_mode(Mode::kTrain);
    gradcheck(net, x, 101, 1e-4);
  }
  SUBCASE("batchnorm eval") {
    Network net({batchnorm(4)}, 3);
    net.set_mode(Mode::kTrain);
    net.forward(random_batch(16, 4, 22));
    net.set_mode(Mode::kEval);
    gradcheck(net, x, 102, 1e-4);
  }
  SUBCASE("relu") {
    Network net({relu(4)}, 4);
    gradcheck(net, x, 103, 1e-4);
  }
  SUBCASE("tanh") {
    Network net({tanh_layer(4)}, 5);
    gradcheck(net, x, 104, 1e-4);
  }
  SUBCASE("scaled_tanh") {
    Network net({scaled_tanh(4, 1.5)}, 6);
    gradcheck(net, x, 105, 1e-4);
  }
}

TEST_CASE("gradcheck: composed network, train and eval") {
  Matrix x = random_batch(6, 5, 23);
  std::vector<LayerSpec> specs = {dense(5, 8),  batchnorm(8), relu(8),
                                  dense(8, 6),  batchnorm(6), relu(6),
                                  dense(6, 4),  scaled_tanh(4, 1.5)};
  SUBCASE("train mode") {
    Network net(specs, 7);
    net.set_mode(Mode::kTrain);
    gradcheck(net, x, 106, 1e-4);
  }
  SUBCASE("eval mode") {
    Network net(specs, 8);
    net.set_mode(Mode::kTrain);
    net.forward(random_batch(32, 5, 24));
    net.set_mode(Mode::kEval);
    gradcheck(net, x, 107, 1e-4);
  }
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  Network net({dense(3, 3), batchnorm(3)}, 9);
  const uint64_t before = net.param_checksum();
  net.zero_grads();
  Adam opt(0.1);
  opt.step(net);
  CHECK(net.param_checksum() == before);
}

TEST_CASE("adam: one step decreases a quadratic") {
  Network net({dense(1, 1)}, 10);
  net.layers()[0].w(0, 0) = 1.0;
  Matrix x = Matrix::Ones(1, 1);
  auto loss = [&]() {
    const double out = net.forward(x)(0, 0);
    return out * out;
  };
  const double l0 = loss();
  net.zero_grads();
  const double out = net.forward(x)(0, 0);
  Matrix g(1, 1);
  g(0, 0) = 2.0 * out;
  net.backward(g);
  Adam opt(0.05);
  opt.step(net);
  CHECK(loss() < l0);
}

TEST_CASE("adam: 2000 steps reach a 2-parameter quadratic optimum") {
  // out(x) = w x + b on x in {0, 1}; targets -2 and 1 => b* = -2, w* = 3.
  Network net({dense(1, 1)}, 11);
  Matrix x(2, 1);
  x << 0.0, 1.0;
  Matrix target(2, 1);
  target << -2.0, 1.0;
  Adam opt(0.02);
  for (int i = 0; i < 2000; ++i) {
    net.zero_grads();
    Matrix out = net.forward(x);
    Matrix g = 2.0 * (out - target);
    net.backward(g);
    opt.step(net);
  }
  CHECK(std::abs(net.layers()[0].w(0, 0) - 3.0) < 1e-3);
  CHECK(std::abs(net.layers()[0].b(0) + 2.0) < 1e-3);
}

TEST_CASE("checkpoint round trip is bit-exact in eval mode") {
  std::vector<LayerSpec> specs = {dense(4, 8), batchnorm(8), relu(8),
                                  dense(8, 2), scaled_tanh(2, 1.5)};
  Network net(specs, 12);
  net.set_mode(Mode::kTrain);
  net.forward(random_batch(16, 4, 25));  // move running stats off init
  net.set_mode(Mode::kEval);

  const std::string path = (std::filesystem::temp_directory_path() / "tinynet_ckpt.json").string();
  save_checkpoint(net, path);
  Network loaded = load_checkpoint(path);

  Matrix x = random_batch(5, 4, 26);
  Matrix a = net.forward(x);
  Matrix b = loaded.forward(x);
  for (long i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
  CHECK(loaded.param_checksum() == net.param_checksum());
  std::remove(path.c_str());
}

TEST_CASE("checkpoint: truncated file is a structured error") {
  const std::string path = (std::filesystem::temp_directory_path() / "tinynet_trunc.json").string();
  {
    Network net({dense(2, 2)}, 13);
    save_checkpoint(net, path);
  }
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(path, std::ios::trunc);
  out << content.substr(0, content.size() / 2);
  out.close();
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint: version mismatch reported") {
  const std::string path = (std::filesystem::temp_directory_path() / "tinynet_ver.json").string();
  std::ofstream out(path);
  out << "{\"version\": 99, \"layers\": [{\"kind\": \"relu\", \"in\": 2, \"out\": 2}]}";
  out.close();
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("training is bitwise reproducible from a seed") {
  auto run = []() {
    Network net({dense(3, 6), batchnorm(6), relu(6), dense(6, 1)}, 14);
    net.set_mode(Mode::kTrain);
    Adam opt(1e-3);
    Rng rng(99);
    for (int i = 0; i < 50; ++i) {
      Matrix x = random_batch(8, 3, rng.next_u64());
      net.zero_grads();
      Matrix out = net.forward(x);
      net.backward(2.0 * out);
      opt.step(net);
    }
    return net.param_checksum();
  };
  CHECK(run() == run());
}
