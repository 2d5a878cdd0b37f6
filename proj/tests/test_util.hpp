#pragma once

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "nvc/rng.hpp"
#include "nvc/tensor.hpp"

namespace nvc::test {

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& g, double lo = -1.0,
                                    double hi = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(numel_of(shape)));
  for (auto& x : v) x = uniform(g, lo, hi);
  return Tensor<double>(std::move(shape), std::move(v));
}

inline Tensor<float> random_tensor_f(Shape shape, std::mt19937_64& g, float lo = -1.0f,
                                     float hi = 1.0f) {
  std::vector<float> v(static_cast<std::size_t>(numel_of(shape)));
  for (auto& x : v) x = uniform(g, lo, hi);
  return Tensor<float>(std::move(shape), std::move(v));
}

/// Central finite differences against the analytic reverse pass.
///
/// `rebuild` must construct a fresh graph from the current leaf values and
/// return the scalar loss. Each leaf is perturbed in place through
/// mutable_data(). Relative tolerance: |a - n| <= tol * max(1, |a|, |n|).
inline void check_gradients(const std::function<Tensor<double>()>& rebuild,
                            std::vector<Tensor<double>*> leaves, double tol = 1e-4,
                            double eps = 1e-5) {
  for (auto* l : leaves) l->zero_grad();
  Tensor<double> loss = rebuild();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto* l : leaves) analytic.push_back(l->grad());

  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto& data = leaves[li]->mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double fp = rebuild().item();
      data[i] = saved - eps;
      const double fm = rebuild().item();
      data[i] = saved;
      const double numeric = (fp - fm) / (2 * eps);
      const double a = analytic[li][i];
      const double scale = std::max({1.0, std::abs(a), std::abs(numeric)});
      EXPECT_NEAR(a, numeric, tol * scale)
          << "leaf " << li << " index " << i << " analytic " << a << " numeric " << numeric;
    }
  }
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Spearman rank correlation; assumes no ties (strict measurements).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double d2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("nvc_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter_++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& name = "") const {
    return name.empty() ? path_.string() : (path_ / name).string();
  }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

}  // namespace nvc::test
