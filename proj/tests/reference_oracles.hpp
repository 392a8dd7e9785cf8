#pragma once

// Independent reference values and brute-force oracles for the numeric
// kernels, shared by the unit tests and the acceptance runner.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "gcl/stats/anova.hpp"

namespace gcl::reference {

namespace gs = gcl::stats;

// Reference values computed with mpmath at 50 digits.
struct BetaRef { double a, b, x, v; };
struct TRef { double t, df, v; };
struct FRef { double x, d1, d2, v; };

inline const BetaRef kBeta[] = {
    {0.5, 0.5, 0.3, 0.36901011956554537504},  {1, 1, 0.42, 0.42},
    {2, 3, 0.25, 0.26171875},                 {5, 2, 0.9, 0.885735},
    {10, 10, 0.5, 0.5},                       {0.3, 7, 0.01, 0.48749205093372471283},
    {30, 2.5, 0.95, 0.67633750700938286402},  {100, 100, 0.47, 0.19815420142409226991},
    {1.5, 40, 0.02, 0.34654713215022035997},  {7.5, 0.5, 0.999, 0.90410138275496999969},
    {2, 2, 1e-6, 2.9999979999999997285e-12},  {600, 0.5, 0.995, 0.014204522192081231372},
};

inline const TRef kTcdf[] = {
    {0, 5, 0.5},
    {1, 1, 0.75},
    {-2.5, 3, 0.043853323504032773625},
    {2, 10, 0.96330598261462981719},
    {-0.3, 2, 0.39624283042008880532},
    {3.5, 30, 0.99926159628117787347},
    {-4.2, 120, 2.5773733354046212677e-5},
    {1.96, 1e6, 0.97500196620736510466},
    {0.05, 4, 0.51874024077940273943},
    {-8, 7, 4.5574605854376812088e-5},
    {2.5758, 1199, 0.99494013756108358144},
};

inline const FRef kFcdf[] = {
    {1, 1, 10, 0.65910686769794012733},    {3.2, 2, 20, 0.93773260631141498904},
    {0.5, 5, 5, 0.23251131913037862412},   {4, 5, 1188, 0.9986715232702808617},
    {0.01, 3, 7, 0.0015047529598882999366}, {10, 1, 1, 0.80501777095786335484},
    {1.5, 10, 100, 0.84957024594365563095}, {2.2, 4, 60, 0.92029616030598981521},
    {0.8, 1, 3, 0.56300237911159916679},
};

inline const TRef kTwoSided[] = {
    {19.7, 599, 5.547985029930776217e-67},
    {18.5, 599, 8.8340432702925524963e-61},
    {3, 10, 0.013343655022569577207},
    {5, 2, 0.037749551350623725818},
};

inline const FRef kFsf[] = {
    {2507, 1, 1188, 5.3270220521625302631e-295},
    {4, 5, 1188, 0.0013284767297191383033},
    {30, 2, 50, 2.7506350927670065596e-9},
    {12.5, 1, 20, 0.0020769144917102089725},
};

/// Cosine similarity accumulated in long double.
inline double brute_cosine(const std::vector<double>& x, const std::vector<double>& y) {
  long double dot = 0, xx = 0, yy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += (long double)x[i] * y[i];
    xx += (long double)x[i] * x[i];
    yy += (long double)y[i] * y[i];
  }
  return static_cast<double>(dot / std::sqrt(xx * yy));
}

// Residual sum of squares of an OLS fit, via QR.
inline double rss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  return (y - X * beta).squaredNorm();
}

// Design matrix with dummy coding; optional blocks for A, B, AxB.
inline Eigen::MatrixXd design(const std::vector<gs::AnovaObservation>& obs, std::size_t la, std::size_t lb, bool a,
                       bool b, bool ab) {
  const std::size_t cols = 1 + (a ? la - 1 : 0) + (b ? lb - 1 : 0) + (ab ? (la - 1) * (lb - 1) : 0);
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(obs.size(), cols);
  for (std::size_t r = 0; r < obs.size(); ++r) {
    std::size_t c = 0;
    X(r, c++) = 1;
    if (a)
      for (std::size_t i = 1; i < la; ++i) X(r, c++) = obs[r].a == i;
    if (b)
      for (std::size_t j = 1; j < lb; ++j) X(r, c++) = obs[r].b == j;
    if (ab)
      for (std::size_t i = 1; i < la; ++i)
        for (std::size_t j = 1; j < lb; ++j) X(r, c++) = obs[r].a == i && obs[r].b == j;
  }
  return X;
}


}  // namespace gcl::reference
