#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "gcl/core/error.hpp"

namespace gcl::closure {

struct Similarity {
  double value = 0.0;
  /// Exactly one of the two vectors had zero norm; value is 0.
  bool one_zero_norm = false;
};

/// Cosine similarity accumulated in double. Both-zero gives 0; one-zero gives
/// 0 with the flag set.
template <class A, class B>
Similarity cosine_similarity(std::span<const A> x, std::span<const B> y) {
  if (x.size() != y.size())
    throw Error("cosine: length mismatch (" + std::to_string(x.size()) + " vs " +
                std::to_string(y.size()) + ")");
  double dot = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = static_cast<double>(x[i]), b = static_cast<double>(y[i]);
    dot += a * b;
    xx += a * a;
    yy += b * b;
  }
  if (!std::isfinite(dot) || !std::isfinite(xx) || !std::isfinite(yy))
    throw NumericError("cosine: non-finite input");
  if (xx == 0.0 && yy == 0.0) return {0.0, false};
  if (xx == 0.0 || yy == 0.0) return {0.0, true};
  const double c = dot / (std::sqrt(xx) * std::sqrt(yy));
  return {std::clamp(c, -1.0, 1.0), false};
}

template <class A, class B>
double cosine(std::span<const A> x, std::span<const B> y) {
  return cosine_similarity(x, y).value;
}

inline double cosine(std::span<const double> x, std::span<const double> y) {
  return cosine_similarity(x, y).value;
}

}  // namespace gcl::closure
