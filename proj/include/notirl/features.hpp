#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "notirl/errors.hpp"
#include "notirl/matrix.hpp"
#include "notirl/mdp.hpp"

namespace notirl {

// Per-feature standardization fitted on the training split and carried with
// every checkpoint, so a saved policy reproduces its training-time inputs
// exactly. Columns with (near) zero spread keep scale 1 to avoid blowing up
// constants.
struct FeatureTransform {
  std::vector<double> center;
  std::vector<double> scale;

  std::size_t dim() const { return center.size(); }

  static FeatureTransform identity(std::size_t dim) {
    FeatureTransform t;
    t.center.assign(dim, 0.0);
    t.scale.assign(dim, 1.0);
    return t;
  }

  template <class StateRange>
  static FeatureTransform fit(const StateRange& states) {
    std::size_t n = 0;
    std::size_t dim = 0;
    for (const StateFeatures& s : states) {
      if (dim == 0) dim = s.size();
      if (s.size() != dim) throw DataError("FeatureTransform: ragged states");
      ++n;
    }
    if (n == 0) throw DataError("FeatureTransform: no states to fit");
    FeatureTransform t;
    t.center.assign(dim, 0.0);
    t.scale.assign(dim, 0.0);
    for (const StateFeatures& s : states)
      for (std::size_t j = 0; j < dim; ++j) t.center[j] += s[j];
    for (double& c : t.center) c /= static_cast<double>(n);
    for (const StateFeatures& s : states)
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = s[j] - t.center[j];
        t.scale[j] += d * d;
      }
    for (double& v : t.scale) {
      v = std::sqrt(v / static_cast<double>(n));
      if (v < 1e-12) v = 1.0;
    }
    return t;
  }

  void apply(std::span<const double> in, std::span<double> out) const {
    if (in.size() != dim() || out.size() != dim())
      throw DataError("FeatureTransform: dimension mismatch");
    for (std::size_t j = 0; j < dim(); ++j)
      out[j] = (in[j] - center[j]) / scale[j];
  }

  StateFeatures operator()(const StateFeatures& s) const {
    StateFeatures out(s.size(), 0.0);
    apply(s, out);
    return out;
  }

  DenseMatrix transform_rows(const DenseMatrix& raw) const {
    DenseMatrix out(raw.rows, raw.cols);
    for (std::size_t r = 0; r < raw.rows; ++r) apply(raw.row(r), out.row(r));
    return out;
  }
};

}  // namespace notirl
