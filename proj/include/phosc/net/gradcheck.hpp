#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "phosc/net/params.hpp"

namespace phosc::net {

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  std::size_t samples = 200;  // all coordinates are checked when fewer exist
  std::uint64_t seed = 1;
  double abs_floor = 1e-6;  // denominator floor for the relative error
  std::size_t report_worst = 5;
};

struct GradCoordinate {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = true;
  std::vector<GradCoordinate> worst;  // largest errors first
  std::string summary() const;
};

// rel_error = |analytic - numeric| / max(|analytic|, |numeric|, abs_floor)
double relative_error(double analytic, double numeric, double abs_floor);

// Central differences of loss() around the current params on a seeded
// subsample of coordinates, compared against analytic gradients.
GradCheckReport grad_check(ParamStore<double>& params, const ParamStore<double>& analytic,
                           const std::function<double(const ParamStore<double>&)>& loss,
                           const GradCheckOptions& options = {});

}  // namespace phosc::net
