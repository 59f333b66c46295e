#include "phosc/net/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "phosc/rng.hpp"

namespace phosc::net {

double relative_error(double analytic, double numeric, double abs_floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
  return std::abs(analytic - numeric) / denom;
}

std::string GradCheckReport::summary() const {
  std::ostringstream out;
  out << (passed ? "PASS" : "FAIL") << " max_rel_error=" << max_rel_error << " checked=" << checked;
  for (const auto& w : worst) {
    out << "\n  " << w.tensor << "[" << w.index << "] analytic=" << w.analytic << " numeric=" << w.numeric
        << " rel=" << w.rel_error;
  }
  return out.str();
}

GradCheckReport grad_check(ParamStore<double>& params, const ParamStore<double>& analytic,
                           const std::function<double(const ParamStore<double>&)>& loss,
                           const GradCheckOptions& options) {
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t i = 0; i < params[t].size(); ++i) coords.emplace_back(t, i);
  if (coords.size() > options.samples) {
    Rng rng(options.seed);
    rng.shuffle(coords.begin(), coords.end());
    coords.resize(options.samples);
    std::sort(coords.begin(), coords.end());
  }
  GradCheckReport report;
  std::vector<GradCoordinate> all;
  for (auto [t, i] : coords) {
    double& x = params[t][i];
    const double saved = x;
    x = saved + options.epsilon;
    const double up = loss(params);
    x = saved - options.epsilon;
    const double down = loss(params);
    x = saved;
    GradCoordinate c;
    c.tensor = params.name(t);
    c.index = i;
    c.analytic = analytic[t][i];
    c.numeric = (up - down) / (2.0 * options.epsilon);
    c.rel_error = relative_error(c.analytic, c.numeric, options.abs_floor);
    report.max_rel_error = std::max(report.max_rel_error, c.rel_error);
    all.push_back(std::move(c));
  }
  report.checked = all.size();
  report.passed = report.max_rel_error <= options.tolerance;
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.rel_error > b.rel_error; });
  all.resize(std::min(all.size(), options.report_worst));
  report.worst = std::move(all);
  return report;
}

}  // namespace phosc::net
