#include "xrecon/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "xrecon/errors.hpp"

namespace xrecon::ad {

double GradCheckReport::max_rel_error() const {
  double worst = 0;
  for (const auto& p : params) worst = std::max(worst, p.max_rel_error);
  return worst;
}

std::size_t GradCheckReport::skipped() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.skipped;
  return n;
}

namespace {

using GradMap = std::map<std::string, std::vector<double>>;

template <typename T>
GradMap analytic_gradients(const LossBuilder<T>& build, ParamStore<T>& params) {
  params.zero_grad();
  Graph<T> g;
  Var loss = build(g, params);
  g.backward(loss);
  GradMap out;
  for (auto& [name, p] : params) {
    auto gr = p.grad();
    out[name].assign(gr.begin(), gr.end());
  }
  return out;
}

double evaluate(const LossBuilder<double>& build, ParamStore<double>& params) {
  Graph<double> g;
  return g.value(build(g, params)).item();
}

std::vector<std::size_t> pick_indices(std::size_t n, std::size_t max_elements) {
  std::vector<std::size_t> idx;
  if (max_elements == 0 || max_elements >= n) {
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  for (std::size_t j = 0; j < max_elements; ++j) idx.push_back(j * n / max_elements);
  return idx;
}

GradCheckReport compare(const GradMap& analytic, const LossBuilder<double>& build, ParamStore<double>& params,
                        const GradCheckOptions& opt) {
  const double base = evaluate(build, params);
  if (evaluate(build, params) != base) {
    throw CheckInvalidError("gradient_check: loss is not deterministic; finite differences are meaningless");
  }
  GradCheckReport report;
  report.passed = true;
  for (auto& [name, p] : params) {
    ParamCheck pc;
    pc.name = name;
    const auto& a = analytic.at(name);
    auto data = p.data();
    for (std::size_t i : pick_indices(p.size(), opt.max_elements)) {
      const double theta = data[i];
      auto central = [&](double h) {
        data[i] = theta + h;
        const double up = evaluate(build, params);
        const double hi = data[i];
        data[i] = theta - h;
        const double down = evaluate(build, params);
        const double lo = data[i];
        data[i] = theta;
        return (up - down) / (hi - lo);
      };
      const double h = opt.step_scale * std::max(1.0, std::abs(theta));
      const double numeric = central(h);
      ++pc.checked;
      if (opt.skip_kinks) {
        const double fine = central(h / 4);
        const double s = std::max({std::abs(numeric), std::abs(fine), opt.abs_floor});
        if (std::abs(numeric - fine) / s > opt.tolerance) {
          ++pc.skipped;
          continue;
        }
      }
      const double scale = std::max({std::abs(a[i]), std::abs(numeric), opt.abs_floor});
      const double err = scale == 0 ? 0.0 : std::abs(a[i] - numeric) / scale;
      if (err > pc.max_rel_error || (i == 0 && err == 0)) {
        pc.max_rel_error = err;
        pc.worst_index = i;
        pc.analytic = a[i];
        pc.numeric = numeric;
      }
    }
    pc.passed = pc.max_rel_error < opt.tolerance;
    report.passed = report.passed && pc.passed;
    report.params.push_back(pc);
  }
  std::size_t checked = 0;
  for (const auto& pc : report.params) checked += pc.checked;
  if (static_cast<double>(report.skipped()) > opt.max_skip_fraction * static_cast<double>(checked)) report.passed = false;
  return report;
}

}  // namespace

GradCheckReport gradient_check(const LossBuilder<double>& build, ParamStore<double>& params,
                               const GradCheckOptions& options) {
  const GradMap analytic = analytic_gradients(build, params);
  return compare(analytic, build, params, options);
}

GradCheckReport gradient_check_mixed(const LossBuilder<float>& build32, const LossBuilder<double>& build64,
                                     ParamStore<float>& params, const GradCheckOptions& options) {
  const GradMap analytic = analytic_gradients(build32, params);
  ParamStore<double> wide = params.cast<double>();
  return compare(analytic, build64, wide, options);
}

}  // namespace xrecon::ad
