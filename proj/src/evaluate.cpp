#include "xrecon/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <json.hpp>

#include "xrecon/errors.hpp"

namespace xrecon {

using nlohmann::json;

namespace {

const char* channel_name(std::size_t c) { return c == 0 ? "left" : "right"; }

void summarize(const std::vector<double>& xs, double& mean, double& stddev) {
  mean = 0;
  stddev = 0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

}  // namespace

ChannelGrids ground_truth_grids(const PhantomSpec& spec, std::size_t resolution) {
  ChannelGrids grids{OccupancyGrid::covering(spec.space, resolution), OccupancyGrid::covering(spec.space, resolution)};
  const Vec3 e = spec.space.extent();
  const double h = std::max({grids[0].spacing.x, grids[0].spacing.y, grids[0].spacing.z});
  const std::size_t r = resolution;
  std::vector<double> xs(r), ys(r), zs(r);
  for (std::size_t i = 0; i < r; ++i) {
    xs[i] = grid_coordinate(spec.space.min.x, e.x, i, r);
    ys[i] = grid_coordinate(spec.space.min.y, e.y, i, r);
    zs[i] = grid_coordinate(spec.space.min.z, e.z, i, r);
  }
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto& prims = spec.lobes[c];
    if (prims.empty()) continue;
    // Beyond the padded lobe box the ramp is exactly 0.
    auto [lo, hi] = bounding_box(prims.front());
    for (const auto& p : prims) {
      const auto [l, u] = bounding_box(p);
      lo = {std::min(lo.x, l.x), std::min(lo.y, l.y), std::min(lo.z, l.z)};
      hi = {std::max(hi.x, u.x), std::max(hi.y, u.y), std::max(hi.z, u.z)};
    }
    const Vec3 pad{2 * h, 2 * h, 2 * h};
    lo = lo - pad;
    hi = hi + pad;
    for (std::size_t k = 0; k < r; ++k) {
      if (zs[k] < lo.z || zs[k] > hi.z) continue;
      for (std::size_t j = 0; j < r; ++j) {
        if (ys[j] < lo.y || ys[j] > hi.y) continue;
        for (std::size_t i = 0; i < r; ++i) {
          if (xs[i] < lo.x || xs[i] > hi.x) continue;
          const Vec3 p{xs[i], ys[j], zs[k]};
          double sdf = std::numeric_limits<double>::infinity();
          for (const auto& prim : prims) sdf = std::min(sdf, signed_distance(prim, p));
          grids[c].at(i, j, k) = static_cast<float>(std::clamp(0.5 - sdf / (2 * h), 0.0, 1.0));
        }
      }
    }
  }
  return grids;
}

ChannelMeshes ground_truth_meshes(const PhantomSpec& spec, std::size_t resolution) {
  const ChannelGrids grids = ground_truth_grids(spec, resolution);
  return {marching_cubes(grids[0]), marching_cubes(grids[1])};
}

ChannelGrids mean_shape_grids(const std::vector<PhantomSpec>& train, std::size_t resolution) {
  if (train.empty()) throw EmptyInputError("mean_shape_grids: no training phantoms");
  std::array<std::vector<double>, kChannels> acc;
  ChannelGrids out;
  for (const auto& spec : train) {
    const ChannelGrids g = ground_truth_grids(spec, resolution);
    for (std::size_t c = 0; c < kChannels; ++c) {
      if (acc[c].empty()) {
        acc[c].assign(g[c].values.size(), 0.0);
        out[c] = g[c];
      }
      for (std::size_t i = 0; i < acc[c].size(); ++i) acc[c][i] += g[c].values[i];
    }
  }
  for (std::size_t c = 0; c < kChannels; ++c)
    for (std::size_t i = 0; i < acc[c].size(); ++i)
      out[c].values[i] = static_cast<float>(acc[c][i] / static_cast<double>(train.size()));
  return out;
}

double EvalReport::mean_cd() const {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& m : per_case)
    if (m.cd) {
      sum += *m.cd;
      ++n;
    }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::infinity();
}

std::size_t EvalReport::failures() const { return summary[0].failures + summary[1].failures; }

std::string EvalReport::to_json() const {
  json j;
  j["resolution"] = resolution;
  j["n_points"] = n_points;
  j["runs"] = runs;
  json cases = json::array();
  for (const auto& m : per_case) {
    json row;
    row["seed"] = m.seed;
    row["channel"] = channel_name(m.channel);
    row["run"] = m.run;
    row["cd"] = m.cd ? json(*m.cd) : json(nullptr);
    row["emd"] = m.emd ? json(*m.emd) : json(nullptr);
    row["failed"] = !m.cd.has_value();
    cases.push_back(row);
  }
  j["per_case"] = cases;
  json summ;
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto& s = summary[c];
    summ[channel_name(c)] = {{"cd_mean", s.cd_mean},   {"cd_std", s.cd_std}, {"emd_mean", s.emd_mean},
                             {"emd_std", s.emd_std}, {"count", s.count},   {"failures", s.failures}};
  }
  j["summary"] = summ;
  return j.dump(2) + "\n";
}

std::string EvalReport::timing_json() const {
  json j;
  j["infer_seconds"] = infer_seconds;
  j["mc_seconds"] = mc_seconds;
  return j.dump(2) + "\n";
}

EvalReport evaluate_predictor(const std::vector<PreparedCase>& cases, const std::vector<ChannelMeshes>& ground_truth,
                              const GridPredictor& predict, const EvalConfig& config, std::size_t resolution) {
  if (cases.size() != ground_truth.size()) throw InvalidArgument("evaluate: one ground-truth entry per case required");
  if (cases.empty()) throw EmptyInputError("evaluate: no cases");
  EvalReport report;
  report.resolution = resolution;
  report.n_points = config.n_points;
  report.runs = config.runs;
  std::array<std::vector<double>, kChannels> cds, emds;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const PreparedCase& pc = cases[ci];
    auto t0 = std::chrono::steady_clock::now();
    const ChannelGrids grids = predict(pc);
    report.infer_seconds += seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const ChannelMeshes meshes{marching_cubes(grids[0]), marching_cubes(grids[1])};
    report.mc_seconds += seconds_since(t0);
    for (std::size_t c = 0; c < kChannels; ++c) {
      const bool failed = meshes[c].empty() || !(meshes[c].area() > 0) || ground_truth[ci][c].empty();
      for (std::size_t run = 0; run < config.runs; ++run) {
        CaseMetrics m;
        m.seed = pc.seed;
        m.channel = c;
        m.run = run;
        if (!failed) {
          const std::uint64_t s = mix_seed(mix_seed(pc.seed, c), run);
          const PointSet pred = sample_surface_points(meshes[c], config.n_points, s);
          const PointSet gt = sample_surface_points(ground_truth[ci][c], config.n_points, s);
          m.cd = chamfer_distance(pred, gt);
          cds[c].push_back(*m.cd);
          if (config.emd) {
            const std::size_t n = std::min(config.emd_points, config.n_points);
            const PointSet a(pred.begin(), pred.begin() + static_cast<std::ptrdiff_t>(n));
            const PointSet b(gt.begin(), gt.begin() + static_cast<std::ptrdiff_t>(n));
            m.emd = earth_movers_distance(a, b, config.emd_limit);
            emds[c].push_back(*m.emd);
          }
        } else {
          ++report.summary[c].failures;
        }
        report.per_case.push_back(m);
      }
    }
  }
  for (std::size_t c = 0; c < kChannels; ++c) {
    auto& s = report.summary[c];
    s.count = cds[c].size();
    summarize(cds[c], s.cd_mean, s.cd_std);
    summarize(emds[c], s.emd_mean, s.emd_std);
  }
  report.infer_seconds /= static_cast<double>(cases.size());
  report.mc_seconds /= static_cast<double>(cases.size());
  return report;
}

EvalReport evaluate_reconstruction(Model<float>& model, const std::vector<PreparedCase>& cases,
                                   const RunConfig& config, std::size_t resolution) {
  std::vector<ChannelMeshes> gt;
  gt.reserve(cases.size());
  for (const auto& c : cases) gt.push_back(ground_truth_meshes(c.spec, config.eval.gt_resolution));
  const GridPredictor predict = [&](const PreparedCase& c) {
    return infer_occupancy_grid(model, c.inputs, config.space, resolution, config.eval.chunk);
  };
  return evaluate_predictor(cases, gt, predict, config.eval, resolution);
}

}  // namespace xrecon
