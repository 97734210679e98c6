#include "floeot/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "floeot/errors.hpp"
#include "floeot/fields.hpp"
#include "floeot/oracle.hpp"
#include "json.hpp"

namespace floeot::cli {

namespace fs = std::filesystem;
using nlohmann::json;

KernelSpec kernel_for(const RunConfig& config, const GridGeometry& geometry) {
  if (config.mode == "auto") return KernelSpec::automatic(config.eps, geometry);
  if (config.mode == "dense") return KernelSpec::dense(config.eps);
  if (config.mode == "conv") return KernelSpec::convolutional(config.eps, geometry);
  throw ParameterError("unknown kernel mode '" + config.mode + "' (auto, dense, conv)");
}

MassField prepare_mass(const IntensityRaster& raster, const RunConfig& config) {
  Mask ice = apply_ice_mask(raster, config.mask_threshold);
  if (!config.equalize) return normalize_to_mass(raster, config.floor, std::move(ice));

  const IntensityRaster eq = equalize_contrast(raster, config.tile, config.clip);
  std::vector<double> v(eq.values().begin(), eq.values().end());
  const auto raw = raster.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!ice[i]) v[i] = raw[i];
  }
  return normalize_to_mass(IntensityRaster(raster.geometry(), std::move(v), raster.timestamp()),
                           config.floor, std::move(ice));
}

fs::path meta_or_default(const fs::path& image, const std::optional<fs::path>& meta) {
  return meta ? *meta : default_meta_path(image);
}

namespace {

struct Pair {
  IntensityRaster source;
  IntensityRaster target;
};

Pair load_pair(const SolveInputs& in) {
  IntensityRaster s = load_raster(in.source, meta_or_default(in.source, in.source_meta));
  IntensityRaster t = load_raster(in.target, meta_or_default(in.target, in.target_meta));
  const auto& gs = s.geometry();
  const auto& gt = t.geometry();
  if (!gs.same_shape(gt)) {
    throw ParameterError("geometry mismatch: source is " + std::to_string(gs.width()) + "x" +
                         std::to_string(gs.height()) + ", target is " +
                         std::to_string(gt.width()) + "x" + std::to_string(gt.height()));
  }
  if (gs.pixel_size() != gt.pixel_size()) {
    throw ParameterError("geometry mismatch: pixel sizes differ");
  }
  return {std::move(s), std::move(t)};
}

double resolve_dt(const Pair& pair, std::optional<double> override_dt) {
  const double dt = override_dt ? *override_dt : pair.target.timestamp() - pair.source.timestamp();
  if (!(dt > 0.0)) {
    throw ParameterError("dt must be positive (target timestamp after source, or pass --dt)");
  }
  return dt;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

FloeShape shape_from_string(const std::string& name) {
  if (name == "polygon") return FloeShape::polygon;
  if (name == "disc") return FloeShape::disc;
  if (name == "block") return FloeShape::block;
  throw ParameterError("unknown floe shape '" + name + "' (polygon, disc, block)");
}

// Runs `body`, mapping library errors onto exit codes.
template <typename F>
int guarded(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const StabilizationError& e) {
    log << "error: " << e.what() << '\n';
    return kExitStabilization;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const json::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace

int cmd_solve(const SolveInputs& in, const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const Pair images = load_pair(in);
    const double dt = resolve_dt(images, config.dt);
    const GridGeometry& g = images.source.geometry();
    const MassField p = prepare_mass(images.source, config);
    const MassField q = prepare_mass(images.target, config);

    const KernelSpec spec = kernel_for(config, g);
    const GibbsKernel kernel(spec, g);
    SinkhornOptions opts;
    opts.tol = config.tol;
    opts.max_iter = config.max_iter;
    opts.log_domain = config.log_domain;
    const ScalingPair pair = sinkhorn(p, q, kernel, opts);
    if (!pair.converged) {
      log << "warning: no convergence after " << pair.iterations << " iterations (residual "
          << pair.residual << "); writing outputs anyway\n";
    }
    const StalePolicy policy = StalePolicy::accept;

    const TransportSummary ts = transport_distance(p, q, pair, kernel, policy);
    const BarycentricMap map = barycentric_map(p, pair, kernel, policy);
    const VelocityField v = velocity(map, g, dt);
    StrainField s = strain(v, g, dt);
    s.principal = principal_strain(s, config.clip_strain);

    fs::create_directories(config.output);
    const fs::path& o = config.output;
    write_f32(o / "cbar.f32", g, ts.cbar, ts.valid);
    write_f32(o / "cbar_ms.f32", g, ts.physical(g, dt), ts.valid);
    write_f32(o / "vx.f32", g, v.vx, v.valid);
    write_f32(o / "vy.f32", g, v.vy, v.valid);
    write_f32(o / "exx.f32", g, s.exx, s.valid);
    write_f32(o / "eyy.f32", g, s.eyy, s.valid);
    write_f32(o / "exy.f32", g, s.exy, s.valid);
    write_f32(o / "principal.f32", g, s.principal, s.valid);

    if (config.thin > 0) {
      std::ofstream csv(o / "vectors.csv");
      csv << "col,row,vx_m_per_s,vy_m_per_s\n" << std::setprecision(17);
      for (int r = 0; r < g.height(); r += config.thin) {
        for (int c = 0; c < g.width(); c += config.thin) {
          const std::size_t i = g.index(c, r);
          if (v.valid[i]) csv << c << ',' << r << ',' << v.vx[i] << ',' << v.vy[i] << '\n';
        }
      }
    }

    write_json(o / "summary.json", {{"w_eps", ts.w_eps},
                                    {"iterations", pair.iterations},
                                    {"residual", pair.residual},
                                    {"converged", pair.converged},
                                    {"eps", spec.epsilon},
                                    {"mode", std::string(to_string(spec.mode))},
                                    {"log_domain", pair.log_domain},
                                    {"dt_s", dt},
                                    {"pixel_size_m", g.pixel_size()},
                                    {"width", g.width()},
                                    {"height", g.height()}});
    log << "W_eps = " << std::setprecision(10) << ts.w_eps << " after " << pair.iterations
        << " iterations (" << to_string(spec.mode) << ")\n";
    return pair.converged ? kExitOk : kExitNotConverged;
  });
}

int cmd_ncc(const SolveInputs& in, const NccConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const Pair images = load_pair(in);
    const double dt = resolve_dt(images, config.dt);
    const auto matches = ncc_displacements(images.source, images.target, config.options);
    write_ncc_csv(config.output, matches, images.source.geometry().pixel_size(), dt);
    log << matches.size() << " matches\n";
    return kExitOk;
  });
}

int cmd_synth(const SynthConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const Scenario sc = Scenario::make(scenario_kind_from_string(config.kind), config.size,
                                       shape_from_string(config.shape));
    const IntensityRaster a = render(sc, 0.0);
    const IntensityRaster b = render(sc, config.t);
    fs::create_directories(config.output);
    save_raster(config.output / "source.pgm", config.output / "source.json", a);
    save_raster(config.output / "target.pgm", config.output / "target.json", b);
    log << "wrote " << (config.output / "source.pgm").string() << " and "
        << (config.output / "target.pgm").string() << '\n';
    return kExitOk;
  });
}

int cmd_sweep(const SweepConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    if (config.t_steps < 2) throw ParameterError("sweep needs at least 2 t steps");
    for (double e : config.eps) {
      if (!(e > 0.0)) throw ParameterError("every epsilon must be positive");
    }
    const Scenario sc = Scenario::make(scenario_kind_from_string(config.kind), config.size,
                                       shape_from_string(config.shape));
    SweepOptions opts;
    opts.solver.tol = config.tol;
    opts.solver.max_iter = config.max_iter;
    opts.floor = config.floor;
    if (config.mode == "dense") {
      opts.mode = KernelMode::dense;
    } else if (config.mode == "conv") {
      opts.mode = KernelMode::convolutional;
    } else if (config.mode != "auto") {
      throw ParameterError("unknown kernel mode '" + config.mode + "'");
    }
    const auto rows = sweep(sc, config.eps, config.t_steps, opts);
    std::ofstream out(config.output);
    if (!out) throw FormatError("cannot write " + config.output.string());
    out << "eps,t,w_eps_minus_w0,iterations,converged\n" << std::setprecision(17);
    bool all = true;
    for (const auto& r : rows) {
      out << r.epsilon << ',' << r.t << ',' << r.w_minus_w0 << ',' << r.iterations << ','
          << (r.converged ? "true" : "false") << '\n';
      all = all && r.converged;
    }
    log << rows.size() << " sweep points\n";
    return all ? kExitOk : kExitNotConverged;
  });
}

int cmd_oracle(const SolveInputs& in, const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const Pair images = load_pair(in);
    const MassField p = prepare_mass(images.source, config);
    const MassField q = prepare_mass(images.target, config);
    if (p.mass().size() > kOracleLimit) {
      throw ScaleError("exact solver limited to " + std::to_string(kOracleLimit) + " pixels");
    }
    const ExactPlan plan = exact_wasserstein(p, q, build_cost(p.geometry()));
    write_json(config.output, {{"value", plan.value}, {"iterations", plan.iterations}});
    log << "W = " << std::setprecision(12) << plan.value << '\n';
    return kExitOk;
  });
}

namespace {

struct Feature {
  double src_x, src_y, tgt_x, tgt_y;
};

std::vector<Feature> read_features(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<Feature> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> f;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        f.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (first && !numeric) {  // header
      first = false;
      continue;
    }
    first = false;
    if (!numeric || f.size() != 4) throw FormatError("features: expected src_x,src_y,tgt_x,tgt_y");
    out.push_back({f[0], f[1], f[2], f[3]});
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

int cmd_compare_features(const CompareConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    std::ifstream sin(config.bundle / "summary.json");
    if (!sin) throw FormatError("no summary.json in " + config.bundle.string());
    const json summary = json::parse(sin);
    const double dt = summary.at("dt_s").get<double>();
    const double px = summary.at("pixel_size_m").get<double>();
    const F32Raster vx = read_f32(config.bundle / "vx.f32");
    const F32Raster vy = read_f32(config.bundle / "vy.f32");
    if (vx.width != vy.width || vx.height != vy.height) {
      throw FormatError("vx and vy rasters differ in size");
    }
    const auto features = read_features(config.features);
    std::optional<std::vector<NccMatch>> ncc;
    if (config.ncc) ncc = read_ncc_csv(*config.ncc);

    json rows = json::array();
    std::vector<double> ot_err, ncc_err;
    for (const Feature& f : features) {
      const int c = static_cast<int>(std::lround(f.src_x));
      const int r = static_cast<int>(std::lround(f.src_y));
      if (c < 0 || r < 0 || c >= vx.width || r >= vx.height) {
        throw ParameterError("feature source pixel outside the grid");
      }
      const double mdx = (f.tgt_x - f.src_x) * px, mdy = (f.tgt_y - f.src_y) * px;
      json row = {{"src_x", f.src_x}, {"src_y", f.src_y}, {"tgt_x", f.tgt_x}, {"tgt_y", f.tgt_y},
                  {"manual_dx_m", mdx}, {"manual_dy_m", mdy}};
      const std::size_t i = static_cast<std::size_t>(r) * vx.width + c;
      if (vx.values[i] == kNoData || vy.values[i] == kNoData) {
        row["flagged"] = true;
        row["reason"] = "nodata";
        row["error_m"] = nullptr;
      } else {
        const double odx = vx.values[i] * dt, ody = vy.values[i] * dt;
        const double err = std::hypot(odx - mdx, ody - mdy);
        row["flagged"] = false;
        row["ot_dx_m"] = odx;
        row["ot_dy_m"] = ody;
        row["error_m"] = err;
        ot_err.push_back(err);
      }
      if (ncc) {
        if (ncc->empty()) {
          row["ncc_error_m"] = nullptr;
        } else {
          const NccMatch* best = &ncc->front();
          double best_d = std::numeric_limits<double>::infinity();
          for (const auto& m : *ncc) {
            const double d = std::hypot(m.center_x - f.src_x, m.center_y - f.src_y);
            if (d < best_d) {
              best_d = d;
              best = &m;
            }
          }
          const double e = std::hypot(best->dx * px - mdx, best->dy * px - mdy);
          row["ncc_error_m"] = e;
          ncc_err.push_back(e);
        }
      }
      rows.push_back(std::move(row));
    }

    json report = {{"count", features.size()},
                   {"used", ot_err.size()},
                   {"flagged", features.size() - ot_err.size()},
                   {"median_defined", !ot_err.empty()},
                   {"median_abs_error_m", ot_err.empty() ? json(nullptr) : json(median(ot_err))},
                   {"features", rows}};
    if (ncc) {
      report["ncc_median_defined"] = !ncc_err.empty();
      report["ncc_median_abs_error_m"] = ncc_err.empty() ? json(nullptr) : json(median(ncc_err));
    }
    write_json(config.output, report);
    if (ot_err.empty()) {
      log << "no usable features; median undefined\n";
    } else {
      log << "median absolute error " << median(ot_err) << " m over " << ot_err.size()
          << " features\n";
    }
    return kExitOk;
  });
}

}  // namespace floeot::cli
