// floeot: entropic optimal transport deformation tracking between two images.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "floeot/cli.hpp"

namespace {

using namespace floeot::cli;

void add_pair(CLI::App* cmd, SolveInputs& in) {
  cmd->add_option("source", in.source, "source image (P5 PGM)")->required();
  cmd->add_option("target", in.target, "target image (P5 PGM)")->required();
  cmd->add_option("--source-meta", in.source_meta, "source sidecar (default: <source>.json)");
  cmd->add_option("--target-meta", in.target_meta, "target sidecar (default: <target>.json)");
}

void add_preprocess(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--mask-threshold", c.mask_threshold, "ice threshold on raw intensity")
      ->capture_default_str();
  cmd->add_option("--floor", c.floor, "background floor relative to total intensity")
      ->capture_default_str();
  cmd->add_flag("--equalize", c.equalize, "contrast-limited histogram equalization of ice pixels");
  cmd->add_option("--tile", c.tile, "equalization tile size")->capture_default_str();
  cmd->add_option("--clip", c.clip, "equalization clip limit")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense ice deformation from image pairs via entropic optimal transport"};
  app.require_subcommand(1);

  SolveInputs pair;
  RunConfig run;
  std::optional<double> dt;

  auto* solve = app.add_subcommand("solve", "transport distance, velocity and strain fields");
  add_pair(solve, pair);
  add_preprocess(solve, run);
  solve->add_option("--eps", run.eps, "entropic regularization")->capture_default_str();
  solve->add_option("--tol", run.tol, "stopping tolerance")->capture_default_str();
  solve->add_option("--max-iter", run.max_iter, "iteration cap")->capture_default_str();
  solve->add_option("--mode", run.mode, "kernel: auto, dense or conv")
      ->check(CLI::IsMember({"auto", "dense", "conv"}))
      ->capture_default_str();
  solve->add_flag("--log-domain", run.log_domain, "iterate on log scalings");
  solve->add_option("-o,--output", run.output, "output directory")->capture_default_str();
  solve->add_option("--dt", dt, "seconds between images (default: sidecar timestamps)");
  solve->add_option("--clip-strain", run.clip_strain, "clip principal strain to +-bound");
  solve->add_option("--thin", run.thin, "also write vectors.csv with every k-th pixel")
      ->check(CLI::NonNegativeNumber);

  NccConfig ncc;
  int window = ncc.options.window;
  std::optional<int> radius, stride;
  auto* ncc_cmd = app.add_subcommand("ncc", "windowed normalized cross-correlation baseline");
  add_pair(ncc_cmd, pair);
  ncc_cmd->add_option("--window", window, "tile size in pixels")->capture_default_str();
  ncc_cmd->add_option("--search-radius", radius, "max shift in pixels (default window/2)");
  ncc_cmd->add_option("--stride", stride, "tile step in pixels (default window)");
  ncc_cmd->add_option("--threshold", ncc.options.threshold, "minimum correlation")
      ->capture_default_str();
  ncc_cmd->add_option("--dt", dt, "seconds between images");
  ncc_cmd->add_option("-o,--output", ncc.output, "CSV path")->capture_default_str();

  SynthConfig syn;
  auto* synth = app.add_subcommand("synth", "render a synthetic floe pair");
  synth->add_option("--kind", syn.kind,
                    "translate, split_equal, split_unequal, split_quad, multi_floe, rotate")
      ->capture_default_str();
  synth->add_option("--size", syn.size, "grid size")->capture_default_str();
  synth->add_option("--shape", syn.shape, "polygon, disc or block")->capture_default_str();
  synth->add_option("-t", syn.t, "pseudo-time of the target frame")->capture_default_str();
  synth->add_option("-o,--output", syn.output, "output directory")->capture_default_str();

  SweepConfig sw;
  auto* sweep = app.add_subcommand("sweep", "W_eps(t) - W_eps(0) curves for a scenario");
  sweep->add_option("--kind", sw.kind, "scenario kind")->capture_default_str();
  sweep->add_option("--size", sw.size, "grid size")->capture_default_str();
  sweep->add_option("--shape", sw.shape, "polygon, disc or block")->capture_default_str();
  sweep->add_option("--eps", sw.eps, "epsilon values")->delimiter(',')->capture_default_str();
  sweep->add_option("--t-steps", sw.t_steps, "samples of t in [0, 1]")->capture_default_str();
  sweep->add_option("--tol", sw.tol, "stopping tolerance")->capture_default_str();
  sweep->add_option("--max-iter", sw.max_iter, "iteration cap")->capture_default_str();
  sweep->add_option("--mode", sw.mode, "kernel: auto, dense or conv")
      ->check(CLI::IsMember({"auto", "dense", "conv"}))
      ->capture_default_str();
  sweep->add_option("--floor", sw.floor, "background floor")->capture_default_str();
  sweep->add_option("-o,--output", sw.output, "CSV path")->capture_default_str();

  RunConfig orc;
  orc.output = "oracle.json";
  auto* oracle = app.add_subcommand("oracle", "exact transport value for small images");
  add_pair(oracle, pair);
  add_preprocess(oracle, orc);
  oracle->add_option("-o,--output", orc.output, "JSON path")->capture_default_str();

  CompareConfig cmp;
  auto* compare = app.add_subcommand("compare-features", "score a solve against manual features");
  compare->add_option("bundle", cmp.bundle, "solve output directory")->required();
  compare->add_option("features", cmp.features, "CSV src_x,src_y,tgt_x,tgt_y")->required();
  compare->add_option("--ncc", cmp.ncc, "NCC CSV to score as well");
  compare->add_option("-o,--output", cmp.output, "JSON report path")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (*solve) {
    run.dt = dt;
    return cmd_solve(pair, run, std::cerr);
  }
  if (*ncc_cmd) {
    ncc.options.window = window;
    ncc.options.search_radius = radius;
    ncc.options.stride = stride;
    ncc.dt = dt;
    return cmd_ncc(pair, ncc, std::cerr);
  }
  if (*synth) return cmd_synth(syn, std::cerr);
  if (*sweep) return cmd_sweep(sw, std::cerr);
  if (*oracle) return cmd_oracle(pair, orc, std::cerr);
  return cmd_compare_features(cmp, std::cerr);
}
