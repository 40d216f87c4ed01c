// Command-line frontend: calibrate a light-field camera from checkerboard
// observations, rectify images, refine a calibration from scene tracks,
// tabulate depth errors, and generate synthetic datasets.
//
// Exit codes: 0 success, 2 invalid input (unparsable file or flag), 3
// algorithmic failure (calibration/refinement could not produce a result).

#include "lfcal/lfcal.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;
using namespace lfcal;

namespace {

// ---------------------------------------------------------------------------
// Compound-flag parsers. All failures are ParseError, i.e. exit code 2.
// ---------------------------------------------------------------------------

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t at = s.find(sep, start);
    parts.push_back(s.substr(start, at - start));
    if (at == std::string::npos) break;
    start = at + 1;
  }
  return parts;
}

double parse_flag_double(const std::string& token, const std::string& flag) {
  try {
    size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size() || !std::isfinite(v)) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    fail("ParseError", flag + ": '" + token + "' is not a finite number");
  }
}

int parse_flag_int(const std::string& token, const std::string& flag) {
  try {
    size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    fail("ParseError", flag + ": '" + token + "' is not an integer");
  }
}

/// "COLSxROWS:SIZE", e.g. "9x6:0.03" for 9x6 inner corners of 30 mm squares.
CheckerboardSpec parse_pattern(const std::string& s) {
  const auto main = split(s, ':');
  const auto dims = split(main[0], 'x');
  if (main.size() != 2 || dims.size() != 2)
    fail("ParseError", "--pattern expects COLSxROWS:SIZE, got '" + s + "'");
  CheckerboardSpec spec;
  spec.inner_cols = parse_flag_int(dims[0], "--pattern");
  spec.inner_rows = parse_flag_int(dims[1], "--pattern");
  spec.square_size = parse_flag_double(main[1], "--pattern");
  return spec;
}

/// "AxB" (reference defaults to the central view) or "AxB:REF_A,REF_B".
ViewGrid parse_grid(const std::string& s) {
  const auto main = split(s, ':');
  const auto dims = split(main[0], 'x');
  if (main.size() > 2 || dims.size() != 2)
    fail("ParseError", "--grid expects AxB or AxB:REF_A,REF_B, got '" + s + "'");
  ViewGrid grid;
  grid.rows_a = parse_flag_int(dims[0], "--grid");
  grid.cols_b = parse_flag_int(dims[1], "--grid");
  if (main.size() == 2) {
    const auto ref = split(main[1], ',');
    if (ref.size() != 2) fail("ParseError", "--grid reference expects REF_A,REF_B");
    grid.ref_a = parse_flag_int(ref[0], "--grid");
    grid.ref_b = parse_flag_int(ref[1], "--grid");
  } else {
    grid.ref_a = (grid.rows_a - 1) / 2;
    grid.ref_b = (grid.cols_b - 1) / 2;
  }
  grid.validate();
  return grid;
}

std::pair<int, int> parse_image_size(const std::string& s) {
  const auto dims = split(s, 'x');
  if (dims.size() != 2) fail("ParseError", "--image-size expects WxH, got '" + s + "'");
  const int w = parse_flag_int(dims[0], "--image-size");
  const int h = parse_flag_int(dims[1], "--image-size");
  if (w < 1 || h < 1) fail("ParseError", "--image-size dimensions must be positive");
  return {w, h};
}

/// "rotz:S,trans:S,px:S" in any order and subset; unknown keys are errors.
NoiseSpec parse_noise(const std::string& s) {
  NoiseSpec noise;
  if (s.empty()) return noise;
  for (const std::string& part : split(s, ',')) {
    const auto kv = split(part, ':');
    if (kv.size() != 2) fail("ParseError", "--noise expects key:value pairs, got '" + part + "'");
    const double v = parse_flag_double(kv[1], "--noise " + kv[0]);
    if (kv[0] == "rotz")
      noise.rot_z_sigma = v;
    else if (kv[0] == "trans")
      noise.trans_sigma = v;
    else if (kv[0] == "px")
      noise.pixel_sigma = v;
    else
      fail("ParseError", "--noise key must be rotz, trans or px, got '" + kv[0] + "'");
  }
  noise.validate();
  return noise;
}

struct DepthRange {
  double z_min = 0.0;
  double z_max = 0.0;
  int steps = 0;
};

/// "ZMIN:ZMAX:STEPS"; the two-field form "ZMIN:ZMAX" leaves steps at 0 for
/// callers with their own default.
DepthRange parse_range(const std::string& s, const char* flag) {
  const auto parts = split(s, ':');
  if (parts.size() != 2 && parts.size() != 3)
    fail("ParseError", std::string(flag) + " expects ZMIN:ZMAX[:STEPS], got '" + s + "'");
  DepthRange range;
  range.z_min = parse_flag_double(parts[0], flag);
  range.z_max = parse_flag_double(parts[1], flag);
  if (parts.size() == 3) range.steps = parse_flag_int(parts[2], flag);
  return range;
}

std::vector<double> parse_levels(const std::string& s) {
  std::vector<double> levels;
  for (const std::string& part : split(s, ','))
    levels.push_back(parse_flag_double(part, "--levels"));
  return levels;
}

// ---------------------------------------------------------------------------
// Shared helpers.
// ---------------------------------------------------------------------------

std::string view_stem(int view) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "view_%03d", view);
  return buf;
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail("IoError", "cannot create directory '" + dir + "'");
}

void warn_on_rotation_spread(const LightFieldCalibration& calib) {
  Vec3 mean = Vec3::Zero();
  for (const ViewPose& pose : calib.poses_rel_reference) mean += pose.rvec;
  mean /= static_cast<double>(calib.poses_rel_reference.size());
  double spread = 0.0;
  for (const ViewPose& pose : calib.poses_rel_reference)
    spread = std::max(spread, (pose.rvec - mean).norm());
  if (spread > kRotationSpreadWarning)
    std::cerr << "warning: rotation spread " << spread << " rad exceeds "
              << kRotationSpreadWarning
              << "; averaging-based rectification may crop or misalign views\n";
}

void print_filter_report(const FilterReport& report) {
  std::printf("tracks: input=%d after_dedup=%d after_chain=%d after_epipolar=%d "
              "after_triangulation=%d median_reproj=%.6f\n",
              report.input_count, report.after_dedup, report.after_chain, report.after_epipolar,
              report.after_triangulation, report.median_reproj);
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string observations;
  std::string pattern;
  std::string grid;
  std::string image_size;
  std::string out;
};

/// Per-view E_PnP: for every frame the pattern pose is recovered by PnP in
/// the reference view, chained through each view's relative pose, and the
/// pattern reprojected; the per-view RMS of those residuals is the metric
/// the summary line averages.
std::vector<double> per_view_pnp_rms(const std::vector<PatternObservation>& observations,
                                     const CheckerboardSpec& spec,
                                     const LightFieldCalibration& calib) {
  const int n_views = calib.grid.size();
  const int ref = calib.grid.reference_index();
  const std::vector<WorldPoint> world = pattern_world_points(spec);

  std::map<std::pair<int, int>, const PatternObservation*> cells;
  int n_frames = 0;
  for (const PatternObservation& obs : observations) {
    cells[{obs.frame_index, obs.view_index}] = &obs;
    n_frames = std::max(n_frames, obs.frame_index + 1);
  }

  std::vector<double> sq(n_views, 0.0);
  std::vector<long> count(n_views, 0);
  for (int f = 0; f < n_frames; ++f) {
    const auto ref_cell = cells.find({f, ref});
    if (ref_cell == cells.end()) continue;
    const ViewPose pattern_pose =
        solve_pnp(world, ref_cell->second->corners, calib.per_view[ref].k, calib.per_view[ref].d);
    const Mat3 r_pattern = rodrigues_to_matrix(pattern_pose.rvec);
    for (int i = 0; i < n_views; ++i) {
      const auto cell = cells.find({f, i});
      if (cell == cells.end()) continue;
      const Mat3 r_view = rodrigues_to_matrix(calib.poses_rel_reference[i].rvec);
      const IntrinsicMatrix& k = calib.per_view[i].k;
      for (size_t c = 0; c < world.size(); ++c) {
        const Vec3 x_ref = r_pattern * world[c].vec() + pattern_pose.tvec;
        const Vec3 xc = r_view * x_ref + calib.poses_rel_reference[i].tvec;
        const PixelPoint ideal{k.fx * xc.x() / xc.z() + k.cx, k.fy * xc.y() / xc.z() + k.cy};
        const PixelPoint projected = apply_distortion(calib.per_view[i].d, ideal);
        const double d = distance(projected, cell->second->corners[c]);
        sq[i] += d * d;
        ++count[i];
      }
    }
  }
  for (int i = 0; i < n_views; ++i) sq[i] = count[i] ? std::sqrt(sq[i] / count[i]) : 0.0;
  return sq;
}

int cmd_calibrate(const CalibrateArgs& args) {
  const CheckerboardSpec spec = parse_pattern(args.pattern);
  const ViewGrid grid = parse_grid(args.grid);
  const auto [width, height] = parse_image_size(args.image_size);

  const std::vector<PatternObservation> observations = read_observations(args.observations);
  const LightFieldCalibration calib =
      calibrate_lightfield(observations, spec, grid, width, height);

  const std::vector<double> pnp_rms = per_view_pnp_rms(observations, spec, calib);
  double mono_sum = 0.0;
  double pnp_sum = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    std::printf("view %d: E_mono=%.6f E_PnP=%.6f\n", i, calib.per_view[i].rms_mono, pnp_rms[i]);
    mono_sum += calib.per_view[i].rms_mono;
    pnp_sum += pnp_rms[i];
  }
  std::printf("E_mono=%.6f E_PnP=%.6f\n", mono_sum / grid.size(), pnp_sum / grid.size());

  const RectificationResult rect = rectified_projections(calib, width, height);
  warn_on_rotation_spread(calib);

  CalibrationDocument doc;
  doc.width = width;
  doc.height = height;
  doc.calibration = calib;
  doc.set_rectification(rect, grid);
  write_calibration(args.out, doc);
  std::printf("wrote %s\n", args.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// rectify
// ---------------------------------------------------------------------------

struct RectifyArgs {
  std::string calibration;
  std::string images;
  std::string out;
  std::string emit_luts;
};

int cmd_rectify(const RectifyArgs& args) {
  const CalibrationDocument doc = read_calibration(args.calibration);
  if (!doc.has_rectification)
    fail("MissingRectification",
         "'" + args.calibration + "' carries no rectification block; run calibrate first");
  const LightFieldCalibration& calib = doc.calibration;
  warn_on_rotation_spread(calib);

  if (!args.out.empty()) ensure_directory(args.out);
  if (!args.emit_luts.empty()) ensure_directory(args.emit_luts);

  const Mat3 r_r = rodrigues_to_matrix(doc.r_r_rvec);
  for (int i = 0; i < calib.grid.size(); ++i) {
    const Mat3 r_bar = r_r * rodrigues_to_matrix(calib.poses_rel_reference[i].rvec).transpose();
    const LookupTable lut = build_lut(calib.per_view[i], calib.poses_rel_reference[i], r_bar,
                                      doc.k_r, doc.width, doc.height);
    std::printf("view %d: retained %.4f\n", i, retained_fraction(lut));

    if (!args.emit_luts.empty())
      write_lut((fs::path(args.emit_luts) / (view_stem(i) + ".lut")).string(), lut);

    if (!args.images.empty()) {
      fs::path src = fs::path(args.images) / (view_stem(i) + ".pgm");
      if (!fs::exists(src)) src = fs::path(args.images) / (view_stem(i) + ".ppm");
      if (!fs::exists(src))
        fail("IoError", "no image for view " + std::to_string(i) + " under '" + args.images +
                            "' (expected " + view_stem(i) + ".pgm or .ppm)");
      const Image remapped = remap_image(read_image(src.string()), lut);
      write_image((fs::path(args.out) / src.filename()).string(), remapped);
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// refine
// ---------------------------------------------------------------------------

struct RefineArgs {
  std::string calibration;
  std::vector<std::string> tracks;
  double epipolar_thresh = 2.0;
  int max_frames = 10;
  double rms_thresh = 0.5;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_refine(const RefineArgs& args) {
  const CalibrationDocument doc = read_calibration(args.calibration);
  const ViewGrid& grid = doc.calibration.grid;
  const std::vector<int> order = chain_order(grid);

  std::vector<MatchChain> frames;
  for (const std::string& path : args.tracks) {
    const std::vector<Track> tracks = read_tracks(path, grid.size());
    std::vector<const Track*> complete;
    for (const Track& t : tracks)
      if (t.complete()) complete.push_back(&t);
    if (complete.empty())
      fail("EmptyInput", "'" + path + "' holds no complete tracks");
    if (complete.size() < tracks.size())
      std::fprintf(stderr, "warning: %zu incomplete track(s) in '%s' skipped\n",
                   tracks.size() - complete.size(), path.c_str());
    MatchChain chain(order.size() - 1);
    for (size_t s = 0; s + 1 < order.size(); ++s)
      for (const Track* t : complete)
        chain[s].push_back({t->obs[order[s]], t->obs[order[s + 1]]});
    frames.push_back(std::move(chain));
  }

  RefineConfig config;
  config.epipolar_threshold = args.epipolar_thresh;
  config.max_frames = args.max_frames;
  config.rms_threshold = args.rms_thresh;
  config.seed = args.seed;
  const RefinementResult result = refine(frames, doc.calibration, config);

  print_filter_report(result.report);
  std::printf("rms_before=%.6f\n", result.rms_before);
  std::printf("stage rms: points=%.6f intrinsics=%.6f full=%.6f\n", result.stage_rms[0],
              result.stage_rms[1], result.stage_rms[2]);
  std::printf("rms_after=%.6f (%d frame(s) used)\n", result.rms_after, result.frames_used);

  CalibrationDocument out_doc;
  out_doc.width = doc.width;
  out_doc.height = doc.height;
  out_doc.calibration = result.calibration;
  out_doc.set_rectification(rectified_projections(result.calibration, doc.width, doc.height),
                            grid);
  write_calibration(args.out, out_doc);
  std::printf("wrote %s\n", args.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// depth-error
// ---------------------------------------------------------------------------

struct DepthErrorArgs {
  double focal = 0.0;
  double baseline = 0.0;
  double reproj_error = 0.0;
  std::string range;
  std::string variant = "one-sided";
  std::string out;
};

int cmd_depth_error(const DepthErrorArgs& args) {
  const DepthRange range = parse_range(args.range, "--range");
  if (range.steps < 1) fail("InvalidRange", "--range needs ZMIN:ZMAX:STEPS with STEPS >= 1");
  DepthErrorVariant variant;
  if (args.variant == "one-sided")
    variant = DepthErrorVariant::one_sided;
  else if (args.variant == "symmetric")
    variant = DepthErrorVariant::symmetric;
  else
    fail("ParseError", "--variant must be one-sided or symmetric, got '" + args.variant + "'");

  const std::vector<DepthErrorRow> rows = depth_error_table(
      args.focal, args.baseline, args.reproj_error, range.z_min, range.z_max, range.steps,
      variant);
  write_file_atomic(args.out, depth_error_csv(rows));
  std::printf("z=%.6g m: delta_z=%.6g m\n", rows.front().z, rows.front().delta_z);
  std::printf("z=%.6g m: delta_z=%.6g m\n", rows.back().z, rows.back().delta_z);
  std::printf("wrote %zu rows to %s\n", rows.size(), args.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string grid = "5x5";
  std::string image_size = "512x512";
  double focal = 500.0;
  double baseline = 0.1;
  std::string noise;
  double outliers = 0.0;
  std::string pattern;
  int frames = 30;
  int points = 150;
  std::string depth = "2.0:4.0";
  std::uint64_t seed = 0;
  std::string out;
  std::string sweep;  // "trans" or "rotz" switches to sweep mode
  std::string levels;
  int trials = 10;
};

std::string points_to_string(const std::vector<WorldPoint>& points) {
  std::string out = "# track_id x y z\n";
  for (size_t i = 0; i < points.size(); ++i)
    out += std::to_string(i) + " " + format_double(points[i].x) + " " +
           format_double(points[i].y) + " " + format_double(points[i].z) + "\n";
  return out;
}

int cmd_simulate(const SimulateArgs& args) {
  const ViewGrid grid = parse_grid(args.grid);
  const auto [width, height] = parse_image_size(args.image_size);
  const NoiseSpec noise = parse_noise(args.noise);
  const DepthRange depth = parse_range(args.depth, "--depth");
  const SyntheticRig rig = make_rig(grid, width, height, args.focal, args.baseline);
  ensure_directory(args.out);

  if (!args.sweep.empty()) {
    NoiseKind kind;
    if (args.sweep == "trans")
      kind = NoiseKind::translation;
    else if (args.sweep == "rotz")
      kind = NoiseKind::rotation_z;
    else
      fail("ParseError", "--sweep must be trans or rotz, got '" + args.sweep + "'");
    if (args.levels.empty()) fail("ParseError", "--sweep needs --levels L1,L2,...");

    SweepConfig config;
    config.n_points = args.points;
    config.depth_min = depth.z_min;
    config.depth_max = depth.z_max;
    config.pixel_sigma = noise.pixel_sigma;
    config.seed = args.seed;
    const std::vector<SweepRow> rows =
        noise_sweep(rig, kind, parse_levels(args.levels), args.trials, config);

    const std::string csv_path = (fs::path(args.out) / "sweep.csv").string();
    write_file_atomic(csv_path, sweep_csv(rows));
    const std::vector<double> means = sweep_level_means(rows);
    const std::vector<double> levels = parse_levels(args.levels);
    for (size_t i = 0; i < means.size(); ++i)
      std::printf("level %.6g: mean rect_error %.6f px\n", levels[i], means[i]);
    std::printf("wrote %s\n", csv_path.c_str());
    return 0;
  }

  // Plain dataset mode: a perturbed rig observed with pixel noise, plus the
  // unperturbed rig's calibration as the nominal starting point.
  const SyntheticRig bent = perturb_rig(rig, [&] {
    NoiseSpec rig_noise = noise;
    rig_noise.pixel_sigma = 0.0;
    rig_noise.seed = args.seed;
    return rig_noise;
  }());

  NoiseSpec obs_noise;
  obs_noise.pixel_sigma = noise.pixel_sigma;
  obs_noise.outlier_fraction = args.outliers;
  obs_noise.seed = args.seed + 1;
  const SceneTracks scene =
      render_scene_tracks(bent, args.points, depth.z_min, depth.z_max, obs_noise);
  write_tracks((fs::path(args.out) / "tracks.txt").string(), scene.tracks);
  write_file_atomic((fs::path(args.out) / "ground_truth.txt").string(),
                    points_to_string(scene.ground_truth));

  if (!args.pattern.empty()) {
    const CheckerboardSpec spec = parse_pattern(args.pattern);
    Rng rng(args.seed + 2);
    const std::vector<ViewPose> placements =
        make_pattern_placements(bent, spec, args.frames, rng);
    const std::vector<PatternObservation> observations =
        render_pattern_frames(bent, spec, placements, noise.pixel_sigma, args.seed + 3);
    write_observations((fs::path(args.out) / "observations.txt").string(), observations);
  }

  // The true (perturbed) rig, written as the ground-truth calibration.
  CalibrationDocument doc;
  doc.width = width;
  doc.height = height;
  doc.calibration = bent.as_calibration();
  write_calibration((fs::path(args.out) / "calibration_true.txt").string(), doc);

  // The nominal rig the refinement starts from.
  doc.calibration = rig.as_calibration();
  doc.set_rectification(rectified_projections(doc.calibration, width, height), grid);
  write_calibration((fs::path(args.out) / "calibration_nominal.txt").string(), doc);

  std::printf("wrote %d track(s)%s under %s\n", static_cast<int>(scene.tracks.size()),
              args.pattern.empty() ? "" : " and pattern observations", args.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point.
// ---------------------------------------------------------------------------

int exit_code_for(const Error& e) {
  static const std::set<std::string> input_kinds = {
      "ParseError",     "IoError",           "InvalidRange",     "InvalidGrid",
      "InvalidRig",     "InvalidNoise",      "InvalidThreshold", "InvalidImage",
      "InvalidDistortion", "InvalidPattern", "EmptyInput",       "SizeMismatch",
      "DimensionMismatch", "BadCornerOrder", "MissingRectification"};
  return input_kinds.count(e.kind()) ? 2 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Light-field camera calibration, rectification and refinement"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  CLI::App* calibrate = app.add_subcommand(
      "calibrate", "Calibrate a camera grid from checkerboard observations");
  calibrate->add_option("--observations", cal.observations, "Observation file (frame view corner x y)")
      ->required();
  calibrate->add_option("--pattern", cal.pattern, "Checkerboard as COLSxROWS:SIZE, e.g. 9x6:0.03")
      ->required();
  calibrate->add_option("--grid", cal.grid, "View grid as AxB:REF_A,REF_B")->required();
  calibrate->add_option("--image-size", cal.image_size, "View dimensions as WxH")->required();
  calibrate->add_option("--out", cal.out, "Calibration file to write")->required();

  RectifyArgs rect;
  CLI::App* rectify = app.add_subcommand("rectify", "Remap views onto the rectified grid");
  rectify->add_option("--calibration", rect.calibration, "Calibration with a rectification block")
      ->required();
  rectify->add_option("--images", rect.images, "Directory of view_NNN.pgm/.ppm inputs");
  rectify->add_option("--out", rect.out, "Directory for remapped images");
  rectify->add_option("--emit-luts", rect.emit_luts, "Directory for binary lookup tables");

  RefineArgs ref;
  CLI::App* refine_cmd = app.add_subcommand("refine", "Refine a calibration from scene tracks");
  refine_cmd->add_option("--calibration", ref.calibration, "Starting calibration")->required();
  refine_cmd->add_option("--tracks", ref.tracks, "Track file(s), one per frame")
      ->required()
      ->expected(-1);
  refine_cmd->add_option("--epipolar-thresh", ref.epipolar_thresh,
                         "Sampson distance gate in pixels");
  refine_cmd->add_option("--max-frames", ref.max_frames, "Frame budget");
  refine_cmd->add_option("--rms-thresh", ref.rms_thresh, "Early-stop RMS in pixels");
  refine_cmd->add_option("--seed", ref.seed, "RANSAC seed");
  refine_cmd->add_option("--out", ref.out, "Refined calibration file to write")->required();

  DepthErrorArgs depth;
  CLI::App* depth_cmd =
      app.add_subcommand("depth-error", "Tabulate depth error vs distance (CSV)");
  depth_cmd->add_option("--focal", depth.focal, "Focal length in pixels")->required();
  depth_cmd->add_option("--baseline", depth.baseline, "Baseline in meters")->required();
  depth_cmd->add_option("--reproj-error", depth.reproj_error, "Disparity error in pixels")
      ->required();
  depth_cmd->add_option("--range", depth.range, "Depth sweep as ZMIN:ZMAX:STEPS")->required();
  depth_cmd->add_option("--variant", depth.variant,
                        "one-sided (fb/d - fb/(d+E)) or symmetric (fb/(d-E) - fb/(d+E)); the "
                        "one-sided form matches reported depth-loss figures");
  depth_cmd->add_option("--out", depth.out, "CSV file to write")->required();

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Generate synthetic datasets and sweeps");
  simulate->add_option("--grid", sim.grid, "View grid as AxB[:REF_A,REF_B] (default 5x5)");
  simulate->add_option("--image-size", sim.image_size, "View dimensions as WxH (default 512x512)");
  simulate->add_option("--focal", sim.focal, "Focal length in pixels (default 500)");
  simulate->add_option("--baseline", sim.baseline, "Grid baseline in meters (default 0.1)");
  simulate->add_option("--noise", sim.noise, "rotz:SIGMA,trans:SIGMA,px:SIGMA (any subset)");
  simulate->add_option("--outliers", sim.outliers, "Fraction of tracks given a gross outlier");
  simulate->add_option("--pattern", sim.pattern,
                       "Also render checkerboard frames (COLSxROWS:SIZE)");
  simulate->add_option("--frames", sim.frames, "Pattern frames to render (default 30)");
  simulate->add_option("--points", sim.points, "Scene points to render (default 150)");
  simulate->add_option("--depth", sim.depth, "Scene depth range ZMIN:ZMAX (default 2.0:4.0)");
  simulate->add_option("--seed", sim.seed, "Dataset seed");
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--sweep", sim.sweep, "Noise-sweep mode: trans or rotz");
  simulate->add_option("--levels", sim.levels, "Sweep noise levels L1,L2,...");
  simulate->add_option("--trials", sim.trials, "Sweep trials per level (default 10)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*calibrate) return cmd_calibrate(cal);
    if (*rectify) return cmd_rectify(rect);
    if (*refine_cmd) return cmd_refine(ref);
    if (*depth_cmd) return cmd_depth_error(depth);
    if (*simulate) return cmd_simulate(sim);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
