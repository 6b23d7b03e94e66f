// p2x command line tool: phantom -> project -> prepare -> train -> infer ->
// eval -> bench pipeline, all stages driven by one run configuration.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "p2x/metrics.hpp"
#include "p2x/runconfig.hpp"

namespace fs = std::filesystem;
using namespace p2x;

namespace {

struct Context {
  RunConfig config;
  std::string out;
  ArtifactStamp stamp;
};

std::string stamp_comment(const ArtifactStamp& st) {
  return "config=" + st.config_hash + " seed=" + std::to_string(st.seed) + " format=" +
         std::to_string(st.format_version);
}

std::string volume_base(const Context& ctx, const std::string& subject, const char* channel) {
  return ctx.out + "/volumes/" + subject + "_" + channel;
}

std::string set_dir_rel(const std::string& subject, Channel channel, TrajectoryLabel label) {
  return "proj/" + subject + "_" + channel_name(channel) + "_" + trajectory_label_name(label);
}

std::vector<CohortEntry> read_cohort(const Context& ctx) {
  std::ifstream f(ctx.out + "/volumes/cohort.txt");
  if (!f) throw IoError("cannot open " + ctx.out + "/volumes/cohort.txt (run `p2x phantom` first)");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_cohort_manifest(ss.str());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << text;
}

int cmd_phantom(Context& ctx) {
  fs::create_directories(ctx.out + "/volumes");
  const Cohort cohort = generate_cohort(ctx.config.phantom_subjects(), ctx.config.phantom_params(),
                                        ctx.config.phantom_truncate_first_n());
  for (std::size_t i = 0; i < cohort.entries.size(); ++i) {
    const auto& id = cohort.entries[i].subject_id;
    save_volume(cohort.pairs[i].ct, volume_base(ctx, id, "ct"), ctx.stamp);
    save_volume(cohort.pairs[i].mr, volume_base(ctx, id, "mr"), ctx.stamp);
  }
  write_text(ctx.out + "/volumes/cohort.txt", serialize_cohort_manifest(cohort, ctx.stamp));
  std::cout << "phantom: wrote " << cohort.entries.size() << " volume pairs to " << ctx.out
            << "/volumes\n";
  return 0;
}

int cmd_project(Context& ctx) {
  const auto cohort = read_cohort(ctx);
  const ConeBeamGeometry geom = ctx.config.geometry();
  const Trajectory train_traj = ctx.config.train_trajectory();
  const Trajectory test_traj = ctx.config.test_trajectory();
  const double step = ctx.config.projector_step_mm();
  const auto test_ids = ctx.config.test_subjects();

  int n_sets = 0;
  for (const auto& entry : cohort) {
    const Volume ct = load_volume(volume_base(ctx, entry.subject_id, "ct"));
    const Volume mr = load_volume(volume_base(ctx, entry.subject_id, "mr"));
    const bool is_test = std::find(test_ids.begin(), test_ids.end(), entry.subject_id) !=
                         test_ids.end();
    const Trajectory& traj = is_test ? test_traj : train_traj;

    auto mr_set = project_trajectory(mr, geom, traj, step, entry.subject_id, Channel::mr);
    auto xr_set = project_trajectory(ct, geom, traj, step, entry.subject_id, Channel::xray);
    save_projection_set(mr_set, ctx.out + "/" + set_dir_rel(entry.subject_id, Channel::mr, traj.label),
                        ctx.stamp);
    save_projection_set(xr_set,
                        ctx.out + "/" + set_dir_rel(entry.subject_id, Channel::xray, traj.label),
                        ctx.stamp);
    n_sets += 2;
  }
  std::cout << "project: wrote " << n_sets << " projection sets to " << ctx.out << "/proj\n";
  return 0;
}

int cmd_prepare(Context& ctx) {
  const auto cohort = read_cohort(ctx);
  const auto test_ids = ctx.config.test_subjects();

  std::vector<ProjectionSet> storage;
  storage.reserve(cohort.size() * 2);
  std::vector<SubjectProjections> subjects;
  SplitSpec split;
  for (const auto& entry : cohort) {
    const bool is_test = std::find(test_ids.begin(), test_ids.end(), entry.subject_id) !=
                         test_ids.end();
    const TrajectoryLabel label = is_test ? TrajectoryLabel::test : TrajectoryLabel::train;
    SubjectProjections subj;
    subj.subject_id = entry.subject_id;
    subj.mr_dir = set_dir_rel(entry.subject_id, Channel::mr, label);
    subj.xray_dir = set_dir_rel(entry.subject_id, Channel::xray, label);
    storage.push_back(load_projection_set(ctx.out + "/" + subj.mr_dir));
    subj.mr = &storage.back();
    storage.push_back(load_projection_set(ctx.out + "/" + subj.xray_dir));
    subj.xray = &storage.back();
    subjects.push_back(subj);
    (is_test ? split.test_subjects : split.train_subjects).push_back(entry.subject_id);
  }

  const DatasetManifest manifest = build_dataset(subjects, split, ctx.config.label_scope());
  save_dataset_manifest(manifest, ctx.out + "/dataset", ctx.stamp);

  // Weight-map previews from the first label view of each subject.
  const nn::LossConfig loss_cfg = ctx.config.loss_config();
  for (const auto& subj : subjects) {
    const auto& label0 = subj.xray->images.front();
    const auto grad = nn::sobel_gradient_map(label0.data, label0.rows, label0.cols);
    nn::LossConfig cfg = loss_cfg;
    cfg.edge_weighting = true;
    const auto map = nn::make_weight_map(grad, label0.rows, label0.cols, cfg);
    save_pgm16(map.data, map.rows, map.cols,
               ctx.out + "/dataset/weightmap_" + subj.subject_id + ".pgm",
               stamp_comment(ctx.stamp));
  }
  std::cout << "prepare: manifest with " << manifest.samples.size() << " paired samples ("
            << split.train_subjects.size() << " train / " << split.test_subjects.size()
            << " test subjects)\n";
  return 0;
}

int cmd_train(Context& ctx) {
  const DatasetManifest manifest = load_dataset_manifest(ctx.out + "/dataset");
  const auto result = nn::train(manifest, ctx.out, ctx.config.arch(), ctx.config.disc_config(),
                                ctx.config.feature_config(), ctx.config.loss_config(),
                                ctx.config.trainer_config(), ctx.out + "/train", ctx.stamp);
  std::string report;
  report += "config_hash=" + ctx.stamp.config_hash + "\n";
  report += "seed=" + std::to_string(ctx.stamp.seed) + "\n";
  report += "format_version=" + std::to_string(ctx.stamp.format_version) + "\n";
  report += "preset=" + ctx.config.get("arch.preset") + "\n";
  report += "threads=" + ctx.config.get("threads") + "\n";
  report += "iterations=" + std::to_string(result.iterations) + "\n";
  report += "train_mae_initial=" + format_double(result.train_mae_initial) + "\n";
  report += "train_mae_final=" + format_double(result.train_mae_final) + "\n";
  report += "edge_mae_median_final=" + format_double(result.edge_mae_median_final) + "\n";
  write_text(ctx.out + "/train/train_report.txt", report);
  std::cout << "train: " << result.iterations << " iterations, masked MAE "
            << format_double(result.train_mae_initial) << "% -> "
            << format_double(result.train_mae_final) << "% on training pairs\n";
  return 0;
}

int cmd_infer(Context& ctx) {
  const DatasetManifest manifest = load_dataset_manifest(ctx.out + "/dataset");
  const nn::Generator generator =
      nn::load_generator(ctx.out + "/train/checkpoint.ckpt", ctx.config.arch());
  const auto test_ids = ctx.config.test_subjects();
  const ConeBeamGeometry geom = ctx.config.geometry();

  for (const auto& id : test_ids) {
    const auto mr_set = load_projection_set(ctx.out + "/" + set_dir_rel(id, Channel::mr,
                                                                        TrajectoryLabel::test));
    const auto subj = manifest.subjects.find(id);
    if (subj == manifest.subjects.end()) throw ContractError("subject '" + id + "' not in manifest");

    ProjectionSet gen_set;
    gen_set.geometry = geom;
    gen_set.trajectory = mr_set.trajectory;
    gen_set.subject_id = id;
    gen_set.channel = Channel::generated;
    for (const auto& img : mr_set.images) {
      nn::Tensor input({1, 1, img.rows, img.cols});
      input.data = img.data;
      normalize(input.data, subj->second.mr);
      auto out = generator.forward(nn::constant(input));
      ProjectionImage gen_img(img.rows, img.cols);
      gen_img.pose = img.pose;
      gen_img.data = std::move(out->value.data);
      denormalize(gen_img.data, manifest.label_stats_for(id));
      gen_set.images.push_back(std::move(gen_img));
    }
    const std::string dir =
        ctx.out + "/" + "generated/" + id + "_generated_test";
    save_projection_set(gen_set, dir, ctx.stamp);
    save_pgm16(gen_set.images.front(), dir + "/view_0000.pgm", stamp_comment(ctx.stamp));
  }
  std::cout << "infer: wrote generated test sets for " << test_ids.size() << " subject(s)\n";
  return 0;
}

int cmd_eval(Context& ctx) {
  const DatasetManifest manifest = load_dataset_manifest(ctx.out + "/dataset");
  const nn::Generator generator =
      nn::load_generator(ctx.out + "/train/checkpoint.ckpt", ctx.config.arch());
  const auto records = evaluate_set(generator, manifest, ctx.out);
  const auto summary = summarize(records);
  fs::create_directories(ctx.out + "/eval");
  write_text(ctx.out + "/eval/metrics.csv", metrics_csv(records, summary, ctx.stamp));
  write_text(ctx.out + "/eval/per_angle.csv", per_angle_csv(per_angle_rows(records), ctx.stamp));
  std::cout << "eval: " << records.size() << " views, MAE " << format_double(summary.mae_mean)
            << " +- " << format_double(summary.mae_std) << " %, SSIM "
            << format_double(summary.ssim_mean) << ", PSNR " << format_double(summary.psnr_mean)
            << " dB\n";
  return 0;
}

std::string cpu_model() {
  std::ifstream f("/proc/cpuinfo");
  std::string line;
  while (std::getline(f, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) return trim(line.substr(colon + 1));
    }
  }
  return "unknown cpu";
}

int cmd_bench(Context& ctx) {
  using clock = std::chrono::steady_clock;
  const int reps = static_cast<int>(ctx.config.get_long("bench.repetitions"));
  const int warmup = static_cast<int>(ctx.config.get_long("bench.warmup"));
  const ConeBeamGeometry geom = ctx.config.geometry();

  // Inference throughput: checkpointed generator when available, otherwise a
  // freshly initialized one.
  std::string weights = "fresh";
  const std::string ckpt = ctx.out + "/train/checkpoint.ckpt";
  nn::Generator generator = [&]() {
    if (fs::exists(ckpt)) {
      weights = "checkpoint";
      return nn::load_generator(ckpt, ctx.config.arch());
    }
    return nn::Generator(ctx.config.arch(), ctx.config.seed());
  }();

  nn::Tensor input({1, 1, geom.det_rows, geom.det_cols});
  std::mt19937_64 rng(ctx.config.seed());
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : input.data) v = static_cast<float>(dist(rng));

  for (int i = 0; i < warmup; ++i) generator.forward(nn::constant(input));
  const auto t0 = clock::now();
  for (int i = 0; i < reps; ++i) generator.forward(nn::constant(input));
  const double infer_s = std::chrono::duration<double>(clock::now() - t0).count();
  const double fps = reps / infer_s;

  // Projector throughput over a mid-size phantom.
  HeadPhantomParams pp = ctx.config.phantom_params();
  const VolumePair pair = generate_head_phantom(pp);
  const int n_views = 8;
  const Trajectory traj = make_test_trajectory(n_views);
  const double step = ctx.config.projector_step_mm();
  project_view(pair.ct, geom, traj.poses[0], step);  // warm
  const auto t1 = clock::now();
  for (const auto& pose : traj.poses) project_view(pair.ct, geom, pose, step);
  const double proj_s = std::chrono::duration<double>(clock::now() - t1).count();
  const double views_per_s = n_views / proj_s;

  std::string report;
  report += "config_hash=" + ctx.stamp.config_hash + "\n";
  report += "seed=" + std::to_string(ctx.stamp.seed) + "\n";
  report += "format_version=" + std::to_string(ctx.stamp.format_version) + "\n";
  report += "fps_infer=" + format_double(fps) + "\n";
  report += "views_per_s_projector=" + format_double(views_per_s) + "\n";
  report += "infer_input=" + std::to_string(geom.det_rows) + "x" + std::to_string(geom.det_cols) +
            "\n";
  report += "repetitions=" + std::to_string(reps) + "\n";
  report += "warmup=" + std::to_string(warmup) + "\n";
  report += "weights=" + weights + "\n";
  report += "hardware=" + cpu_model() + "\n";
  report += "threads=" + std::to_string(thread_cap()) + "\n";
  fs::create_directories(ctx.out + "/bench");
  write_text(ctx.out + "/bench/bench.txt", report);
  std::cout << "bench: fps_infer=" << format_double(fps)
            << " views_per_s_projector=" << format_double(views_per_s) << " (threads "
            << thread_cap() << ")\n";
  return 0;
}

int cmd_demo(Context& ctx) {
  ctx.config.save_file(ctx.out + "/demo.cfg");
  int rc = cmd_phantom(ctx);
  if (rc == 0) rc = cmd_project(ctx);
  if (rc == 0) rc = cmd_prepare(ctx);
  if (rc == 0) rc = cmd_train(ctx);
  if (rc == 0) rc = cmd_infer(ctx);
  if (rc == 0) rc = cmd_eval(ctx);
  if (rc == 0) rc = cmd_bench(ctx);
  if (rc == 0) std::cout << "demo: pipeline complete under " << ctx.out << "\n";
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"p2x: MR-to-X-ray projection translation workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  int threads = -1;
  long seed_override = -1;
  std::vector<std::string> overrides;

  app.add_option("--config", config_path, "Run configuration file");
  app.add_option("--out", out_override, "Output directory (overrides output_dir)");
  app.add_option("--threads", threads, "Worker thread cap (0 = runtime default)");
  app.add_option("--seed", seed_override, "Global seed override");

  const std::vector<std::pair<std::string, int (*)(Context&)>> commands = {
      {"phantom", cmd_phantom}, {"project", cmd_project}, {"prepare", cmd_prepare},
      {"train", cmd_train},     {"infer", cmd_infer},     {"eval", cmd_eval},
      {"bench", cmd_bench},     {"demo", cmd_demo},
  };
  static const std::map<std::string, std::string> descriptions = {
      {"phantom", "Generate the synthetic phantom cohort"},
      {"project", "Forward-project cohort volumes into MR/X-ray sets"},
      {"prepare", "Pair, normalize and split the projection data"},
      {"train", "Train the generator/discriminator pair"},
      {"infer", "Run the checkpointed generator over the test sets"},
      {"eval", "Masked MAE/PSNR, SSIM and per-angle reports"},
      {"bench", "Inference and projector throughput"},
      {"demo", "Run the desk-scale preset end to end"},
  };
  for (const auto& [name, fn] : commands) {
    auto* sub = app.add_subcommand(name, descriptions.at(name));
    sub->add_option("overrides", overrides, "key=value configuration overrides");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    Context ctx;
    const std::string sub_name = app.get_subcommands().front()->get_name();
    ctx.config = sub_name == "demo" ? RunConfig::demo() : RunConfig::defaults();
    if (!config_path.empty()) ctx.config.load_file(config_path);
    for (const auto& o : overrides) ctx.config.apply_override(o);
    if (seed_override >= 0) ctx.config.set("seed", std::to_string(seed_override));
    if (threads >= 0) ctx.config.set("threads", std::to_string(threads));
    if (!out_override.empty()) ctx.config.set("output_dir", out_override);

    set_thread_cap(static_cast<int>(ctx.config.get_long("threads")));
    ctx.out = ctx.config.output_dir();
    ctx.stamp = ctx.config.stamp();

    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec || !fs::is_directory(ctx.out)) {
      std::cerr << "error: cannot create output directory " << ctx.out << "\n";
      return 2;
    }

    for (const auto& [name, fn] : commands) {
      if (name == sub_name) return fn(ctx);
    }
    std::cerr << "error: unknown subcommand\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
