#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "vistrack/annotations.hpp"
#include "vistrack/config.hpp"
#include "vistrack/datagen.hpp"
#include "vistrack/eval.hpp"
#include "vistrack/pipeline.hpp"
#include "vistrack/selftest.hpp"

namespace fs = std::filesystem;
using namespace vistrack;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

std::uint64_t env_seed() {
  const char* v = std::getenv("VISTRACK_SEED");
  if (v == nullptr) return 0;
  return std::strtoull(v, nullptr, 10);
}

struct GenArgs {
  std::string out;
  int videos = 2;
  int frames = 8;
  std::string size = "96x96";
  int objects = 2;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> from_still;  // IMG ANN
};

int run_gen(const GenArgs& args) {
  int h = 0, w = 0;
  if (std::sscanf(args.size.c_str(), "%dx%d", &h, &w) != 2 || h <= 0 || w <= 0)
    throw DataError("--size must look like 96x96, got '" + args.size + "'");
  const std::uint64_t seed = args.seed.value_or(env_seed());

  AnnotationFile annotations;
  std::vector<std::vector<Tensor>> frames;
  if (!args.from_still.empty()) {
    Tensor image = read_ppm(args.from_still[0]);
    AnnotationFile still = read_annotations(args.from_still[1]);
    if (still.instances.empty()) throw DataError("still annotation carries no instances");
    AffineAugConfig aug;
    aug.t = args.frames;
    for (int v = 0; v < args.videos; ++v) {
      aug.seed = derive_seed(seed, static_cast<std::uint64_t>(v));
      SynthVideo video = augment_still(image, still.instances, aug, v);
      annotations.videos.push_back(video.info);
      for (Instance& inst : video.instances)
        if (!inst.entries.empty()) annotations.instances.push_back(std::move(inst));
      frames.push_back(std::move(video.frames));
    }
  } else {
    SynthConfig cfg;
    cfg.num_videos = args.videos;
    cfg.frames_per_video = args.frames;
    cfg.frame_h = h;
    cfg.frame_w = w;
    cfg.objects_per_video = args.objects;
    cfg.seed = seed;
    SynthDataset ds = gen_synthetic_dataset(cfg);
    annotations = std::move(ds.annotations);
    frames = std::move(ds.frames);
  }
  write_dataset(args.out, frames, annotations);
  std::cout << "wrote " << annotations.videos.size() << " videos to " << args.out << "\n";
  return kExitOk;
}

struct RunArgs {
  std::string data;
  std::string config_path;
  std::string out;
  std::string proposals;
  std::optional<int> train;
  bool strict_causal = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

int run_run(const RunArgs& args) {
  AnnotationFile annotations = read_annotations(fs::path(args.data) / "annotations.json");
  std::vector<std::vector<Tensor>> frames = read_dataset_frames(args.data, annotations);

  PipelineConfig config;
  config.seed = env_seed();
  if (!args.config_path.empty()) config = load_config(args.config_path);
  if (args.seed) config.seed = *args.seed;
  if (!args.proposals.empty()) {
    if (args.proposals == "oracle") config.proposal_mode = ProposalMode::kOracle;
    else if (args.proposals == "blob") config.proposal_mode = ProposalMode::kBlob;
    else throw DataError("--proposals must be oracle or blob, got '" + args.proposals + "'");
  }
  if (args.train) config.train_steps = *args.train;
  if (args.strict_causal) config.strict_causal = true;
  if (args.jobs) config.jobs = *args.jobs;
  config.validate();

  std::vector<VideoSample> samples = make_samples(annotations, frames);
  ModelParams params = ModelParams::init(config, config.seed);
  if (config.train_steps > 0)
    train_model(samples, config, params, config.train_steps, &std::cerr);

  std::vector<std::vector<Instance>> predictions(samples.size());
  const int jobs = std::max(1, std::min<int>(config.jobs, static_cast<int>(samples.size())));
  if (jobs == 1) {
    for (std::size_t v = 0; v < samples.size(); ++v)
      predictions[v] = run_video(samples[v].frames,
                                 config.proposal_mode == ProposalMode::kOracle ? &samples[v].gt
                                                                               : nullptr,
                                 config, params);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::atomic<bool> failed{false};
    std::string error;
    std::mutex error_mutex;
    for (int j = 0; j < jobs; ++j)
      workers.emplace_back([&]() {
        for (;;) {
          const std::size_t v = next.fetch_add(1);
          if (v >= samples.size() || failed.load()) return;
          try {
            predictions[v] = run_video(samples[v].frames,
                                       config.proposal_mode == ProposalMode::kOracle
                                           ? &samples[v].gt
                                           : nullptr,
                                       config, params);
          } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(error_mutex);
            failed = true;
            error = e.what();
          }
        }
      });
    for (std::thread& t : workers) t.join();
    if (failed) throw NumericalError("video worker failed: " + error);
  }

  AnnotationFile out;
  out.videos = annotations.videos;
  out.has_scores = true;
  for (std::vector<Instance>& tracks : predictions)
    for (Instance& inst : tracks) out.instances.push_back(std::move(inst));
  write_annotations(args.out, out);
  std::cout << "wrote " << out.instances.size() << " tracks to " << args.out << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::vector<double> thresholds;
  std::string out;
};

void print_metric(std::ostream& os, const std::string& name, double value) {
  os << std::left << std::setw(6) << name << std::right;
  if (value < 0.0)
    os << "   n/a\n";
  else
    os << std::fixed << std::setprecision(4) << value << "\n";
}

int run_eval(const EvalArgs& args) {
  AnnotationFile pred = read_annotations(args.pred);
  AnnotationFile gt = read_annotations(args.gt);

  std::set<int> pred_videos, gt_videos;
  for (const VideoInfo& v : pred.videos) pred_videos.insert(v.id);
  for (const VideoInfo& v : gt.videos) gt_videos.insert(v.id);
  if (pred_videos != gt_videos) {
    std::string offenders;
    for (int id : pred_videos)
      if (!gt_videos.count(id)) offenders += " " + std::to_string(id);
    for (int id : gt_videos)
      if (!pred_videos.count(id)) offenders += " " + std::to_string(id);
    throw DataError("video ids disagree between prediction and ground truth:" + offenders);
  }

  EvalConfig cfg = EvalConfig::defaults();
  if (!args.thresholds.empty()) cfg.iou_thresholds = args.thresholds;
  EvalResult result = evaluate(pred.instances, gt.instances, cfg);

  print_metric(std::cout, "AP", result.mean_ap);
  print_metric(std::cout, "AP50", result.ap50);
  print_metric(std::cout, "AP75", result.ap75);
  print_metric(std::cout, "AR1", result.ar_per_budget.count(1) ? result.ar_per_budget.at(1) : -1.0);
  print_metric(std::cout, "AR10",
               result.ar_per_budget.count(10) ? result.ar_per_budget.at(10) : -1.0);

  nlohmann::json doc;
  doc["ap"] = result.mean_ap;
  if (result.ap50 >= 0.0) doc["ap50"] = result.ap50;
  if (result.ap75 >= 0.0) doc["ap75"] = result.ap75;
  for (const auto& [budget, value] : result.ar_per_budget)
    doc["ar" + std::to_string(budget)] = value;
  for (const auto& [category, values] : result.ap_per_category_per_threshold)
    doc["per_category"][category] = values;
  const std::string out_path = args.out.empty() ? args.pred + ".result.json" : args.out;
  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw DataError("cannot write " + out_path);
  os << doc.dump(1) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale video instance segmentation and tracking"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* cmd_gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  cmd_gen->add_option("--out", gen.out, "Output dataset directory")->required();
  cmd_gen->add_option("--videos", gen.videos, "Number of videos");
  cmd_gen->add_option("--frames", gen.frames, "Frames per video");
  cmd_gen->add_option("--size", gen.size, "Frame size HxW");
  cmd_gen->add_option("--objects", gen.objects, "Objects per video");
  std::uint64_t gen_seed = 0;
  CLI::Option* gen_seed_opt = cmd_gen->add_option("--seed", gen_seed, "RNG seed");
  cmd_gen->add_option("--from-still", gen.from_still,
                      "Build pseudo-videos from a still image: IMG ANN")
      ->expected(2);

  RunArgs run;
  CLI::App* cmd_run = app.add_subcommand("run", "Train (optionally) and run inference");
  cmd_run->add_option("--data", run.data, "Dataset directory")->required();
  cmd_run->add_option("--config", run.config_path, "Pipeline config JSON");
  cmd_run->add_option("--out", run.out, "Predictions output file")->required();
  cmd_run->add_option("--proposals", run.proposals, "oracle|blob");
  int run_train = 0;
  CLI::Option* run_train_opt = cmd_run->add_option("--train", run_train, "SGD steps before inference");
  cmd_run->add_flag("--strict-causal", run.strict_causal, "Restrict supports to past frames");
  std::uint64_t run_seed = 0;
  CLI::Option* run_seed_opt = cmd_run->add_option("--seed", run_seed, "RNG seed override");
  int run_jobs = 0;
  CLI::Option* run_jobs_opt = cmd_run->add_option("--jobs", run_jobs, "Per-video worker threads");

  EvalArgs eval_args;
  CLI::App* cmd_eval = app.add_subcommand("eval", "Evaluate predictions against ground truth");
  cmd_eval->add_option("--pred", eval_args.pred, "Predictions file")->required();
  cmd_eval->add_option("--gt", eval_args.gt, "Ground-truth file")->required();
  cmd_eval->add_option("--thresholds", eval_args.thresholds, "IoU thresholds");
  cmd_eval->add_option("--out", eval_args.out, "Result document path");

  SelftestOptions selftest;
  CLI::App* cmd_selftest = app.add_subcommand("selftest", "Gradient and oracle self-checks");
  bool gradcheck = false;
  cmd_selftest->add_flag("--gradcheck", gradcheck, "Run the gradient suites (default)");
  cmd_selftest->add_option("--eps", selftest.eps, "Finite-difference step");
  cmd_selftest->add_option("--module", selftest.module, "Restrict to one module");
  cmd_selftest->add_flag("--corrupt-backward", selftest.corrupt_backward,
                         "Deliberately corrupt one backward (negative control)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (cmd_gen->parsed()) {
      if (*gen_seed_opt) gen.seed = gen_seed;
      return run_gen(gen);
    }
    if (cmd_run->parsed()) {
      if (*run_train_opt) run.train = run_train;
      if (*run_seed_opt) run.seed = run_seed;
      if (*run_jobs_opt) run.jobs = run_jobs;
      return run_run(run);
    }
    if (cmd_eval->parsed()) return run_eval(eval_args);
    if (cmd_selftest->parsed())
      return run_selftest(selftest, std::cout) ? kExitOk : kExitNumerical;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
