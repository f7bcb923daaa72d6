#include "dropletforge/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dropletforge/config.hpp"
#include "dropletforge/dataset.hpp"
#include "dropletforge/image_io.hpp"
#include "dropletforge/loss.hpp"
#include "dropletforge/metrics.hpp"
#include "dropletforge/post_filter.hpp"
#include "dropletforge/scene_json.hpp"
#include "dropletforge/synth.hpp"
#include "dropletforge/wsi.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dropletforge {

namespace {

// Thrown for bad command lines that CLI11 itself cannot see.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

PipelineConfig resolve_config(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_config(path);
}

void emit(std::ostream& out, const json& j, const std::string& path = {}) {
  if (path.empty()) out << j.dump(1) << '\n';
  else write_json_file(path, j);
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// losses

loss::BoundingBox box_from_json(const json& j) {
  if (j.is_array()) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 4) throw Error(ErrorCode::InvalidArgument, "box must be [x, y, w, h]");
    return {v[0], v[1], v[2], v[3]};
  }
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(), j.at("h").get<double>()};
}

loss::SquareGrid grid_from_json(const json& j) {
  loss::SquareGrid g;
  if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, "mask must be an N x N array");
  g.n = static_cast<int>(j.size());
  for (const auto& row : j) {
    const auto r = row.get<std::vector<double>>();
    if (static_cast<int>(r.size()) != g.n) throw Error(ErrorCode::DimensionMismatch, "mask must be square");
    g.values.insert(g.values.end(), r.begin(), r.end());
  }
  return g;
}

json run_losses(const json& rec) {
  try {
    const double p = rec.at("p").get<double>();
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "p must lie in [0, 1]");
    const auto b = loss::total_loss(loss::classification_loss(p),
                                    loss::bbox_loss(box_from_json(rec.at("pred_box")), box_from_json(rec.at("gt_box"))),
                                    loss::mask_loss(grid_from_json(rec.at("pred_mask")), grid_from_json(rec.at("gt_mask"))));
    return loss_to_json(b);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed loss record: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// evaluate

struct LoadedImage {
  int width = 0;
  int height = 0;
  std::vector<ScoredInstance> instances;
};

std::vector<ScoredInstance> from_labels(const LabelImage& labels) {
  std::map<int, std::vector<Point>> px;
  for (int y = 0; y < labels.height(); ++y)
    for (int x = 0; x < labels.width(); ++x)
      if (const int l = labels(x, y)) px[l].push_back({x, y});
  std::vector<ScoredInstance> out;
  for (auto& [l, p] : px) out.push_back({InstanceMask::from_pixels(p, l), 1.0});
  return out;
}

// A directory of SceneResult JSON files, of 16-bit label PNGs, or a dataset
// (images/, masks/<name>/<k>.png). Keyed by image name.
std::map<std::string, LoadedImage> load_instances(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoFailure, dir.string() + " is not a directory");
  std::map<std::string, LoadedImage> out;
  if (fs::is_directory(dir / "images")) {
    for (const auto& s : load_dataset(dir)) {
      LoadedImage li{s.image.width(), s.image.height(), {}};
      for (const auto& m : s.accepted_masks()) li.instances.push_back({m, 1.0});
      out[s.name] = std::move(li);
    }
    return out;
  }
  for (const auto& p : sorted_files(dir, ".json")) {
    const SceneResult scene = load_scene(p);
    LoadedImage li{scene.width, scene.height, {}};
    for (const auto& s : scene.instances) li.instances.push_back({s.mask, s.score});
    out[p.stem().string()] = std::move(li);
  }
  for (const auto& p : sorted_files(dir, ".png")) {
    if (out.contains(p.stem().string())) continue;
    const LabelImage labels = read_label_png(p);
    out[p.stem().string()] = {labels.width(), labels.height(), from_labels(labels)};
  }
  return out;
}

json run_evaluate(const fs::path& pred_dir, const fs::path& gt_dir, const PipelineConfig& cfg) {
  const auto preds = load_instances(pred_dir);
  const auto gts = load_instances(gt_dir);
  std::vector<ImageInstances> images;
  for (const auto& [name, gt] : gts) {
    ImageInstances im{gt.width, gt.height, {}, {}};
    for (const auto& g : gt.instances) im.gts.push_back(g.mask);
    if (const auto it = preds.find(name); it != preds.end()) {
      if (it->second.width != gt.width || it->second.height != gt.height)
        throw Error(ErrorCode::DimensionMismatch, "prediction and ground truth sizes differ for " + name);
      im.preds = it->second.instances;
    }
    images.push_back(std::move(im));
  }
  for (const auto& [name, p] : preds)
    if (!gts.contains(name)) throw Error(ErrorCode::InvalidArgument, "prediction " + name + " has no ground truth");
  json j = metrics_to_json(evaluate_instances(images, cfg.metrics.iou_min, cfg.metrics.jaccard));
  j["images"] = images.size();
  j["iou_min"] = cfg.metrics.iou_min;
  j["jaccard_mode"] = cfg.metrics.jaccard == JaccardMode::Pixel ? "pixel" : "instance";
  j["config"] = config_to_json(cfg);
  return j;
}

// ---------------------------------------------------------------------------
// weaklabel

std::vector<fs::path> input_images(const fs::path& in) {
  if (fs::is_regular_file(in)) return {in};
  if (fs::is_directory(in / "images")) return sorted_files(in / "images", ".png");
  if (fs::is_directory(in)) return sorted_files(in, ".png");
  throw Error(ErrorCode::IoFailure, "no such input " + in.string());
}

json run_weaklabel(const fs::path& in, const fs::path& out_dir, const std::string& reject_path,
                   const PipelineConfig& cfg) {
  json rejects = json::object();
  if (!reject_path.empty()) rejects = read_json_file(reject_path);
  std::vector<TrainingSample> samples;
  json per_image = json::array();
  for (const auto& p : input_images(in)) {
    ColorImage img = read_color_png(p);
    const SceneResult scene = segment_slide(img, cfg);
    std::vector<InstanceMask> masks;
    for (const auto& s : scene.instances) {
      masks.push_back(s.mask);
      masks.back().set_id(s.id);
    }
    const std::string name = p.stem().string();
    TrainingSample sample = make_sample(name, std::move(img), std::move(masks));
    if (rejects.contains(name)) {
      const auto ids = rejects.at(name).get<std::vector<int>>();
      sample = screen_masks(std::move(sample), ids);
    }
    per_image.push_back({{"name", name},
                         {"masks", sample.masks.size()},
                         {"accepted", sample.accepted_masks().size()}});
    samples.push_back(std::move(sample));
  }
  save_dataset(out_dir, samples);
  return {{"images", per_image}, {"out", out_dir.string()}, {"config", config_to_json(cfg)}};
}

// ---------------------------------------------------------------------------
// synth

json run_synth(const fs::path& spec_path, const fs::path& out_dir, std::optional<std::uint64_t> seed,
               const PipelineConfig& cfg) {
  const json j = read_json_file(spec_path);
  std::vector<SceneSpec> specs;
  if (j.is_array())
    for (const auto& e : j) specs.push_back(scene_spec_from_json(e));
  else
    specs.push_back(scene_spec_from_json(j));
  if (seed)
    for (std::size_t i = 0; i < specs.size(); ++i) specs[i].seed = *seed + i;
  const auto samples = scene_to_dataset(specs);
  save_dataset(out_dir, samples);
  json scenes = json::array();
  for (std::size_t i = 0; i < samples.size(); ++i)
    scenes.push_back({{"name", samples[i].name},
                      {"spec", scene_spec_to_json(specs[i])},
                      {"droplets", samples[i].masks.size()}});
  return {{"scenes", scenes}, {"out", out_dir.string()}, {"config", config_to_json(cfg)}};
}

// ---------------------------------------------------------------------------
// split-data

std::array<double, 3> parse_ratios(const std::vector<double>& v) {
  if (v.empty()) return default_split_ratios();
  if (v.size() != 3) throw UsageError("--ratios takes three values");
  return {v[0], v[1], v[2]};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Steatosis droplet segmentation toolkit", "dropletforge"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Pipeline config JSON")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Random seed");

  std::string input, out_path, spec_path, pred_dir, gt_dir, dataset_dir, format = "coco", jaccard, reject_path;
  std::optional<double> iou;
  std::optional<std::size_t> count;
  std::vector<double> ratios;
  std::string results_path;

  auto* seg = app.add_subcommand("segment", "Segment a slide or image into droplet instances");
  seg->add_option("--input", input, "Input PNG")->required()->check(CLI::ExistingFile);
  seg->add_option("--out", out_path, "SceneResult JSON (default: stdout)");

  auto* weak = app.add_subcommand("weaklabel", "Generate screened weak-label training pairs");
  weak->add_option("--input", input, "PNG file or directory")->required();
  weak->add_option("--out", out_path, "Output dataset directory")->required();
  weak->add_option("--reject", reject_path, "JSON {image name: [mask ids]} to reject")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("evaluate", "Score predictions against ground truth");
  eval->add_option("--pred", pred_dir, "Prediction directory")->required();
  eval->add_option("--gt", gt_dir, "Ground-truth directory")->required();
  eval->add_option("--iou", iou, "IoU matching threshold");
  eval->add_option("--jaccard", jaccard, "pixel | instance")->check(CLI::IsMember({"pixel", "instance"}));

  auto* filt = app.add_subcommand("filter", "Apply a feature filter to a SceneResult");
  filt->add_option("--spec", spec_path, "FilterSpec JSON")->required()->check(CLI::ExistingFile);
  filt->add_option("results", results_path, "SceneResult JSON")->required()->check(CLI::ExistingFile);
  filt->add_option("--out", out_path, "Output JSON (default: stdout)");

  auto* losses = app.add_subcommand("losses", "Evaluate the multi-task loss for one record");
  losses->add_option("--input,input", input, "Record JSON, - for stdin")->required();

  auto* synth = app.add_subcommand("synth", "Render synthetic scenes with ground truth");
  synth->add_option("--spec", spec_path, "SceneSpec JSON (object or array)")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out_path, "Output dataset directory")->required();

  auto* exp = app.add_subcommand("export", "Export a dataset as annotations");
  exp->add_option("--format", format, "Annotation format")->check(CLI::IsMember({"coco"}));
  exp->add_option("--dataset", dataset_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  exp->add_option("--out", out_path, "Annotation file")->required();

  auto* split = app.add_subcommand("split-data", "Train/val/test split");
  split->add_option("--dataset", dataset_dir, "Dataset directory")->check(CLI::ExistingDirectory);
  split->add_option("--count", count, "Number of samples when no dataset is given");
  split->add_option("--ratios", ratios, "Three ratios summing to 1")->expected(3);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    err << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    err << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    PipelineConfig cfg = resolve_config(config_path);
    if (*seg) {
      const SceneResult scene = segment_slide(read_color_png(input), cfg);
      emit(out, scene_to_json(scene), out_path);
      if (!out_path.empty()) out << json{{"out", out_path}, {"instances", scene.instances.size()}}.dump(1) << '\n';
    } else if (*weak) {
      emit(out, run_weaklabel(input, out_path, reject_path, cfg));
    } else if (*eval) {
      if (iou) cfg.metrics.iou_min = *iou;
      if (jaccard == "instance") cfg.metrics.jaccard = JaccardMode::MatchedInstance;
      if (jaccard == "pixel") cfg.metrics.jaccard = JaccardMode::Pixel;
      cfg.validate();
      emit(out, run_evaluate(pred_dir, gt_dir, cfg));
    } else if (*filt) {
      const FilterSpec spec = filter_spec_from_json(read_json_file(spec_path));
      const SceneResult scene = load_scene(results_path);
      const auto items = filter_items(scene);
      const FilterOutcome outcome = apply_filter(items, spec, scene.cohort);
      json j = filter_outcome_to_json(outcome, spec, scene.config.um_per_px);
      j["config"] = config_to_json(scene.config);
      emit(out, j, out_path);
    } else if (*losses) {
      json rec;
      try {
        if (input == "-") rec = json::parse(std::cin);
        else rec = read_json_file(input);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::IoFailure, std::string("loss record is not valid JSON: ") + e.what());
      }
      json j = run_losses(rec);
      j["config"] = config_to_json(cfg);
      emit(out, j);
    } else if (*synth) {
      emit(out, run_synth(spec_path, out_path, seed, cfg));
    } else if (*exp) {
      const auto samples = load_dataset(dataset_dir);
      export_coco(samples, out_path);
      std::size_t n = 0;
      for (const auto& s : samples) n += s.accepted_masks().size();
      emit(out, {{"format", format}, {"out", out_path}, {"images", samples.size()}, {"annotations", n},
                 {"config", config_to_json(cfg)}});
    } else if (*split) {
      const auto r = parse_ratios(ratios);
      std::vector<std::string> names;
      if (!dataset_dir.empty()) {
        for (const auto& p : sorted_files(fs::path(dataset_dir) / "images", ".png")) names.push_back(p.stem().string());
      } else if (count) {
        for (std::size_t i = 0; i < *count; ++i) names.push_back(std::to_string(i));
      } else {
        throw UsageError("split-data needs --dataset or --count");
      }
      const auto parts = split_dataset(names.size(), r, seed.value_or(0));
      auto pick = [&](const std::vector<std::size_t>& idx) {
        json a = json::array();
        for (auto i : idx) a.push_back(names[i]);
        return a;
      };
      emit(out, {{"seed", seed.value_or(0)},
                 {"ratios", r},
                 {"train", pick(parts.train)},
                 {"val", pick(parts.val)},
                 {"test", pick(parts.test)},
                 {"config", config_to_json(cfg)}});
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace dropletforge
