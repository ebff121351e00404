#include "vistrack/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace vistrack {

using nlohmann::json;

namespace {

SamplingMode parse_sampling(const std::string& s) {
  if (s == "uniform") return SamplingMode::kUniform;
  if (s == "random") return SamplingMode::kRandom;
  throw DataError("config: sampling_mode must be 'uniform' or 'random', got '" + s + "'");
}

ProposalMode parse_proposal(const std::string& s) {
  if (s == "oracle") return ProposalMode::kOracle;
  if (s == "blob") return ProposalMode::kBlob;
  throw DataError("config: proposal_mode must be 'oracle' or 'blob', got '" + s + "'");
}

AssociationMode parse_association(const std::string& s) {
  if (s == "greedy") return AssociationMode::kGreedy;
  if (s == "hungarian") return AssociationMode::kHungarian;
  throw DataError("config: association_mode must be 'greedy' or 'hungarian', got '" + s + "'");
}

MapPoolSource parse_map_pool(const std::string& s) {
  if (s == "refined") return MapPoolSource::kRefined;
  if (s == "likelihood") return MapPoolSource::kLikelihood;
  throw DataError("config: map_pool_source must be 'refined' or 'likelihood', got '" + s + "'");
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("config parse error: ") + e.what());
  }
  PipelineConfig cfg;
  try {
    for (auto it = root.begin(); it != root.end(); ++it) {
      const std::string& key = it.key();
      const json& v = it.value();
      if (key == "t_train") cfg.t_train = v.get<int>();
      else if (key == "t_test") cfg.t_test = v.get<int>();
      else if (key == "sampling_mode") cfg.sampling_mode = parse_sampling(v.get<std::string>());
      else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (key == "proposal_mode") cfg.proposal_mode = parse_proposal(v.get<std::string>());
      else if (key == "enable_frame_attention") cfg.enable_frame_attention = v.get<bool>();
      else if (key == "enable_object_attention") cfg.enable_object_attention = v.get<bool>();
      else if (key == "enable_correlation_map") cfg.enable_correlation_map = v.get<bool>();
      else if (key == "memory_horizon") cfg.memory_horizon = v.get<int>();
      else if (key == "strict_causal") cfg.strict_causal = v.get<bool>();
      else if (key == "jitter") cfg.jitter = v.get<double>();
      else if (key == "feature_channels") cfg.feature_channels = v.get<int>();
      else if (key == "stride") cfg.stride = v.get<int>();
      else if (key == "roi_size") cfg.roi_size = v.get<int>();
      else if (key == "samples_per_bin") cfg.samples_per_bin = v.get<int>();
      else if (key == "bottleneck_ratio") cfg.bottleneck_ratio = v.get<int>();
      else if (key == "categories") cfg.categories = v.get<std::vector<std::string>>();
      else if (key == "association_mode") cfg.association_mode = parse_association(v.get<std::string>());
      else if (key == "map_pool_source") cfg.map_pool_source = parse_map_pool(v.get<std::string>());
      else if (key == "correlation_loss_squash") cfg.correlation_loss_squash = v.get<bool>();
      else if (key == "sigma_factor") cfg.sigma_factor = v.get<double>();
      else if (key == "new_identity_threshold") cfg.new_identity_threshold = v.get<double>();
      else if (key == "cue_det") cfg.cue_det = v.get<double>();
      else if (key == "cue_iou") cfg.cue_iou = v.get<double>();
      else if (key == "cue_cat") cfg.cue_cat = v.get<double>();
      else if (key == "lr") cfg.lr = v.get<double>();
      else if (key == "blob_threshold") cfg.blob_threshold = v.get<double>();
      else if (key == "nms_iou") cfg.nms_iou = v.get<double>();
      else if (key == "jobs") cfg.jobs = v.get<int>();
      else if (key == "train_steps") cfg.train_steps = v.get<int>();
      else throw DataError("config: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("config value error: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const PipelineConfig& cfg) {
  json root;
  root["t_train"] = cfg.t_train;
  root["t_test"] = cfg.t_test;
  root["sampling_mode"] = cfg.sampling_mode == SamplingMode::kUniform ? "uniform" : "random";
  root["seed"] = cfg.seed;
  root["proposal_mode"] = cfg.proposal_mode == ProposalMode::kOracle ? "oracle" : "blob";
  root["enable_frame_attention"] = cfg.enable_frame_attention;
  root["enable_object_attention"] = cfg.enable_object_attention;
  root["enable_correlation_map"] = cfg.enable_correlation_map;
  root["memory_horizon"] = cfg.memory_horizon;
  root["strict_causal"] = cfg.strict_causal;
  root["jitter"] = cfg.jitter;
  root["feature_channels"] = cfg.feature_channels;
  root["stride"] = cfg.stride;
  root["roi_size"] = cfg.roi_size;
  root["samples_per_bin"] = cfg.samples_per_bin;
  root["bottleneck_ratio"] = cfg.bottleneck_ratio;
  root["categories"] = cfg.categories;
  root["association_mode"] =
      cfg.association_mode == AssociationMode::kGreedy ? "greedy" : "hungarian";
  root["map_pool_source"] =
      cfg.map_pool_source == MapPoolSource::kRefined ? "refined" : "likelihood";
  root["correlation_loss_squash"] = cfg.correlation_loss_squash;
  root["sigma_factor"] = cfg.sigma_factor;
  root["new_identity_threshold"] = cfg.new_identity_threshold;
  root["cue_det"] = cfg.cue_det;
  root["cue_iou"] = cfg.cue_iou;
  root["cue_cat"] = cfg.cue_cat;
  root["lr"] = cfg.lr;
  root["blob_threshold"] = cfg.blob_threshold;
  root["nms_iou"] = cfg.nms_iou;
  root["jobs"] = cfg.jobs;
  root["train_steps"] = cfg.train_steps;
  return root.dump(1) + "\n";
}

}  // namespace vistrack
