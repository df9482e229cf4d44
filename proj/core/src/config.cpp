#include "ptseg/config.hpp"

#include <string>

#include <nlohmann/json.hpp>

#include "ptseg/error.hpp"

namespace ptseg {

std::string_view to_string(PointSelection v) {
  switch (v) {
    case PointSelection::random: return "random";
    case PointSelection::kmedoids: return "kmedoids";
    case PointSelection::shi_tomasi: return "shi_tomasi";
    case PointSelection::mixed: return "mixed";
  }
  return "kmedoids";
}

std::string_view to_string(ReinitVariant v) {
  switch (v) {
    case ReinitVariant::off: return "off";
    case ReinitVariant::fixed_horizon: return "A";
    case ReinitVariant::mean_area: return "B";
    case ReinitVariant::similar_area: return "C";
    case ReinitVariant::similar_area_synced: return "D";
  }
  return "off";
}

PointSelection point_selection_from_string(std::string_view name) {
  if (name == "random") return PointSelection::random;
  if (name == "kmedoids" || name == "k-medoids") return PointSelection::kmedoids;
  if (name == "shi_tomasi" || name == "shi-tomasi") return PointSelection::shi_tomasi;
  if (name == "mixed") return PointSelection::mixed;
  fail(ErrorKind::invalid_input, "unknown point selection method '" + std::string(name) + "'");
}

ReinitVariant reinit_variant_from_string(std::string_view name) {
  if (name == "off" || name == "none") return ReinitVariant::off;
  if (name == "A" || name == "fixed_horizon") return ReinitVariant::fixed_horizon;
  if (name == "B" || name == "mean_area") return ReinitVariant::mean_area;
  if (name == "C" || name == "similar_area") return ReinitVariant::similar_area;
  if (name == "D" || name == "similar_area_synced") return ReinitVariant::similar_area_synced;
  fail(ErrorKind::invalid_input, "unknown reinitialization variant '" + std::string(name) + "'");
}

void PipelineConfig::validate() const {
  require(positive_per_mask >= 1, ErrorKind::invalid_input, "positive_per_mask must be >= 1");
  require(negative_per_mask >= 0, ErrorKind::invalid_input, "negative_per_mask must be >= 0");
  require(refinement_iterations >= 0, ErrorKind::invalid_input,
          "refinement_iterations must be >= 0");
  require(!patch_similarity_threshold || *patch_similarity_threshold > 0.0,
          ErrorKind::invalid_input, "patch_similarity_threshold must be > 0");
  require(horizon >= 1, ErrorKind::invalid_input, "horizon must be >= 1");
  require(occlusion_threshold >= 0.0 && occlusion_threshold <= 1.0, ErrorKind::invalid_input,
          "occlusion_threshold must lie in [0,1]");
  require(area_similarity_band >= 0.0, ErrorKind::invalid_input,
          "area_similarity_band must be >= 0");
  require(reinit == ReinitVariant::off || negative_per_mask >= 1, ErrorKind::invalid_input,
          "reinitialization requires negative_per_mask >= 1");
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = nlohmann::json{
      {"psm", std::string(to_string(c.psm))},
      {"positive_per_mask", c.positive_per_mask},
      {"negative_per_mask", c.negative_per_mask},
      {"refinement_iterations", c.refinement_iterations},
      {"patch_similarity_threshold",
       c.patch_similarity_threshold ? nlohmann::json(*c.patch_similarity_threshold) : nlohmann::json(nullptr)},
      {"reinit", std::string(to_string(c.reinit))},
      {"horizon", c.horizon},
      {"occlusion_threshold", c.occlusion_threshold},
      {"rng_seed", c.rng_seed},
      {"area_similarity_band", c.area_similarity_band},
      {"multi_object_negatives", c.multi_object_negatives},
  };
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  require(j.is_object(), ErrorKind::invalid_input, "pipeline config must be a JSON object");
  try {
    PipelineConfig out;
    if (j.contains("psm")) out.psm = point_selection_from_string(j.at("psm").get<std::string>());
    out.positive_per_mask = j.value("positive_per_mask", out.positive_per_mask);
    out.negative_per_mask = j.value("negative_per_mask", out.negative_per_mask);
    out.refinement_iterations = j.value("refinement_iterations", out.refinement_iterations);
    if (j.contains("patch_similarity_threshold") && !j.at("patch_similarity_threshold").is_null()) {
      out.patch_similarity_threshold = j.at("patch_similarity_threshold").get<double>();
    }
    if (j.contains("reinit")) {
      out.reinit = reinit_variant_from_string(j.at("reinit").get<std::string>());
    }
    out.horizon = j.value("horizon", out.horizon);
    out.occlusion_threshold = j.value("occlusion_threshold", out.occlusion_threshold);
    out.rng_seed = j.value("rng_seed", out.rng_seed);
    out.area_similarity_band = j.value("area_similarity_band", out.area_similarity_band);
    out.multi_object_negatives = j.value("multi_object_negatives", out.multi_object_negatives);
    out.validate();
    c = out;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("malformed pipeline config: ") + e.what());
  }
}

}  // namespace ptseg
