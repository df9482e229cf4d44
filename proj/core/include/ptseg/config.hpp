#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace ptseg {

enum class PointSelection { random, kmedoids, shi_tomasi, mixed };

/// Reinitialization variants:
///   fixed_horizon        (A) every `horizon` frames, all objects together
///   mean_area            (B) frame whose area is closest to the window mean
///   similar_area         (C) first frame whose area is close to the initial one
///   similar_area_synced  (D) first frame where every object passes C's test
enum class ReinitVariant { off, fixed_horizon, mean_area, similar_area, similar_area_synced };

std::string_view to_string(PointSelection v);
std::string_view to_string(ReinitVariant v);
PointSelection point_selection_from_string(std::string_view name);
/// Accepts "off", "A".."D" and the long names.
ReinitVariant reinit_variant_from_string(std::string_view name);

struct PipelineConfig {
  PointSelection psm = PointSelection::kmedoids;
  int positive_per_mask = 8;
  int negative_per_mask = 1;
  int refinement_iterations = 12;
  std::optional<double> patch_similarity_threshold;
  ReinitVariant reinit = ReinitVariant::off;
  int horizon = 8;
  double occlusion_threshold = 0.5;
  std::uint64_t rng_seed = 0;
  /// Relative area band for variants C and D.
  double area_similarity_band = 0.25;
  /// Prompt each object with other objects' positives as extra negatives
  /// when they share a reference frame.
  bool multi_object_negatives = true;

  /// Throws invalid_input on a violated constraint.
  void validate() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

}  // namespace ptseg
