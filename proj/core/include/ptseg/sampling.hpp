#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "ptseg/config.hpp"
#include "ptseg/image.hpp"
#include "ptseg/types.hpp"

namespace ptseg {

/// Query-point selection input. Points come back at pixel centers.
struct SamplingRequest {
  const BinaryMask& mask;
  /// Only Shi-Tomasi and mixed sampling read the image.
  const Frame* frame = nullptr;
  int count = 1;
  std::uint64_t seed = 0;
};

/// Uniform over mask pixels. Every pixel is used at most once until the mask
/// is exhausted; only then are pixels drawn again with replacement.
std::vector<Point2> sample_random(const SamplingRequest& req);

/// Medoids of a K-Medoids clustering of the mask pixel coordinates.
std::vector<Point2> sample_kmedoids(const SamplingRequest& req);

/// Strongest Shi-Tomasi corners inside the mask, padded with random mask
/// pixels when there are not enough corners.
std::vector<Point2> sample_shi_tomasi(const SamplingRequest& req);

/// Even split over kmedoids, shi-tomasi and random, remainders going to
/// kmedoids first and shi-tomasi second.
std::vector<Point2> sample_mixed(const SamplingRequest& req);

std::vector<Point2> sample_points(PointSelection method, const SamplingRequest& req);

struct MixedSplit {
  int kmedoids = 0;
  int shi_tomasi = 0;
  int random = 0;
};
MixedSplit mixed_split(int count);

/// Negative points for `target`, mixed-sampled on the complement of its mask.
/// `other_positives` are appended relabeled as negatives of `target`.
std::vector<LabeledPoint> sample_negative(ObjectId target,
                                          const std::map<ObjectId, BinaryMask>& masks,
                                          const Frame* frame, int count, std::uint64_t seed,
                                          std::span<const LabeledPoint> other_positives = {});

// Building blocks, exposed for tests and benchmarks.

struct KMedoidsResult {
  std::vector<PixelCoord> medoids;
  double total_distance = 0.0;
  int swaps = 0;
};

/// PAM with farthest-point initialization seeded by `seed`, applying the best
/// improving single swap until none remains. Euclidean pixel distance.
KMedoidsResult kmedoids_cluster(std::span<const PixelCoord> points, int k, std::uint64_t seed);

/// Sum of Euclidean distances from every point to its nearest medoid.
double kmedoids_cost(std::span<const PixelCoord> points, std::span<const PixelCoord> medoids);

/// Minimum eigenvalue of the Gaussian-weighted structure tensor at every
/// pixel (row-major), using 3x3 Sobel gradients on luma.
std::vector<double> min_eigenvalue_map(const Frame& frame);

/// Mask pixels above 1% of the masked maximum that are local maxima within
/// radius 3, strongest first, each more than 3 px from the stronger ones.
std::vector<PixelCoord> shi_tomasi_corners(const Frame& frame, const BinaryMask& mask);

/// Derived, independent stream seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace ptseg
