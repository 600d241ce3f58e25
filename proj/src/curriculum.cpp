#include "ckpl/curriculum.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "ckpl/errors.hpp"
#include "ckpl/io.hpp"
#include "ckpl/ops.hpp"

namespace ckpl {

ClassCentroids::ClassCentroids(std::vector<std::optional<Tensor>> centroids,
                               std::vector<std::size_t> counts)
    : centroids_(std::move(centroids)), counts_(std::move(counts)) {
  if (centroids_.size() != counts_.size()) {
    throw DimensionError("centroid and count vectors differ in length");
  }
}

const Tensor& ClassCentroids::centroid(std::size_t cls) const {
  if (cls >= centroids_.size()) {
    throw IndexError("class " + std::to_string(cls) + " out of range for " +
                     std::to_string(centroids_.size()) + " classes");
  }
  if (!centroids_[cls]) {
    throw MissingCentroidError("class " + std::to_string(cls) + " has no training samples");
  }
  return *centroids_[cls];
}

ClassCentroids class_centroids(std::span<const Tensor> features, std::span<const std::size_t> labels,
                               std::size_t num_classes) {
  if (features.size() != labels.size()) {
    throw DimensionError("class_centroids: " + std::to_string(features.size()) + " features, " +
                         std::to_string(labels.size()) + " labels");
  }
  std::vector<std::vector<double>> sums(num_classes);
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto c = labels[i];
    if (c >= num_classes) {
      throw IndexError("label " + std::to_string(c) + " out of range for " +
                       std::to_string(num_classes) + " classes");
    }
    auto v = features[i].values();
    if (sums[c].empty()) sums[c].assign(v.size(), 0.0);
    if (sums[c].size() != v.size()) throw DimensionError("class_centroids: ragged features");
    for (std::size_t j = 0; j < v.size(); ++j) sums[c][j] += v[j];
    ++counts[c];
  }
  std::vector<std::optional<Tensor>> centroids(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) continue;
    for (auto& x : sums[c]) x /= static_cast<double>(counts[c]);
    centroids[c] = Tensor::vector(std::move(sums[c]));
  }
  return ClassCentroids(std::move(centroids), std::move(counts));
}

double difficulty(std::span<const double> feature, std::span<const double> centroid) {
  return 1.0 - cosine_similarity(feature, centroid);
}

double difficulty(const Tensor& feature, const Tensor& centroid) {
  return difficulty(feature.values(), centroid.values());
}

std::vector<double> difficulty_scores(std::span<const Tensor> features,
                                      std::span<const std::size_t> labels,
                                      const ClassCentroids& centroids) {
  if (features.size() != labels.size()) {
    throw DimensionError("difficulty_scores: features and labels differ in length");
  }
  std::vector<double> out(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    out[i] = difficulty(features[i], centroids.centroid(labels[i]));
  }
  return out;
}

std::vector<std::size_t> Selection::flatten() const {
  std::vector<std::size_t> out;
  for (const auto& ids : per_class) out.insert(out.end(), ids.begin(), ids.end());
  return out;
}

namespace {

Selection select_by_difficulty(std::span<const Tensor> features,
                               std::span<const std::size_t> labels,
                               const ClassCentroids& centroids, std::size_t n,
                               const std::set<std::size_t>& exclude, bool hardest) {
  if (n == 0) throw ParameterError("samples per class must be at least 1");
  const auto scores = difficulty_scores(features, labels, centroids);
  const std::size_t num_classes = centroids.num_classes();
  std::vector<std::vector<std::size_t>> pools(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!exclude.count(i)) pools[labels[i]].push_back(i);
  }
  Selection sel;
  sel.per_class.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    centroids.centroid(c);  // surfaces MissingCentroidError for empty classes
    auto& pool = pools[c];
    std::stable_sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return hardest ? scores[a] > scores[b] : scores[a] < scores[b];
      return a < b;
    });
    if (pool.size() < n) {
      sel.warnings.push_back("class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                             " candidates, fewer than the requested " + std::to_string(n));
    }
    pool.resize(std::min(n, pool.size()));
    sel.per_class[c] = std::move(pool);
  }
  return sel;
}

}  // namespace

Selection select_easy(std::span<const Tensor> features, std::span<const std::size_t> labels,
                      const ClassCentroids& centroids, std::size_t n,
                      const std::set<std::size_t>& exclude) {
  return select_by_difficulty(features, labels, centroids, n, exclude, false);
}

Selection select_hard(std::span<const Tensor> features, std::span<const std::size_t> labels,
                      const ClassCentroids& centroids, std::size_t n,
                      const std::set<std::size_t>& exclude) {
  return select_by_difficulty(features, labels, centroids, n, exclude, true);
}

void write_split_csv(std::ostream& os, const CurriculumSplit& split,
                     std::span<const std::size_t> labels) {
  std::vector<const char*> stage(labels.size(), "unused");
  for (const auto& ids : split.easy_ids)
    for (auto id : ids) stage.at(id) = "easy";
  for (const auto& ids : split.hard_ids)
    for (auto id : ids) stage.at(id) = "hard";
  CsvWriter csv(os);
  csv.row({"sample_id", "class", "D", "stage"});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = split.scores.find(i);
    csv.row({std::to_string(i), std::to_string(labels[i]),
             it == split.scores.end() ? std::string() : format_real(it->second), stage[i]});
  }
}

}  // namespace ckpl
