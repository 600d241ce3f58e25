#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ckpl/tensor.hpp"

namespace ckpl {

// Mean feature per class. Classes without samples have no centroid and
// raise MissingCentroidError when one is requested.
class ClassCentroids {
 public:
  ClassCentroids(std::vector<std::optional<Tensor>> centroids, std::vector<std::size_t> counts);

  std::size_t num_classes() const { return centroids_.size(); }
  bool has(std::size_t cls) const { return cls < centroids_.size() && centroids_[cls].has_value(); }
  const Tensor& centroid(std::size_t cls) const;
  std::size_t count(std::size_t cls) const { return counts_.at(cls); }

 private:
  std::vector<std::optional<Tensor>> centroids_;
  std::vector<std::size_t> counts_;
};

// Arithmetic mean of `features` grouped by `labels` (labels in [0, num_classes)).
ClassCentroids class_centroids(std::span<const Tensor> features, std::span<const std::size_t> labels,
                               std::size_t num_classes);

// Cosine distance 1 - cos(e, o), in [0, 2]; 1 for degenerate inputs.
double difficulty(std::span<const double> feature, std::span<const double> centroid);
double difficulty(const Tensor& feature, const Tensor& centroid);

// Difficulty of every sample against its own class centroid, indexed like `features`.
std::vector<double> difficulty_scores(std::span<const Tensor> features,
                                      std::span<const std::size_t> labels,
                                      const ClassCentroids& centroids);

struct Selection {
  std::vector<std::vector<std::size_t>> per_class;  // sample ids, in selection order
  std::vector<std::string> warnings;

  std::vector<std::size_t> flatten() const;
};

// Per class, the N samples with the lowest (select_easy) or highest
// (select_hard) difficulty. Ties go to the lower sample id. Ids in `exclude`
// are skipped. A class with fewer than N candidates contributes all of them
// and a warning. Sample ids are positions in `features` / `labels`.
Selection select_easy(std::span<const Tensor> features, std::span<const std::size_t> labels,
                      const ClassCentroids& centroids, std::size_t n,
                      const std::set<std::size_t>& exclude = {});
Selection select_hard(std::span<const Tensor> features, std::span<const std::size_t> labels,
                      const ClassCentroids& centroids, std::size_t n,
                      const std::set<std::size_t>& exclude = {});

struct CurriculumSplit {
  std::vector<std::vector<std::size_t>> easy_ids;
  std::vector<std::vector<std::size_t>> hard_ids;
  std::map<std::size_t, double> scores;  // D that ranked each sample
};

// CSV (RFC 4180) with header sample_id,class,D,stage; stage is easy, hard or unused.
void write_split_csv(std::ostream& os, const CurriculumSplit& split,
                     std::span<const std::size_t> labels);

}  // namespace ckpl
