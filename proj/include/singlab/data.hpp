#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "singlab/model.hpp"

namespace singlab {

/// All randomness flows from one master seed; task t draws from the stream
/// seeded by derive_stream_seed(master_seed, t).
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream(std::uint64_t task) const;
};

/// Observations, optional true labels (1-based), and the value histogram for
/// discrete families.
struct Dataset {
  Family family = Family::binomial;
  int trials = 0;
  std::vector<double> xs;
  std::optional<std::vector<int>> ys;
  std::vector<std::int64_t> hist;  // counts over {0..M}; empty for continuous families
  std::uint64_t seed = 0;
  std::uint64_t task = 0;

  std::size_t n() const { return xs.size(); }
  bool has_labels() const { return ys.has_value(); }
  const std::vector<int>& labels() const;
  void rebuild_histogram();
};

/// Builds a dataset from raw observations, checking support and label ranges.
Dataset make_dataset(std::vector<double> xs, std::optional<std::vector<int>> ys, const MixtureSpec& spec,
                     int max_label = 0);

Dataset sample_dataset(const TrueModel& truth, const MixtureSpec& spec, std::size_t n, const SeedSpec& seed,
                       std::uint64_t task);

struct EmpiricalLogQ {
  double incomplete = 0.0;  // sum_i ln q(x_i)
  double complete = 0.0;    // sum_i ln q(x_i, y_i)
};

/// Both empirical log-likelihoods under the true model; needs labels.
EmpiricalLogQ empirical_log_q(const Dataset& data, const TrueModel& truth, const MixtureSpec& spec);
double empirical_log_q_incomplete(const Dataset& data, const TrueModel& truth, const MixtureSpec& spec);

nlohmann::json dataset_to_json(const Dataset& data);
/// The histogram is recomputed from xs; the family must match the spec.
Dataset dataset_from_json(const nlohmann::json& j, const MixtureSpec& spec);

}  // namespace singlab
