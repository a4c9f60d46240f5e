#pragma once

#include "parvi/core.hpp"

#include <string>
#include <vector>

namespace parvi {

/// Binary classification data with labels in {-1, +1}.
struct Dataset {
  RowMatrix features;
  Vector labels;
  std::vector<std::string> feature_names;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t n_features() const { return static_cast<std::size_t>(features.cols()); }
};

/// Reads a comma-separated file with a header row. `label_column` is either a
/// column name or a zero-based index; an empty string selects the last column.
/// Labels are mapped to {-1, +1}.
Dataset load_csv(const std::string& path, const std::string& label_column = "");

/// Reads libsvm sparse text ("label idx:value ..." with 1-based indices).
Dataset load_libsvm(const std::string& path);

/// Maps a label column with at most two distinct values to {-1, +1}: {0,1} and
/// {-1,+1} map naturally, any other pair maps smaller -> -1. A single value
/// maps to +1 if positive, else -1. More than two values throw ConfigError.
Vector normalize_labels(const Vector& raw);

/// True when every label is identical.
bool labels_degenerate(const Vector& labels);

/// Per-column affine standardization fitted on one dataset and applied to others.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const RowMatrix& features);
  void apply(RowMatrix& features) const;
};

void append_bias_column(Dataset& data);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

/// Random permutation split; `train_fraction` in (0, 1).
TrainTestSplit train_test_split(const Dataset& data, double train_fraction, CounterRng& rng);

/// Linearly separable data: features ~ N(0, I_p), unit separating direction w*,
/// points with |w*.c| < margin rejected, label = sign(w*.c).
Dataset make_separable(std::size_t n, std::size_t p, double margin, CounterRng& rng);

void save_csv(const Dataset& data, const std::string& path);

}  // namespace parvi
