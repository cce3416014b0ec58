#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "otreg/models.hpp"
#include "otreg/types.hpp"

namespace otreg {

struct GeneratedData {
  ShuffledDataset train;
  ShuffledDataset test;
  ModelParams true_params;
  double noise_var = 0.0;  // resolved value (snr overrides the input)
};

/// Unlabeled-sensing protocol: d = 0, y_i = z_i^T w + noise, then a uniform
/// random permutation of a uniformly chosen shuffle_frac subset of the z
/// rows. The test set is drawn the same way without shuffling. When `snr`
/// is given, the noise variance is ||w||^2 / snr.
GeneratedData gen_unlabeled_sensing(int n, int e, double noise_var, double shuffle_frac,
                                    std::uint64_t seed, std::optional<double> snr = {});

/// Two-platform sine-model protocol: all z rows are shuffled; the first 80%
/// of (x, y) rows form D1-train while D2-train keeps all n z rows, so the
/// training sides have unequal sizes. The held-out rows with their true
/// partners form the test set.
GeneratedData gen_nonlinear(int n, int d, int e, double noise_var, std::uint64_t seed);

/// CSV with a single header line naming column roles: x0..x{d-1}, y,
/// z0..z{e-1}, perm. Sides of different lengths leave cells empty; perm is
/// empty when no ground-truth correspondence is recorded.
void write_dataset_csv(const std::string& path, const ShuffledDataset& data);
ShuffledDataset read_dataset_csv(const std::string& path);

void write_params_json(const std::string& path, const ModelParams& params);
ModelParams read_params_json(const std::string& path);

}  // namespace otreg
