#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace miceval::stats {

double mean(std::span<const double> xs);

/// Standard deviation with 1/n normalization.
double population_std(std::span<const double> xs);

/// Standard deviation with 1/(n-1) normalization; requires n >= 2.
double sample_std(std::span<const double> xs);

/// Coefficient of variation: population std divided by mean.
/// Throws InsufficientDataError for n < 2, UndefinedStatError for mean == 0.
double cv(std::span<const double> xs);

/// Sample Pearson correlation. Requires equal lengths >= 3 and nonzero
/// variance on both sides (UndefinedStatError otherwise).
double pearson(std::span<const double> x, std::span<const double> y);

/// Average ranks (1-based); ties receive the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> xs);

/// Spearman rank correlation: Pearson of average-ranked values.
/// An all-tied series has zero rank variance and is undefined.
double spearman(std::span<const double> x, std::span<const double> y);

/// Clamp applied before atanh so pairwise correlations of exactly +/-1
/// stay finite.
inline constexpr double kFisherClampEps = 1e-6;

/// Fisher-transformed mean of correlation coefficients:
/// tanh(mean(atanh(clamp(r)))). Throws InsufficientDataError when empty.
double fisher_mean(std::span<const double> correlations);

/// Silverman's rule of thumb, 1.06 * sigma * n^(-1/5), with sigma the
/// population std. Returns 0 when all values coincide.
double silverman_bandwidth(std::span<const double> values);

struct KdeResult {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

/// Gaussian kernel density estimate evaluated on grid_size evenly spaced
/// points over [lo, hi]. When bandwidth is not given, Silverman's rule is
/// used; a zero rule-of-thumb bandwidth falls back to 0.05 * (hi - lo).
KdeResult kde(std::span<const double> values, double lo, double hi,
              std::size_t grid_size = 256,
              std::optional<double> bandwidth = std::nullopt);

/// Indices of strict local maxima of a curve (interior points above both
/// neighbors, plus plateau peaks).
std::vector<std::size_t> local_maxima(std::span<const double> ys);

/// Trapezoid integral of a curve sampled on an evenly spaced grid.
double trapezoid(std::span<const double> grid, std::span<const double> ys);

struct GroupStd {
  std::size_t n = 0;  // group size
  double s = 0.0;     // group (sample) standard deviation
};

/// Pooled standard deviation: sqrt(sum (n_i - 1) s_i^2 / sum (n_i - 1)).
/// Groups with n < 2 are dropped with a warning; all dropped is an
/// InsufficientDataError.
double pooled_std(std::span<const GroupStd> groups);

}  // namespace miceval::stats
