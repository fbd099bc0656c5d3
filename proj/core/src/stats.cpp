#include "miceval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "miceval/errors.hpp"

namespace miceval::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw InsufficientDataError("mean of empty series");
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

double population_std(std::span<const double> xs) {
  if (xs.empty()) throw InsufficientDataError("std of empty series");
  const double m = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) throw InsufficientDataError("sample std needs n >= 2");
  const double m = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

double cv(std::span<const double> xs) {
  if (xs.size() < 2) throw InsufficientDataError("cv needs n >= 2");
  const double m = mean(xs);
  if (m == 0.0) throw UndefinedStatError("cv undefined for zero mean");
  return population_std(xs) / m;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw ValidationError("pearson: series length mismatch");
  if (x.size() < 3) throw InsufficientDataError("pearson needs n >= 3");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw UndefinedStatError("pearson undefined for zero-variance series");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    // ranks i+1 .. j+1 tie; assign their mean
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw ValidationError("spearman: series length mismatch");
  if (x.size() < 3) throw InsufficientDataError("spearman needs n >= 3");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

double fisher_mean(std::span<const double> correlations) {
  if (correlations.empty())
    throw InsufficientDataError("fisher_mean of empty series");
  double acc = 0.0;
  for (double r : correlations) {
    if (r < -1.0 || r > 1.0)
      throw ValidationError("fisher_mean: correlation outside [-1, 1]");
    const double c = std::clamp(r, -(1.0 - kFisherClampEps), 1.0 - kFisherClampEps);
    acc += std::atanh(c);
  }
  return std::tanh(acc / static_cast<double>(correlations.size()));
}

double silverman_bandwidth(std::span<const double> values) {
  if (values.empty()) throw InsufficientDataError("bandwidth of empty series");
  const double sigma = population_std(values);
  return 1.06 * sigma *
         std::pow(static_cast<double>(values.size()), -0.2);
}

KdeResult kde(std::span<const double> values, double lo, double hi,
              std::size_t grid_size, std::optional<double> bandwidth) {
  if (values.empty()) throw InsufficientDataError("kde of empty series");
  if (!(hi > lo)) throw ValidationError("kde: empty grid interval");
  if (grid_size < 2) throw ValidationError("kde: grid needs >= 2 points");

  double h = bandwidth.value_or(silverman_bandwidth(values));
  if (h <= 0.0) {
    h = 0.05 * (hi - lo);  // all values identical: rule of thumb degenerates
    spdlog::warn("kde: zero rule-of-thumb bandwidth, falling back to {}", h);
  }

  KdeResult out;
  out.bandwidth = h;
  out.grid.resize(grid_size);
  out.density.resize(grid_size);
  const double step = (hi - lo) / static_cast<double>(grid_size - 1);
  const double norm =
      1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * M_PI));
  for (std::size_t i = 0; i < grid_size; ++i) {
    const double g = lo + step * static_cast<double>(i);
    out.grid[i] = g;
    double acc = 0.0;
    for (double v : values) {
      const double z = (g - v) / h;
      acc += std::exp(-0.5 * z * z);
    }
    out.density[i] = norm * acc;
  }
  return out;
}

std::vector<std::size_t> local_maxima(std::span<const double> ys) {
  std::vector<std::size_t> peaks;
  const std::size_t n = ys.size();
  std::size_t i = 1;
  while (i + 1 < n) {
    if (ys[i] > ys[i - 1]) {
      // ride out a plateau
      std::size_t j = i;
      while (j + 1 < n && ys[j + 1] == ys[i]) ++j;
      if (j + 1 < n && ys[j + 1] < ys[i]) {
        peaks.push_back((i + j) / 2);
      }
      i = j + 1;
    } else {
      ++i;
    }
  }
  return peaks;
}

double trapezoid(std::span<const double> grid, std::span<const double> ys) {
  if (grid.size() != ys.size())
    throw ValidationError("trapezoid: grid/value length mismatch");
  if (grid.size() < 2) throw InsufficientDataError("trapezoid needs n >= 2");
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    acc += 0.5 * (ys[i] + ys[i + 1]) * (grid[i + 1] - grid[i]);
  }
  return acc;
}

double pooled_std(std::span<const GroupStd> groups) {
  double num = 0.0;
  double den = 0.0;
  std::size_t dropped = 0;
  for (const auto& g : groups) {
    if (g.n < 2) {
      ++dropped;
      continue;
    }
    const double w = static_cast<double>(g.n - 1);
    num += w * g.s * g.s;
    den += w;
  }
  if (dropped > 0)
    spdlog::warn("pooled_std: dropped {} group(s) with n < 2", dropped);
  if (den == 0.0)
    throw InsufficientDataError("pooled_std: no group with n >= 2");
  return std::sqrt(num / den);
}

}  // namespace miceval::stats
