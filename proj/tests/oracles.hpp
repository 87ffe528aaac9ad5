#pragma once

// Independent reference computations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include "confmc/conformal.hpp"
#include "confmc/matrix.hpp"
#include "confmc/random.hpp"

namespace oracle {

using confmc::Index;
using confmc::Matrix;

/// Sort atoms (+inf last), scan the running mass, return the first atom
/// whose cumulative mass reaches level - slack.
inline double quantile_by_scan(const confmc::WeightedEmpirical& dist, double level) {
  std::vector<std::pair<double, double>> atoms;
  for (std::size_t k = 0; k < dist.atoms.size(); ++k) atoms.emplace_back(dist.atoms[k], dist.weights[k]);
  if (dist.infinity_weight > 0.0) atoms.emplace_back(confmc::kInfinity, dist.infinity_weight);
  std::stable_sort(atoms.begin(), atoms.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  double total = 0.0;  // accumulated in sorted order
  for (const auto& a : atoms) total += a.second;
  double running = 0.0;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    running += atoms[k].second;
    const bool last_of_tie = k + 1 == atoms.size() || atoms[k + 1].first != atoms[k].first;
    if (last_of_tie && running / total >= level - confmc::kQuantileSlack) return atoms[k].first;
  }
  return confmc::kInfinity;
}

/// Central finite-difference derivative with step 1e-5 (1 + |x|).
inline double central_difference(const std::function<double(double)>& f, double x) {
  const double h = 1e-5 * (1.0 + std::abs(x));
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Relative agreement used for gradient checks.
inline bool gradient_close(double analytic, double numeric, double tol) {
  return std::abs(analytic - numeric) <= tol * std::max(1.0, std::abs(analytic));
}

struct EnumerationResult {
  double max_error = 0.0;
  std::size_t bags = 0;
};

/// Exhaustive check that, conditional on the training set and the bag
/// S_cal + {test}, the test point sits at bag position k with probability
/// h_k / sum_bag h. Enumerates every observation pattern Z, every train /
/// calibration assignment W of the observed entries and a uniform test
/// draw from the unobserved entries.
inline EnumerationResult enumerate_test_position(const Matrix& p, double q) {
  const Index n = p.size();
  std::vector<double> pv(p.data(), p.data() + n);
  // key: (train bits, bag bits) -> per-cell probability of being the test point
  std::map<std::pair<unsigned, unsigned>, std::vector<double>> groups;
  for (unsigned z = 0; z < (1u << n); ++z) {
    double pz = 1.0;
    std::vector<int> observed, missing;
    for (Index k = 0; k < n; ++k) {
      if (z >> k & 1u) {
        pz *= pv[k];
        observed.push_back(static_cast<int>(k));
      } else {
        pz *= 1.0 - pv[k];
        missing.push_back(static_cast<int>(k));
      }
    }
    if (missing.empty()) continue;
    const std::size_t m = observed.size();
    for (unsigned w = 0; w < (1u << m); ++w) {
      unsigned train = 0, cal = 0;
      double pw = 1.0;
      for (std::size_t k = 0; k < m; ++k) {
        if (w >> k & 1u) {
          train |= 1u << observed[k];
          pw *= q;
        } else {
          cal |= 1u << observed[k];
          pw *= 1.0 - q;
        }
      }
      for (int t : missing) {
        auto& slot = groups[{train, cal | 1u << t}];
        if (slot.empty()) slot.assign(n, 0.0);
        slot[t] += pz * pw / static_cast<double>(missing.size());
      }
    }
  }
  EnumerationResult result;
  for (const auto& [key, mass] : groups) {
    const unsigned bag = key.second;
    double total = 0.0, h_total = 0.0;
    for (Index k = 0; k < n; ++k)
      if (bag >> k & 1u) {
        total += mass[k];
        h_total += (1.0 - pv[k]) / pv[k];
      }
    for (Index k = 0; k < n; ++k)
      if (bag >> k & 1u) {
        const double expected = (1.0 - pv[k]) / pv[k] / h_total;
        result.max_error = std::max(result.max_error, std::abs(mass[k] / total - expected));
      }
    ++result.bags;
  }
  return result;
}

/// Bisection for the threshold of the simplex projection.
inline std::vector<double> l1_ball_by_bisection(const std::vector<double>& x, double radius) {
  double s = 0.0;
  for (double v : x) s += std::max(v, 0.0);
  std::vector<double> out(x.size());
  if (s <= radius) {
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = std::max(x[k], 0.0);
    return out;
  }
  double lo = 0.0, hi = *std::max_element(x.begin(), x.end());
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double t = 0.0;
    for (double v : x) t += std::max(v - mid, 0.0);
    (t > radius ? lo : hi) = mid;
  }
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = std::max(x[k] - 0.5 * (lo + hi), 0.0);
  return out;
}

/// Random WeightedEmpirical with `n` finite atoms drawn from a small grid
/// (to exercise ties) and an optional +inf atom.
inline confmc::WeightedEmpirical random_empirical(confmc::RandomSource& rng, std::size_t n,
                                                  bool with_infinity) {
  confmc::WeightedEmpirical d;
  std::vector<double> raw;
  for (std::size_t k = 0; k < n; ++k) {
    d.atoms.push_back(std::floor(rng.uniform() * 20.0) / 4.0);
    raw.push_back(rng.uniform());
  }
  const double inf_raw = with_infinity ? rng.uniform() : 0.0;
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0) + inf_raw;
  for (double r : raw) d.weights.push_back(r / total);
  d.infinity_weight = inf_raw / total;
  return d;
}

}  // namespace oracle
