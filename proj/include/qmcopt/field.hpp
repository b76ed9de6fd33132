#pragma once
// Affine parametric diffusion coefficient on the unit square:
//   a(x, y) = mean + sum_{j<=s} y_j * psi_j(x),   y_j in [-1/2, 1/2],
// with fluctuations psi_j(x) = (k_j^2 + l_j^2)^(-theta) sin(pi k_j x1) sin(pi l_j x2)
// ordered by non-increasing sup norm.

#include <cstddef>
#include <string>
#include <vector>

namespace qmcopt {

struct Frequency {
  int k = 0;
  int l = 0;
  double norm = 0.0;  // (k^2 + l^2)^(-theta); equals sup|psi_j| on the closed square
};

struct FrequencyTable {
  double theta = 2.0;
  std::vector<Frequency> entries;  // norm non-increasing; ties broken (k, l)-lexicographically
  std::size_t count() const { return entries.size(); }
};

// First `count` pairs of NxN sorted by k^2+l^2 ascending, ties by smaller k then smaller l.
FrequencyTable enumerate_frequencies(double theta, std::size_t count);

// psi_j evaluated at (x1, x2); j is 1-based.
double psi_eval(const FrequencyTable& freqs, std::size_t j, double x1, double x2);

// Upper bound on sum_{j>s} norm_j: exact window of the next 256 ordered norms plus an
// integral comparison over the remaining quarter-plane. Non-increasing in s, -> 0.
double tail_bound(const FrequencyTable& freqs, std::size_t s);

// Keep the first s parameter entries; downstream semantics are y_j = 0 for j > s.
std::vector<double> truncate(const std::vector<double>& y, std::size_t s);

struct CoefficientModel {
  double mean = 1.0;
  FrequencyTable freqs;    // >= s entries
  std::size_t s = 0;       // truncation dimension
  double sum_norms = 0.0;  // sum_{j<=s} norm_j
  double tail = 0.0;       // tail_bound(freqs, s)
  double a_min_bound = 0.0;  // mean - (sum_norms + tail)/2, guaranteed > 0
  double a_max_bound = 0.0;  // mean + (sum_norms + tail)/2
  std::vector<double> b;     // b_j = norm_j / a_min_bound, j = 1..s
};

// Throws if freqs has fewer than s entries or the lower coefficient bound is not positive.
CoefficientModel make_coefficient_model(double mean, const FrequencyTable& freqs, std::size_t s);

// a(x, y). Accepts y of length <= model.s (missing coordinates are zero, i.e. truncated).
double coeff_eval(const CoefficientModel& m, double x1, double x2, const std::vector<double>& y);

// CSV columns: j,k,l,norm. Deterministic for fixed (theta, count).
void export_frequency_csv(const FrequencyTable& freqs, const std::string& path);

}  // namespace qmcopt
