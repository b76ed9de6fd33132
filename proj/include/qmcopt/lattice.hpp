#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace qmcopt {

// Product-and-order-dependent weight family
//   gamma_u = Gamma_{|u|} * prod_{j in u} gamma_j,
//   Gamma_l = ((l+1)!)^(2/(1+lambda)),   gamma_j = (b_j / sqrt(rho))^(2/(1+lambda)),
//   rho = 2 zeta(2 lambda) / (2 pi^2)^lambda.
// Factorial powers are kept in log space; consumers work with the finite ratios
// Gamma_l / Gamma_{l-1} = (l+1)^(2/(1+lambda)).
struct WeightSpec {
  double p = 0.0;        // summability exponent the weights were derived for (0 = unset)
  double delta = 0.0;    // rate-loss parameter used by choose_lambda (0 = unset)
  double lambda = 0.0;
  double rho = 0.0;
  double exponent = 0.0;  // 2 / (1 + lambda)
  std::size_t s = 0;
  std::vector<double> b;                  // b_j, j = 1..s (0-indexed storage)
  std::vector<double> product_factors;    // gamma_j
  std::vector<double> log_order_factors;  // log Gamma_l, l = 0..s

  double order_factor(std::size_t l) const;  // Gamma_l (may overflow to inf; diagnostics only)
  double order_ratio(std::size_t l) const;   // Gamma_l / Gamma_{l-1}, l >= 1
  // gamma_u for u given as 1-based dimension indices (log-space product).
  double pod_weight(const std::vector<std::size_t>& u) const;
  // [sum_{0<|u|<=s} gamma_u^lambda * rho^|u|]^(1/(2 lambda)): a proxy for the error-bound constant.
  double cgs_diagnostic() const;
};

// lambda = 1/(2-2 delta) if p <= 2/3, else p/(2-p).
double choose_lambda(double p, double delta);

// Riemann zeta for x > 1, relative accuracy ~1e-12 (partial sum + tail corrections).
double zeta(double x);

// Build the WeightSpec for the first s entries of b. p/delta are recorded verbatim
// as provenance metadata (pass 0 if not applicable).
WeightSpec pod_weights(const std::vector<double>& b, double lambda, std::size_t s,
                       double p = 0.0, double delta = 0.0);

// Rank-1 lattice rule with n = 2^m points.
struct GeneratingVector {
  std::size_t n = 0;
  std::size_t s = 0;
  std::vector<std::uint64_t> gen;  // s odd integers in [1, n)
};

enum class CbcMethod { naive, fast };

// Shift-averaged squared worst-case error of the rule:
//   sum_{emptyset != u} gamma_u (1/n) sum_i prod_{j in u} B2(frac(i gen_j / n)),
// B2(t) = t^2 - t + 1/6, evaluated with the per-point order recursion.
double wce_squared(const GeneratingVector& gen, const WeightSpec& w);

// Component-by-component construction over odd candidates in [1, n/2) (the mirror
// z -> n-z yields the same one-dimensional projections, so nothing is lost), smallest
// near-minimal candidate wins. The fast method uses the multiplicative structure of
// the odd residues mod 2^m and FFT-based circular correlation, then re-scores the
// near-minimal set with the naive kernel: its output is identical to CbcMethod::naive.
GeneratingVector cbc_construct(std::size_t n, std::size_t s, const WeightSpec& w,
                               CbcMethod method = CbcMethod::fast,
                               std::vector<double>* prefix_wce2 = nullptr);

// Shifted points y^(i) = frac(i gen / n + shift) - 1/2, i = 1..n, in [-1/2, 1/2)^s.
std::vector<std::vector<double>> lattice_points(const GeneratingVector& gen, std::size_t n,
                                                const std::vector<double>& shift);

struct ShiftSet {
  std::size_t R = 0;
  std::size_t s = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> shifts;  // R vectors in [0,1)^s
};

ShiftSet random_shifts(std::size_t R, std::size_t s, std::uint64_t seed);

// Uniform double in [0,1) from the top 53 bits; avoids distribution-implementation drift.
inline double unit_double(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Plain-text persistence: header lines n=, s=, lambda=, p=, theta=, then one odd
// integer per line. Round-trips bit-exactly (%.17g floats).
std::string serialize_generating_vector(const GeneratingVector& gen, double lambda, double p,
                                        double theta);
void save_generating_vector(const std::string& path, const GeneratingVector& gen, double lambda,
                            double p, double theta);

struct GeneratingVectorFile {
  GeneratingVector gen;
  double lambda = 0.0;
  double p = 0.0;
  double theta = 0.0;
};
GeneratingVectorFile load_generating_vector(const std::string& path);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace qmcopt
