#include "qmcopt/lattice.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace qmcopt {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

bool is_pow2(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

void validate_rule(const GeneratingVector& g) {
  if (!is_pow2(g.n)) throw std::invalid_argument("generating vector: n must be a power of two");
  if (g.gen.size() != g.s) throw std::invalid_argument("generating vector: size mismatch");
  for (std::uint64_t z : g.gen) {
    if (g.n == 1) {
      if (z != 1) throw std::invalid_argument("generating vector: n=1 expects all-ones");
    } else if (!(z % 2 == 1 && z >= 1 && z < g.n)) {
      throw std::invalid_argument("generating vector: components must be odd in [1, n)");
    }
  }
}

// Extended precision keeps the heavily cancelling kernel sums (the total is
// orders of magnitude below the individual terms) accurate to well under
// 1e-12 relative; k(k-n) is exact in the 64-bit mantissa for any admissible n.
std::vector<long double> b2_table(std::size_t n) {
  std::vector<long double> tab(n);
  const long double nn = static_cast<long double>(n) * static_cast<long double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const long double num =
        static_cast<long double>(k) * static_cast<long double>(k) -
        static_cast<long double>(k) * static_cast<long double>(n);
    tab[k] = num / nn + 1.0L / 6.0L;
  }
  return tab;
}

// Highest order level whose contribution can exceed ~1e-287 in magnitude:
// |Gamma_l e_l| <= Gamma_l (sum_j gamma_j/6)^l / l!. Levels above are never stored.
std::size_t order_cap(const WeightSpec& w, std::size_t s) {
  double a = 0.0;
  for (std::size_t j = 0; j < s; ++j) a += w.product_factors[j] / 6.0;
  const double log_a = std::log(a);
  std::size_t cap = 1;
  for (std::size_t l = 1; l <= s; ++l) {
    const double log_bound =
        w.log_order_factors[l] + static_cast<double>(l) * log_a - std::lgamma(l + 1.0);
    if (log_bound >= -660.0) cap = l;
  }
  return cap;
}

// w(i) = sum_{l=0}^{top} (l+2)^q v_l(i): the linear functional whose pairing with the
// candidate kernel values scores one CBC step.
std::vector<double> score_weights(const std::vector<std::vector<double>>& v, double q) {
  const std::size_t n = v[0].size();
  std::vector<double> w(n, 0.0);
  for (std::size_t l = 0; l < v.size(); ++l) {
    const double r = std::pow(static_cast<double>(l) + 2.0, q);
    const double* vl = v[l].data();
    for (std::size_t i = 0; i < n; ++i) w[i] += r * vl[i];
  }
  return w;
}

double score_exact(std::size_t n, std::uint64_t z, const std::vector<long double>& b2,
                   const std::vector<double>& w) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < n; ++i) s += b2[(i * z) % n] * w[i];
  return static_cast<double>(s);
}

// Smallest candidate within a tight relative band of the minimum. Both construction
// methods funnel exact scores through this single rule.
std::uint64_t select_winner(const std::vector<std::pair<std::uint64_t, double>>& scored) {
  double smin = scored.front().second;
  for (const auto& [z, sv] : scored) smin = std::min(smin, sv);
  const double threshold = smin + std::fabs(smin) * 1e-9 + 1e-300;
  std::uint64_t best = 0;
  bool have = false;
  for (const auto& [z, sv] : scored) {
    if (sv <= threshold && (!have || z < best)) {
      best = z;
      have = true;
    }
  }
  return best;
}

std::vector<std::uint64_t> odd_candidates(std::size_t n) {
  std::vector<std::uint64_t> c;
  const std::size_t hi = std::max<std::size_t>(n / 2, 2);
  for (std::uint64_t z = 1; z < hi; z += 2) c.push_back(z);
  return c;
}

// Fast per-dimension scorer: decompose i = 2^k u (u odd mod M = 2^(m-k)); for M >= 8
// the odd residues split as (-1)^sigma 5^t and the score becomes circular correlations
// of length M/4, done with FFTs. Kernel-side spectra depend only on B2, so they are
// computed once per construction.
class FastScorer {
 public:
  FastScorer(std::size_t n, const std::vector<double>& b2) : n_(n), b2_(b2) {
    std::size_t m = 0;
    while ((std::size_t{1} << m) < n) ++m;
    for (std::size_t k = 0; m >= k + 3; ++k) {
      levels_.emplace_back();
      Level& lv = levels_.back();
      lv.k = k;
      lv.M = n >> k;
      lv.L = lv.M >> 2;
      lv.idx.assign(2, std::vector<std::size_t>(lv.L));
      lv.zmap.assign(lv.M / 2, {0, 0});
      std::uint64_t pos = 1;
      for (std::size_t t = 0; t < lv.L; ++t) {
        const std::uint64_t nega = lv.M - pos;
        lv.idx[0][t] = (pos << k);
        lv.idx[1][t] = (nega << k);
        lv.zmap[pos >> 1] = {0, t};
        lv.zmap[nega >> 1] = {1, t};
        pos = (pos * 5) % lv.M;
      }
      lv.buf_in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * lv.L));
      lv.buf_out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * lv.L));
      lv.fwd = fftw_plan_dft_1d(static_cast<int>(lv.L), lv.buf_in, lv.buf_out, FFTW_FORWARD,
                                FFTW_ESTIMATE);
      lv.bwd = fftw_plan_dft_1d(static_cast<int>(lv.L), lv.buf_in, lv.buf_out, FFTW_BACKWARD,
                                FFTW_ESTIMATE);
      for (int sigma = 0; sigma < 2; ++sigma) {
        lv.kernel_spec[sigma].resize(lv.L);
        for (std::size_t t = 0; t < lv.L; ++t) {
          lv.buf_in[t][0] = b2_[lv.idx[sigma][t]];
          lv.buf_in[t][1] = 0.0;
        }
        fftw_execute(lv.fwd);
        for (std::size_t t = 0; t < lv.L; ++t) {
          lv.kernel_spec[sigma][t] = {lv.buf_out[t][0], lv.buf_out[t][1]};
        }
      }
      lv.x[0].resize(lv.L);
      lv.x[1].resize(lv.L);
      lv.wspec[0].resize(lv.L);
      lv.wspec[1].resize(lv.L);
    }
  }

  ~FastScorer() {
    for (Level& lv : levels_) {
      fftw_destroy_plan(lv.fwd);
      fftw_destroy_plan(lv.bwd);
      fftw_free(lv.buf_in);
      fftw_free(lv.buf_out);
    }
  }

  FastScorer(const FastScorer&) = delete;
  FastScorer& operator=(const FastScorer&) = delete;

  // Approximate scores for all candidates, given the per-point weights.
  void score(const std::vector<double>& w, const std::vector<std::uint64_t>& cands,
             std::vector<double>& out) {
    double base = b2_[0] * w[0];
    if (n_ >= 2) base += b2_[n_ / 2] * w[n_ / 2];  // M = 2 level: single term, z-independent
    double s4_1 = 0.0, s4_3 = 0.0;
    if (n_ >= 4) {  // M = 4 level: two terms, depends on z mod 4
      const std::size_t q = n_ / 4;
      s4_1 = b2_[q] * w[q] + b2_[3 * q] * w[3 * q];
      s4_3 = b2_[3 * q] * w[q] + b2_[q] * w[3 * q];
    }
    for (Level& lv : levels_) {
      for (int sigma = 0; sigma < 2; ++sigma) {
        for (std::size_t t = 0; t < lv.L; ++t) {
          lv.buf_in[t][0] = w[lv.idx[sigma][t]];
          lv.buf_in[t][1] = 0.0;
        }
        fftw_execute(lv.fwd);
        for (std::size_t t = 0; t < lv.L; ++t) {
          lv.wspec[sigma][t] = {lv.buf_out[t][0], lv.buf_out[t][1]};
        }
      }
      const double inv_l = 1.0 / static_cast<double>(lv.L);
      for (int tau = 0; tau < 2; ++tau) {
        for (std::size_t t = 0; t < lv.L; ++t) {
          const std::complex<double> p = lv.kernel_spec[tau][t] * std::conj(lv.wspec[0][t]) +
                                         lv.kernel_spec[1 - tau][t] * std::conj(lv.wspec[1][t]);
          lv.buf_in[t][0] = p.real();
          lv.buf_in[t][1] = p.imag();
        }
        fftw_execute(lv.bwd);
        for (std::size_t t = 0; t < lv.L; ++t) lv.x[tau][t] = lv.buf_out[t][0] * inv_l;
      }
    }
    out.resize(cands.size());
    for (std::size_t c = 0; c < cands.size(); ++c) {
      const std::uint64_t z = cands[c];
      double s = base;
      if (n_ >= 4) s += ((z & 3) == 1) ? s4_1 : s4_3;
      for (const Level& lv : levels_) {
        const auto [tau, r] = lv.zmap[(z & (lv.M - 1)) >> 1];
        s += lv.x[tau][r];
      }
      out[c] = s;
    }
  }

 private:
  struct Level {
    std::size_t k = 0, M = 0, L = 0;
    std::vector<std::vector<std::size_t>> idx;               // [sigma][t] -> point index
    std::vector<std::pair<std::uint8_t, std::size_t>> zmap;  // odd residue -> (tau, r)
    std::vector<std::complex<double>> kernel_spec[2];
    std::vector<std::complex<double>> wspec[2];
    std::vector<double> x[2];
    fftw_complex* buf_in = nullptr;
    fftw_complex* buf_out = nullptr;
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
  };

  std::size_t n_;
  std::vector<double> b2_;
  std::vector<Level> levels_;
};

}  // namespace

double WeightSpec::order_factor(std::size_t l) const {
  if (l >= log_order_factors.size()) throw std::out_of_range("order_factor");
  return std::exp(log_order_factors[l]);
}

double WeightSpec::order_ratio(std::size_t l) const {
  if (l < 1 || l >= log_order_factors.size()) throw std::out_of_range("order_ratio");
  return std::pow(static_cast<double>(l) + 1.0, exponent);
}

double WeightSpec::pod_weight(const std::vector<std::size_t>& u) const {
  if (u.size() > s) throw std::invalid_argument("pod_weight: subset larger than s");
  double lg = log_order_factors[u.size()];
  for (std::size_t j : u) {
    if (j < 1 || j > s) throw std::invalid_argument("pod_weight: dimension out of range");
    lg += std::log(product_factors[j - 1]);
  }
  return std::exp(lg);
}

double WeightSpec::cgs_diagnostic() const {
  // t_l = Gamma_l^lambda rho^l e_l(gamma^lambda), accumulated dimension by dimension.
  std::vector<double> t(s + 1, 0.0);
  t[0] = 1.0;
  for (std::size_t j = 0; j < s; ++j) {
    const double a = std::pow(product_factors[j], lambda) * rho;
    for (std::size_t l = std::min(j + 1, s); l >= 1; --l) {
      t[l] += a * std::pow(static_cast<double>(l) + 1.0, exponent * lambda) * t[l - 1];
    }
  }
  double sum = 0.0;
  for (std::size_t l = 1; l <= s; ++l) sum += t[l];
  return std::pow(sum, 1.0 / (2.0 * lambda));
}

double choose_lambda(double p, double delta) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("choose_lambda: p must be in (0,1)");
  if (!(delta > 0.0 && delta < 0.5)) {
    throw std::invalid_argument("choose_lambda: delta must be in (0,1/2)");
  }
  if (p <= 2.0 / 3.0) return 1.0 / (2.0 - 2.0 * delta);
  return p / (2.0 - p);
}

double zeta(double x) {
  if (!(x > 1.0)) throw std::invalid_argument("zeta: requires x > 1");
  const int N = 100;
  double s = 0.0;
  for (int k = 1; k <= N; ++k) s += std::pow(static_cast<double>(k), -x);
  const double nx = std::pow(static_cast<double>(N), -x);
  s += nx * N / (x - 1.0);  // integral tail
  s -= 0.5 * nx;
  s += x * nx / N / 12.0;
  s -= x * (x + 1.0) * (x + 2.0) * nx / (static_cast<double>(N) * N * N) / 720.0;
  return s;
}

WeightSpec pod_weights(const std::vector<double>& b, double lambda, std::size_t s, double p,
                       double delta) {
  if (s < 1 || b.size() < s) throw std::invalid_argument("pod_weights: need s >= 1 entries in b");
  if (!(lambda > 0.5 && lambda <= 1.0)) {
    throw std::invalid_argument("pod_weights: lambda must be in (1/2, 1]");
  }
  WeightSpec w;
  w.p = p;
  w.delta = delta;
  w.lambda = lambda;
  w.exponent = 2.0 / (1.0 + lambda);
  w.rho = 2.0 * zeta(2.0 * lambda) / std::pow(2.0 * kPi * kPi, lambda);
  w.s = s;
  w.b.assign(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(s));
  w.product_factors.resize(s);
  const double sqrt_rho = std::sqrt(w.rho);
  for (std::size_t j = 0; j < s; ++j) {
    if (!(b[j] > 0.0)) throw std::invalid_argument("pod_weights: b entries must be positive");
    w.product_factors[j] = std::pow(b[j] / sqrt_rho, w.exponent);
  }
  w.log_order_factors.resize(s + 1);
  for (std::size_t l = 0; l <= s; ++l) {
    w.log_order_factors[l] = w.exponent * std::lgamma(static_cast<double>(l) + 2.0);
  }
  return w;
}

double wce_squared(const GeneratingVector& g, const WeightSpec& w) {
  validate_rule(g);
  if (w.s < g.s) throw std::invalid_argument("wce_squared: weights cover fewer dims than gen");
  const std::size_t n = g.n;
  const std::vector<long double> b2 = b2_table(n);
  const std::size_t cap = order_cap(w, g.s);
  std::vector<double> ratio(cap + 1, 0.0);
  for (std::size_t l = 1; l <= cap; ++l) ratio[l] = std::pow(static_cast<double>(l) + 1.0, w.exponent);

  long double total = 0.0L;
  std::vector<long double> v(cap + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(v.begin(), v.end(), 0.0L);
    v[0] = 1.0L;
    for (std::size_t d = 0; d < g.s; ++d) {
      const long double a = w.product_factors[d] * b2[(i * g.gen[d]) % n];
      const std::size_t top = std::min(d + 1, cap);
      for (std::size_t l = top; l >= 1; --l) v[l] += a * ratio[l] * v[l - 1];
    }
    long double point = 0.0L;
    for (std::size_t l = cap; l >= 1; --l) point += v[l];
    total += point;
  }
  return static_cast<double>(total / static_cast<long double>(n));
}

GeneratingVector cbc_construct(std::size_t n, std::size_t s, const WeightSpec& w,
                               CbcMethod method, std::vector<double>* prefix_wce2) {
  if (!is_pow2(n) || n < 2) {
    throw std::invalid_argument("cbc_construct: n must be a power of two >= 2");
  }
  if (s < 1 || w.s < s) throw std::invalid_argument("cbc_construct: need weights for s >= 1 dims");

  const std::vector<long double> b2 = b2_table(n);
  const std::vector<double> b2d(b2.begin(), b2.end());  // for the FFT path and updates
  const std::vector<std::uint64_t> cands = odd_candidates(n);
  const std::size_t cap = order_cap(w, s);
  std::vector<double> ratio(cap + 1, 0.0);
  for (std::size_t l = 1; l <= cap; ++l) ratio[l] = std::pow(static_cast<double>(l) + 1.0, w.exponent);

  std::unique_ptr<FastScorer> scorer;
  if (method == CbcMethod::fast) scorer = std::make_unique<FastScorer>(n, b2d);

  GeneratingVector g;
  g.n = n;
  g.s = s;
  if (prefix_wce2) prefix_wce2->clear();

  std::vector<std::vector<double>> v;
  v.emplace_back(n, 1.0);
  double err = 0.0;
  std::vector<double> fast_scores;
  std::vector<std::pair<std::uint64_t, double>> scored;

  for (std::size_t d = 1; d <= s; ++d) {
    const std::vector<double> wt = score_weights(v, w.exponent);
    scored.clear();
    std::uint64_t win = 0;
    if (method == CbcMethod::naive) {
      for (std::uint64_t z : cands) scored.emplace_back(z, score_exact(n, z, b2, wt));
      win = select_winner(scored);
    } else if (d == 1) {
      // All one-dimensional projections coincide for odd z; smallest candidate wins.
      win = 1;
      scored.emplace_back(win, score_exact(n, win, b2, wt));
    } else {
      scorer->score(wt, cands, fast_scores);
      double fmin = fast_scores[0], fmax_abs = 0.0;
      for (double sv : fast_scores) {
        fmin = std::min(fmin, sv);
        fmax_abs = std::max(fmax_abs, std::fabs(sv));
      }
      const double margin = 1e-6 * std::fabs(fmin) + 1e-11 * fmax_abs + 1e-300;
      for (std::size_t c = 0; c < cands.size(); ++c) {
        if (fast_scores[c] <= fmin + margin) {
          scored.emplace_back(cands[c], score_exact(n, cands[c], b2, wt));
        }
      }
      win = select_winner(scored);
    }
    g.gen.push_back(win);

    double win_score = 0.0;
    for (const auto& [z, sv] : scored) {
      if (z == win) win_score = sv;
    }
    err += w.product_factors[d - 1] * win_score / static_cast<double>(n);
    if (prefix_wce2) prefix_wce2->push_back(err);

    if (v.size() <= std::min(d, cap)) v.emplace_back(n, 0.0);
    for (std::size_t l = v.size() - 1; l >= 1; --l) {
      double* vl = v[l].data();
      const double* vp = v[l - 1].data();
      const double gd = w.product_factors[d - 1];
      const double r = ratio[l];
      for (std::size_t i = 0; i < n; ++i) {
        vl[i] += gd * b2d[(i * win) % n] * r * vp[i];
      }
    }
  }
  return g;
}

std::vector<std::vector<double>> lattice_points(const GeneratingVector& g, std::size_t n,
                                                const std::vector<double>& shift) {
  validate_rule(g);
  if (n != g.n) throw std::invalid_argument("lattice_points: n disagrees with gen");
  if (shift.size() != g.s) throw std::invalid_argument("lattice_points: shift size mismatch");
  for (double d : shift) {
    if (!(d >= 0.0 && d < 1.0)) throw std::invalid_argument("lattice_points: shift not in [0,1)");
  }
  std::vector<std::vector<double>> pts(n, std::vector<double>(g.s));
  for (std::size_t i = 1; i <= n; ++i) {
    std::vector<double>& y = pts[i - 1];
    for (std::size_t j = 0; j < g.s; ++j) {
      const double t = static_cast<double>((i * g.gen[j]) % n) / static_cast<double>(n) + shift[j];
      y[j] = (t >= 1.0 ? t - 1.0 : t) - 0.5;
    }
  }
  return pts;
}

ShiftSet random_shifts(std::size_t R, std::size_t s, std::uint64_t seed) {
  if (R < 1 || s < 1) throw std::invalid_argument("random_shifts: R and s must be >= 1");
  ShiftSet set;
  set.R = R;
  set.s = s;
  set.seed = seed;
  std::mt19937_64 gen(seed);
  set.shifts.assign(R, std::vector<double>(s));
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t j = 0; j < s; ++j) set.shifts[r][j] = unit_double(gen);
  }
  return set;
}

std::string serialize_generating_vector(const GeneratingVector& g, double lambda, double p,
                                        double theta) {
  validate_rule(g);
  char buf[64];
  std::string out;
  out += "n=" + std::to_string(g.n) + "\n";
  out += "s=" + std::to_string(g.s) + "\n";
  std::snprintf(buf, sizeof buf, "lambda=%.17g\n", lambda);
  out += buf;
  std::snprintf(buf, sizeof buf, "p=%.17g\n", p);
  out += buf;
  std::snprintf(buf, sizeof buf, "theta=%.17g\n", theta);
  out += buf;
  for (std::uint64_t z : g.gen) out += std::to_string(z) + "\n";
  return out;
}

void save_generating_vector(const std::string& path, const GeneratingVector& g, double lambda,
                            double p, double theta) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_generating_vector: cannot open " + path);
  f << serialize_generating_vector(g, lambda, p, theta);
}

GeneratingVectorFile load_generating_vector(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_generating_vector: cannot open " + path);
  GeneratingVectorFile out;
  std::string line;
  auto expect = [&](const char* key) -> std::string {
    if (!std::getline(f, line) || line.rfind(key, 0) != 0) {
      throw std::runtime_error(std::string("load_generating_vector: expected ") + key);
    }
    return line.substr(std::string(key).size());
  };
  out.gen.n = std::stoull(expect("n="));
  out.gen.s = std::stoull(expect("s="));
  out.lambda = std::strtod(expect("lambda=").c_str(), nullptr);
  out.p = std::strtod(expect("p=").c_str(), nullptr);
  out.theta = std::strtod(expect("theta=").c_str(), nullptr);
  for (std::size_t j = 0; j < out.gen.s; ++j) {
    if (!std::getline(f, line)) {
      throw std::runtime_error("load_generating_vector: truncated component list");
    }
    out.gen.gen.push_back(std::stoull(line));
  }
  validate_rule(out.gen);
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace qmcopt
