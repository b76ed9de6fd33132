#include "qmcopt/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace qmcopt {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

FrequencyTable enumerate_frequencies(double theta, std::size_t count) {
  if (!(theta > 1.0)) throw std::invalid_argument("enumerate_frequencies: theta must be > 1");
  if (count == 0) throw std::invalid_argument("enumerate_frequencies: count must be >= 1");

  // A quarter disc of radius r holds ~ pi r^2 / 4 integer points; overshoot the radius,
  // collect, sort, cut. Retry with a bigger disc in the (unlikely) shortfall case.
  double r2 = 4.0 * static_cast<double>(count) / kPi +
              8.0 * std::sqrt(static_cast<double>(count)) + 16.0;
  for (;;) {
    std::vector<Frequency> all;
    const int kmax = static_cast<int>(std::sqrt(r2));
    for (int k = 1; k <= kmax; ++k) {
      for (int l = 1; static_cast<double>(k) * k + static_cast<double>(l) * l <= r2; ++l) {
        all.push_back({k, l, 0.0});
      }
    }
    if (all.size() >= count) {
      std::sort(all.begin(), all.end(), [](const Frequency& a, const Frequency& b) {
        const long ra = static_cast<long>(a.k) * a.k + static_cast<long>(a.l) * a.l;
        const long rb = static_cast<long>(b.k) * b.k + static_cast<long>(b.l) * b.l;
        if (ra != rb) return ra < rb;
        if (a.k != b.k) return a.k < b.k;
        return a.l < b.l;
      });
      all.resize(count);
      for (Frequency& f : all) {
        f.norm = std::pow(static_cast<double>(f.k) * f.k + static_cast<double>(f.l) * f.l, -theta);
      }
      FrequencyTable t;
      t.theta = theta;
      t.entries = std::move(all);
      return t;
    }
    r2 *= 2.0;
  }
}

double psi_eval(const FrequencyTable& freqs, std::size_t j, double x1, double x2) {
  if (j < 1 || j > freqs.count()) throw std::out_of_range("psi_eval: frequency index out of range");
  const Frequency& f = freqs.entries[j - 1];
  return f.norm * std::sin(kPi * f.k * x1) * std::sin(kPi * f.l * x2);
}

double tail_bound(const FrequencyTable& freqs, std::size_t s) {
  // Exact sum of the next K ordered norms, then an integral bound for everything past the
  // window: each remaining lattice point (k,l) has k^2+l^2 >= rho_c^2 and owns the unit cell
  // [k-1,k]x[l-1,l], which lies at radius >= rho_c - sqrt(2). Hence
  //   sum_{past window} norm <= (pi/2) * (rho_c - sqrt(2))^(2-2*theta) / (2*theta - 2).
  // The window size is a fixed constant, which makes the bound provably non-increasing in s:
  // advancing s swaps norm_{s+1} >= norm_{s+K+1} out of the exact part and shrinks the integral.
  constexpr std::size_t K = 256;
  const double theta = freqs.theta;
  const FrequencyTable ext = enumerate_frequencies(theta, s + K);
  double exact = 0.0;
  for (std::size_t j = s; j < s + K; ++j) exact += ext.entries[j].norm;
  const Frequency& cut = ext.entries[s + K - 1];
  const double rho =
      std::sqrt(static_cast<double>(cut.k) * cut.k + static_cast<double>(cut.l) * cut.l);
  const double r0 = rho - std::sqrt(2.0);  // > 0: the window never ends before radius ~18
  const double integral = (kPi / 2.0) * std::pow(r0, 2.0 - 2.0 * theta) / (2.0 * theta - 2.0);
  return exact + integral;
}

std::vector<double> truncate(const std::vector<double>& y, std::size_t s) {
  if (s >= y.size()) return y;
  return std::vector<double>(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(s));
}

CoefficientModel make_coefficient_model(double mean, const FrequencyTable& freqs, std::size_t s) {
  if (freqs.count() < s) throw std::invalid_argument("make_coefficient_model: table shorter than s");
  CoefficientModel m;
  m.mean = mean;
  m.freqs = freqs;
  m.s = s;
  m.sum_norms = 0.0;
  for (std::size_t j = 0; j < s; ++j) m.sum_norms += freqs.entries[j].norm;
  m.tail = tail_bound(freqs, s);
  const double half = 0.5 * (m.sum_norms + m.tail);
  m.a_min_bound = mean - half;
  m.a_max_bound = mean + half;
  if (!(m.a_min_bound > 0.0)) {
    throw std::invalid_argument("make_coefficient_model: lower coefficient bound not positive");
  }
  m.b.resize(s);
  for (std::size_t j = 0; j < s; ++j) m.b[j] = freqs.entries[j].norm / m.a_min_bound;
  return m;
}

double coeff_eval(const CoefficientModel& m, double x1, double x2, const std::vector<double>& y) {
  if (y.size() > m.s) throw std::invalid_argument("coeff_eval: parameter vector longer than s");
  double a = m.mean;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (!(std::fabs(y[j]) <= 0.5)) throw std::invalid_argument("coeff_eval: parameter outside cube");
    a += y[j] * psi_eval(m.freqs, j + 1, x1, x2);
  }
  return a;
}

void export_frequency_csv(const FrequencyTable& freqs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_frequency_csv: cannot open " + path);
  out << "j,k,l,norm\n";
  char buf[64];
  for (std::size_t j = 0; j < freqs.count(); ++j) {
    const Frequency& f = freqs.entries[j];
    std::snprintf(buf, sizeof buf, "%.17g", f.norm);
    out << (j + 1) << ',' << f.k << ',' << f.l << ',' << buf << '\n';
  }
}

}  // namespace qmcopt
