#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace optigap {

// ---------------------------------------------------------------------------
// Errors. One type per failure mode; constructors take a human-readable
// message that names the offending input.
// ---------------------------------------------------------------------------
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// graph construction / queries
struct DuplicateId : Error { using Error::Error; };
struct DanglingEndpoint : Error { using Error::Error; };
struct NonpositiveLength : Error { using Error::Error; };
struct UnknownNode : Error { using Error::Error; };
struct Unreachable : Error { using Error::Error; };
struct TooLarge : Error { using Error::Error; };

// model evaluation / training
struct DimMismatch : Error { using Error::Error; };
struct NonfiniteLoss : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };

// scenario geometry / solvers
struct NotPositiveDefinite : Error { using Error::Error; };
struct NotSymmetric : Error { using Error::Error; };
struct ZeroRadius : Error { using Error::Error; };
struct ZeroMatrix : Error { using Error::Error; };
struct NoConvergence : Error { using Error::Error; };
struct UnboundedRadius : Error { using Error::Error; };

// policy / thresholds
struct NonpositiveSlope : Error { using Error::Error; };

// simulation
struct CycleGuard : Error { using Error::Error; };
struct PrefixBroken : Error { using Error::Error; };

// statistics
struct Empty : Error { using Error::Error; };
struct AllZero : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 supplies the bit stream; all value mappings
// (uniform, normal, shuffle) are implemented here because the standard
// distribution adapters are implementation-defined and would break
// byte-identical reproducibility across standard libraries.
// ---------------------------------------------------------------------------
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t bits() { return gen_(); }

  // Derives an independent stream; tag values are fixed at call sites so the
  // sub-seed layout is stable across runs.
  Rng child(std::uint64_t tag) const {
    return Rng(splitmix64(seed_ ^ splitmix64(tag)));
  }

  // [0, 1), 53-bit resolution
  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Box-Muller; the spare value is discarded so call sequences stay aligned.
  double normal() {
    double u1;
    do { u1 = uniform(); } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // unbiased integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t t = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = gen_();
      if (r >= t) return r % n;
    }
  }

  template <class T>
  void shuffle(std::vector<T>& xs) {  // Fisher-Yates
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::swap(xs[i - 1], xs[below(i)]);
    }
  }

  // uniform in the unit ball of R^n
  std::vector<double> unit_ball(int n) {
    std::vector<double> u(n);
    double s = 0.0;
    for (double& x : u) { x = normal(); s += x * x; }
    s = std::sqrt(s);
    const double r = std::pow(uniform(), 1.0 / double(n));
    for (double& x : u) x = (s > 0.0) ? x / s * r : 0.0;
    return u;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

// Fixed tags for the named sub-seeds recorded in run manifests.
namespace seedtag {
inline constexpr std::uint64_t world = 1;
inline constexpr std::uint64_t init = 2;
inline constexpr std::uint64_t batches = 3;
inline constexpr std::uint64_t perturbations = 4;
inline constexpr std::uint64_t restarts = 5;
inline constexpr std::uint64_t data = 6;
inline constexpr std::uint64_t incidents = 7;
}  // namespace seedtag

// ---------------------------------------------------------------------------
// Dense row-major matrix. All solver paths keep dimensions tiny (d <= 64),
// so plain triple loops are adequate.
// ---------------------------------------------------------------------------
struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), v(std::size_t(r) * c, 0.0) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(int i, int j) { return v[std::size_t(i) * cols + j]; }
  double operator()(int i, int j) const { return v[std::size_t(i) * cols + j]; }

  bool operator==(const Matrix& o) const {
    return rows == o.rows && cols == o.cols && v == o.v;
  }
};

inline Matrix operator+(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  for (std::size_t i = 0; i < c.v.size(); ++i) c.v[i] += b.v[i];
  return c;
}
inline Matrix operator-(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  for (std::size_t i = 0; i < c.v.size(); ++i) c.v[i] -= b.v[i];
  return c;
}
inline Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& x : c.v) x *= s;
  return c;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

// <A, B> = Tr(A^T B)
inline double frob_inner(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
  return s;
}
inline double frob_norm(const Matrix& a) { return std::sqrt(frob_inner(a, a)); }

inline double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double x : a.v) m = std::max(m, std::fabs(x));
  return m;
}

inline double asymmetry(const Matrix& a) {
  double m = 0.0;
  for (int i = 0; i < a.rows; ++i)
    for (int j = i + 1; j < a.cols; ++j)
      m = std::max(m, std::fabs(a(i, j) - a(j, i)));
  return m;
}

inline void symmetrize(Matrix& a) {
  for (int i = 0; i < a.rows; ++i)
    for (int j = i + 1; j < a.cols; ++j) {
      const double m = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = m;
      a(j, i) = m;
    }
}

// In-place lower Cholesky attempt; the pivot tolerance is the
// positive-definiteness test used throughout. Returns false when a pivot
// drops to or below the tolerance.
inline bool cholesky(const Matrix& a, Matrix& l, double pivot_tol = 1e-12) {
  const int n = a.rows;
  l = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= pivot_tol) return false;
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return true;
}

inline bool is_positive_definite(const Matrix& a, double pivot_tol = 1e-12) {
  Matrix l;
  return cholesky(a, l, pivot_tol);
}

// log det from a lower Cholesky factor
inline double logdet_from_cholesky(const Matrix& l) {
  double s = 0.0;
  for (int i = 0; i < l.rows; ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

// inverse of a symmetric positive-definite matrix via Cholesky
inline Matrix inverse_spd(const Matrix& a) {
  const int n = a.rows;
  Matrix l;
  if (!cholesky(a, l)) throw NotPositiveDefinite("inverse_spd: matrix is not positive definite");
  Matrix inv(n, n);
  std::vector<double> y(n), x(n);
  for (int c = 0; c < n; ++c) {
    for (int i = 0; i < n; ++i) {
      double s = (i == c) ? 1.0 : 0.0;
      for (int k = 0; k < i; ++k) s -= l(i, k) * y[k];
      y[i] = s / l(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = y[i];
      for (int k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
      x[i] = s / l(i, i);
      inv(i, c) = x[i];
    }
  }
  symmetrize(inv);
  return inv;
}

// x^T A x for symmetric A
inline double quad_form(const Matrix& a, const double* x) {
  double s = 0.0;
  for (int i = 0; i < a.rows; ++i) {
    double row = 0.0;
    for (int j = 0; j < a.cols; ++j) row += a(i, j) * x[j];
    s += x[i] * row;
  }
  return s;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Shortest round-trip-ish formatting used for CSV output; fixed so outputs
// are byte-identical for identical inputs.
inline std::string fmt_g(double x, int prec = 9) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
  return buf;
}

}  // namespace optigap
