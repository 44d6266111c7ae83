#pragma once

// Box-constrained limited-memory BFGS (projected variant) with
// finite-difference gradients. The objective is treated as a black box.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "svbrdf/error.hpp"

namespace svbrdf {

struct MinimizeOptions {
  int max_iterations = 200;
  double ftol = 1e-8;        ///< stop when the relative decrease of one step falls below this
  double pgtol = 1e-10;      ///< stop when the projected gradient inf-norm falls below this
  int memory = 10;
  double fd_step = 1e-6;     ///< relative finite-difference step
  int max_backtracks = 40;
};

enum class MinimizeStatus { converged_ftol, converged_pgtol, max_iterations, line_search_failed };

inline const char* to_string(MinimizeStatus s) {
  switch (s) {
    case MinimizeStatus::converged_ftol: return "ftol";
    case MinimizeStatus::converged_pgtol: return "pgtol";
    case MinimizeStatus::max_iterations: return "max_iterations";
    case MinimizeStatus::line_search_failed: return "line_search_failed";
  }
  return "unknown";
}

struct MinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  MinimizeStatus status = MinimizeStatus::max_iterations;
  std::vector<double> history;  ///< objective after each accepted step, starting with f(x0)

  /// A failed line search still leaves x at the best point seen; only a
  /// non-finite value means the run produced nothing usable.
  bool ok() const noexcept { return std::isfinite(value); }
};

using Objective = std::function<double(std::span<const double>)>;

/// Gradient by central differences; falls back to one-sided differences when
/// a central stencil would leave the box.
inline std::vector<double> finite_difference_gradient(const Objective& f, std::span<const double> x,
                                                      std::span<const double> lower, std::span<const double> upper,
                                                      double rel_step, int* evaluations = nullptr) {
  std::vector<double> g(x.size());
  std::vector<double> probe(x.begin(), x.end());
  double f0 = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x[i]));
    const bool can_lo = x[i] - h >= lower[i];
    const bool can_hi = x[i] + h <= upper[i];
    if (can_lo && can_hi) {
      probe[i] = x[i] + h;
      const double fp = f(probe);
      probe[i] = x[i] - h;
      const double fm = f(probe);
      g[i] = (fp - fm) / (2.0 * h);
      if (evaluations) *evaluations += 2;
    } else {
      if (std::isnan(f0)) {
        f0 = f(x);
        if (evaluations) ++*evaluations;
      }
      if (can_hi) {
        probe[i] = x[i] + h;
        g[i] = (f(probe) - f0) / h;
      } else if (can_lo) {
        probe[i] = x[i] - h;
        g[i] = (f0 - f(probe)) / h;
      } else {
        g[i] = 0.0;  // box narrower than the stencil
      }
      if (evaluations && (can_hi || can_lo)) ++*evaluations;
    }
    probe[i] = x[i];
  }
  return g;
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

/// Minimizes f over the box [lower, upper]. Every accepted step satisfies the
/// Armijo condition, so the returned history is non-increasing.
inline MinimizeResult minimize_bounded(const Objective& f, std::vector<double> x0, std::span<const double> lower,
                                       std::span<const double> upper, const MinimizeOptions& opt = {}) {
  const std::size_t n = x0.size();
  if (lower.size() != n || upper.size() != n) throw InvalidInputError("bound arrays must match the variable count");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lower[i] <= upper[i])) throw InvalidInputError("lower bound exceeds upper bound");
    x0[i] = std::clamp(x0[i], lower[i], upper[i]);
  }

  MinimizeResult res;
  res.x = std::move(x0);
  res.value = f(res.x);
  res.evaluations = 1;
  res.history.push_back(res.value);
  if (!std::isfinite(res.value)) throw FitError("objective is not finite at the initial point");

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  auto g = finite_difference_gradient(f, res.x, lower, upper, opt.fd_step, &res.evaluations);

  auto projected_gradient_norm = [&](const std::vector<double>& x, const std::vector<double>& grad) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(std::clamp(x[i] - grad[i], lower[i], upper[i]) - x[i]));
    return m;
  };

  std::vector<double> d(n), x_new(n), step(n);
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (projected_gradient_norm(res.x, g) <= opt.pgtol) {
      res.status = MinimizeStatus::converged_pgtol;
      return res;
    }

    // Variables pinned at a bound with the gradient pushing outward stay fixed.
    std::vector<char> is_free(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double span = upper[i] - lower[i];
      const double eps = 1e-12 * std::max(1.0, span);
      if ((res.x[i] <= lower[i] + eps && g[i] > 0.0) || (res.x[i] >= upper[i] - eps && g[i] < 0.0) || span <= 0.0) {
        is_free[i] = 0;
      }
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      // Two-loop recursion on the free subspace.
      for (std::size_t i = 0; i < n; ++i) d[i] = is_free[i] ? -g[i] : 0.0;
      const std::size_t m = s_hist.size();
      std::vector<double> alpha(m);
      for (std::size_t k = m; k-- > 0;) {
        double sd = 0.0;
        for (std::size_t i = 0; i < n; ++i) if (is_free[i]) sd += s_hist[k][i] * d[i];
        alpha[k] = rho_hist[k] * sd;
        for (std::size_t i = 0; i < n; ++i) if (is_free[i]) d[i] -= alpha[k] * y_hist[k][i];
      }
      if (m > 0) {
        const double scale = 1.0 / (rho_hist.back() * detail::dot(y_hist.back(), y_hist.back()));
        for (double& di : d) di *= scale;
      }
      for (std::size_t k = 0; k < m; ++k) {
        double yd = 0.0;
        for (std::size_t i = 0; i < n; ++i) if (is_free[i]) yd += y_hist[k][i] * d[i];
        const double beta = rho_hist[k] * yd;
        for (std::size_t i = 0; i < n; ++i) if (is_free[i]) d[i] += s_hist[k][i] * (alpha[k] - beta);
      }

      double gd = detail::dot(g, d);
      if (!(gd < 0.0)) {
        s_hist.clear(); y_hist.clear(); rho_hist.clear();
        for (std::size_t i = 0; i < n; ++i) d[i] = is_free[i] ? -g[i] : 0.0;
        gd = detail::dot(g, d);
        if (!(gd < 0.0)) break;
      }

      double t = 1.0;
      if (s_hist.empty()) {
        double dn = 0.0;
        for (double di : d) dn += di * di;
        dn = std::sqrt(dn);
        double box = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) if (is_free[i]) box = std::min(box, upper[i] - lower[i]);
        if (dn > 0.0) t = std::min(1.0, 0.25 * (std::isfinite(box) ? box : 1.0) / dn);
      }

      for (int bt = 0; bt < opt.max_backtracks; ++bt) {
        for (std::size_t i = 0; i < n; ++i) {
          x_new[i] = std::clamp(res.x[i] + t * d[i], lower[i], upper[i]);
          step[i] = x_new[i] - res.x[i];
        }
        const double decrease = detail::dot(g, step);
        if (decrease < 0.0) {
          const double f_new = f(x_new);
          ++res.evaluations;
          if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * decrease) {
            const double f_old = res.value;
            auto g_new = finite_difference_gradient(f, x_new, lower, upper, opt.fd_step, &res.evaluations);
            std::vector<double> y(n);
            for (std::size_t i = 0; i < n; ++i) y[i] = g_new[i] - g[i];
            const double sy = detail::dot(step, y);
            if (sy > 1e-12 * detail::dot(y, y) && sy > 0.0) {
              s_hist.push_back(step);
              y_hist.push_back(std::move(y));
              rho_hist.push_back(1.0 / sy);
              if (static_cast<int>(s_hist.size()) > opt.memory) {
                s_hist.pop_front(); y_hist.pop_front(); rho_hist.pop_front();
              }
            }
            res.x = x_new;
            res.value = f_new;
            g = std::move(g_new);
            res.history.push_back(f_new);
            ++res.iterations;
            accepted = true;
            const double denom = std::max({std::abs(f_old), std::abs(f_new), std::numeric_limits<double>::min()});
            if ((f_old - f_new) <= opt.ftol * denom) {
              res.status = MinimizeStatus::converged_ftol;
              return res;
            }
            break;
          }
        }
        t *= 0.5;
      }
      if (!accepted) {
        if (s_hist.empty()) break;
        s_hist.clear(); y_hist.clear(); rho_hist.clear();
      }
    }
    if (!accepted) {
      res.status = MinimizeStatus::line_search_failed;
      return res;
    }
  }
  res.status = MinimizeStatus::max_iterations;
  return res;
}

}  // namespace svbrdf
