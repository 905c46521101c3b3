#include "mtfe/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace mtfe {

namespace {

// Self-check against the factorial moment formula is run once at construction
// up to this degree; higher-degree rules are covered by the test suite.
constexpr int kSelfCheckDegree = 16;

void verify_rule(const QuadRule& rule) {
  std::array<int, 4> expo{0, 0, 0, 0};
  const int d = rule.dim;
  const auto check = [&](const std::array<int, 4>& e) {
    double s = 0.0;
    for (int q = 0; q < rule.size(); ++q) {
      double v = rule.weights[q];
      for (int i = 0; i <= d; ++i)
        for (int p = 0; p < e[i]; ++p) v *= rule.points[q][i];
      s += v;
    }
    const double exact = exact_monomial_integral(d, e);
    if (std::abs(s - exact) > 1e-12 * std::max(std::abs(exact), 1e-2))
      throw InternalError("quadrature: moment self-check failed");
  };
  const int deg = std::min(rule.degree, kSelfCheckDegree);
  if (d == 1) {
    for (int a = 0; a + 0 <= deg; ++a)
      for (int b = 0; a + b <= deg; ++b) check({a, b, 0, 0});
  } else if (d == 2) {
    for (int a = 0; a <= deg; ++a)
      for (int b = 0; a + b <= deg; ++b)
        for (int c = 0; a + b + c <= deg; ++c) check({a, b, c, 0});
  } else {
    for (int a = 0; a <= deg; ++a)
      for (int b = 0; a + b <= deg; ++b)
        for (int c = 0; a + b + c <= deg; ++c)
          for (int e = 0; a + b + c + e <= deg; ++e) check({a, b, c, e});
  }
  (void)expo;
}

QuadRule build_rule(int dim, int degree) {
  QuadRule rule;
  rule.dim = dim;
  rule.degree = degree;
  std::vector<double> x, w;
  if (dim == 1) {
    gauss_legendre_01((degree + 2) / 2, x, w);
    for (std::size_t i = 0; i < x.size(); ++i) {
      rule.points.push_back({1.0 - x[i], x[i], 0.0, 0.0});
      rule.weights.push_back(w[i]);
    }
  } else if (dim == 2) {
    // x = u, y = v(1-u); Jacobian 1-u raises the u-degree by one.
    gauss_legendre_01((degree + 3) / 2, x, w);
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double u = x[i], v = x[j];
        const double px = u, py = v * (1.0 - u);
        rule.points.push_back({1.0 - px - py, px, py, 0.0});
        rule.weights.push_back(w[i] * w[j] * (1.0 - u));
      }
  } else {
    // x = u, y = v(1-u), z = w(1-u)(1-v); Jacobian (1-u)^2 (1-v).
    gauss_legendre_01((degree + 4) / 2, x, w);
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < x.size(); ++j)
        for (std::size_t k = 0; k < x.size(); ++k) {
          const double u = x[i], v = x[j], t = x[k];
          const double px = u, py = v * (1.0 - u),
                       pz = t * (1.0 - u) * (1.0 - v);
          rule.points.push_back({1.0 - px - py - pz, px, py, pz});
          rule.weights.push_back(w[i] * w[j] * w[k] * (1.0 - u) * (1.0 - u) *
                                 (1.0 - v));
        }
  }
  verify_rule(rule);
  return rule;
}

}  // namespace

double reference_measure(int dim) {
  double f = 1.0;
  for (int i = 2; i <= dim; ++i) f *= i;
  return 1.0 / f;
}

double exact_monomial_integral(int dim, const std::array<int, 4>& expo) {
  // expo! / (|expo| + dim)!  evaluated as a running product to stay in range
  int total = 0;
  for (int i = 0; i <= dim; ++i) total += expo[i];
  double value = 1.0;
  int denom_k = 0;  // counts factors of (|expo|+dim)! consumed so far
  for (int i = 0; i <= dim; ++i)
    for (int p = 1; p <= expo[i]; ++p) {
      value *= static_cast<double>(p) / static_cast<double>(++denom_k);
    }
  for (; denom_k < total + dim;) value /= static_cast<double>(++denom_k);
  return value;
}

void gauss_legendre_01(int n, std::vector<double>& x, std::vector<double>& w) {
  require(n >= 1, "gauss_legendre_01: n >= 1");
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    // Newton iteration for the i-th root of P_n on [-1, 1]
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (t * p1 - p0) / (t * t - 1.0);
    x[i] = 0.5 * (1.0 - t);  // roots come out descending in t
    w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
  }
}

const QuadRule& simplex_rule(int dim, int degree) {
  require(dim >= 1 && dim <= 3, "simplex_rule: dim in {1,2,3}");
  require(degree >= 0 && degree <= kMaxQuadDegree,
          "simplex_rule: degree out of range");
  static std::map<std::pair<int, int>, QuadRule> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find({dim, degree});
  if (it == cache.end())
    it = cache.emplace(std::make_pair(dim, degree), build_rule(dim, degree))
             .first;
  return it->second;
}

std::vector<std::array<int, 3>> monomial_exponents(int entity_dim, int k) {
  std::vector<std::array<int, 3>> out;
  if (k < 0) return out;
  for (int g = 0; g <= k; ++g) {
    if (entity_dim == 1) {
      out.push_back({g, 0, 0});
    } else if (entity_dim == 2) {
      for (int a = g; a >= 0; --a) out.push_back({a, g - a, 0});
    } else {
      for (int a = g; a >= 0; --a)
        for (int b = g - a; b >= 0; --b) out.push_back({a, b, g - a - b});
    }
  }
  return out;
}

double eval_entity_monomial(const std::array<int, 3>& expo,
                            const std::array<double, 4>& bary) {
  double v = 1.0;
  for (int i = 0; i < 3; ++i)
    for (int p = 0; p < expo[i]; ++p) v *= bary[i + 1];
  return v;
}

Eigen::VectorXd project_l2(
    int entity_dim, int k,
    const std::function<double(const std::array<double, 4>&)>& integrand,
    int quad_degree) {
  const auto monos = monomial_exponents(entity_dim, k);
  const int n = static_cast<int>(monos.size());
  require(n > 0, "project_l2: empty basis");
  const QuadRule& rule = simplex_rule(entity_dim, std::max(quad_degree, 2 * k));
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  std::vector<double> mv(n);
  for (int q = 0; q < rule.size(); ++q) {
    for (int i = 0; i < n; ++i)
      mv[i] = eval_entity_monomial(monos[i], rule.points[q]);
    const double f = integrand(rule.points[q]);
    for (int i = 0; i < n; ++i) {
      rhs(i) += rule.weights[q] * f * mv[i];
      for (int j = 0; j <= i; ++j) G(i, j) += rule.weights[q] * mv[i] * mv[j];
    }
  }
  G = G.selfadjointView<Eigen::Lower>();
  return Eigen::LLT<Eigen::MatrixXd>(G).solve(rhs);
}

}  // namespace mtfe
