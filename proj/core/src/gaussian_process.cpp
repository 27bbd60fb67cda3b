#include "sizer/gaussian_process.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include <Eigen/Dense>

#include "sizer/error.hpp"

namespace sizer {

namespace {

const double kSqrt5 = std::sqrt(5.0);

struct Factor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

// Cholesky of K with escalating diagonal jitter; nullopt once the cap is passed.
std::optional<Factor> factorize(const Eigen::MatrixXd& k, double jitter, double cap) {
  const Eigen::Index n = k.rows();
  double j = 0.0;
  for (;;) {
    Factor f;
    Eigen::MatrixXd kj = k;
    if (j > 0) kj.diagonal().array() += j;
    f.llt.compute(kj);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = j;
      return f;
    }
    j = j == 0.0 ? jitter : j * 10.0;
    if (j > cap || n == 0) return std::nullopt;
  }
}

}  // namespace

double matern52(double r) { return (1.0 + kSqrt5 * r + 5.0 / 3.0 * r * r) * std::exp(-kSqrt5 * r); }

struct GaussianProcess::Impl {
  Eigen::MatrixXd x;  // n x d
  Eigen::VectorXd y;  // standardized
  double y_mean = 0.0;
  double y_scale = 1.0;
  GpHyperparameters hp;
  Eigen::MatrixXd chol;  // lower factor
  Eigen::VectorXd alpha;
  double lml = 0.0;
  double jitter = 0.0;

  Eigen::MatrixXd kernel(const GpHyperparameters& h) const {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      k(i, i) = h.signal_variance + h.noise_variance;
      for (Eigen::Index j = 0; j < i; ++j) {
        double r2 = 0.0;
        for (Eigen::Index d = 0; d < x.cols(); ++d) {
          const double t = (x(i, d) - x(j, d)) / h.lengthscales[static_cast<std::size_t>(d)];
          r2 += t * t;
        }
        k(i, j) = k(j, i) = h.signal_variance * matern52(std::sqrt(r2));
      }
    }
    return k;
  }

  void set_data(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.empty()) throw ConfigError("GP needs matching, nonempty training data");
    const auto n = static_cast<Eigen::Index>(xs.size());
    const auto d = static_cast<Eigen::Index>(xs.front().size());
    x.resize(n, d);
    y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (static_cast<Eigen::Index>(xs[static_cast<std::size_t>(i)].size()) != d)
        throw ConfigError("GP training points differ in dimension");
      for (Eigen::Index k = 0; k < d; ++k) x(i, k) = xs[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      y(i) = ys[static_cast<std::size_t>(i)];
    }
    y_mean = y.mean();
    const double var = n > 1 ? (y.array() - y_mean).square().sum() / static_cast<double>(n - 1) : 0.0;
    y_scale = var > 1e-300 ? std::sqrt(var) : 1.0;
    y = (y.array() - y_mean) / y_scale;
  }

  void condition_on(const GpHyperparameters& h, const GpConfig& cfg) {
    auto f = factorize(kernel(h), cfg.jitter, cfg.jitter_cap);
    if (!f) throw SingularKernel("kernel matrix stays singular with jitter up to " + std::to_string(cfg.jitter_cap));
    hp = h;
    jitter = f->jitter;
    chol = f->llt.matrixL();
    alpha = f->llt.solve(y);
    lml = -0.5 * y.dot(alpha) - chol.diagonal().array().log().sum() -
          0.5 * static_cast<double>(y.size()) * std::log(2 * std::numbers::pi);
  }

  // Negative log marginal likelihood and its gradient in log-parameter space.
  std::optional<double> objective(const Eigen::VectorXd& theta, Eigen::VectorXd& grad,
                                  const std::vector<Eigen::MatrixXd>& sqdist, const GpConfig& cfg) const {
    const Eigen::Index d = x.cols(), n = x.rows();
    GpHyperparameters h;
    h.lengthscales.resize(static_cast<std::size_t>(d));
    for (Eigen::Index k = 0; k < d; ++k) h.lengthscales[static_cast<std::size_t>(k)] = std::exp(theta(k));
    h.signal_variance = std::exp(theta(d));
    h.noise_variance = std::exp(theta(d + 1));

    Eigen::MatrixXd r2 = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k < d; ++k) r2 += sqdist[static_cast<std::size_t>(k)] * std::exp(-2 * theta(k));
    const Eigen::ArrayXXd r = r2.array().sqrt();
    const Eigen::ArrayXXd e = (-kSqrt5 * r).exp();
    const Eigen::MatrixXd ksig = (h.signal_variance * (1.0 + kSqrt5 * r + 5.0 / 3.0 * r2.array()) * e).matrix();
    Eigen::MatrixXd k = ksig;
    k.diagonal().array() += h.noise_variance;

    auto f = factorize(k, cfg.jitter, cfg.jitter_cap);
    if (!f) return std::nullopt;
    const Eigen::VectorXd a = f->llt.solve(y);
    const Eigen::MatrixXd kinv = f->llt.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd w = a * a.transpose() - kinv;
    const Eigen::MatrixXd l = f->llt.matrixL();
    const double nll = 0.5 * y.dot(a) + l.diagonal().array().log().sum() +
                       0.5 * static_cast<double>(n) * std::log(2 * std::numbers::pi);

    grad.resize(d + 2);
    const Eigen::ArrayXXd g = w.array() * (h.signal_variance * 5.0 / 3.0 * (1.0 + kSqrt5 * r) * e);
    for (Eigen::Index k2 = 0; k2 < d; ++k2)
      grad(k2) = -0.5 * (g * sqdist[static_cast<std::size_t>(k2)].array()).sum() * std::exp(-2 * theta(k2));
    grad(d) = -0.5 * (w.array() * ksig.array()).sum();
    grad(d + 1) = -0.5 * h.noise_variance * w.trace();
    return nll;
  }
};

GaussianProcess::GaussianProcess() : impl_(std::make_unique<Impl>()) {}
GaussianProcess::~GaussianProcess() = default;
GaussianProcess::GaussianProcess(GaussianProcess&&) noexcept = default;
GaussianProcess& GaussianProcess::operator=(GaussianProcess&&) noexcept = default;

void GaussianProcess::condition(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                                const GpHyperparameters& hp, const GpConfig& cfg) {
  impl_->set_data(x, y);
  if (static_cast<Eigen::Index>(hp.lengthscales.size()) != impl_->x.cols())
    throw ConfigError("GP hyperparameters have the wrong dimension");
  impl_->condition_on(hp, cfg);
}

void GaussianProcess::fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                          const GpConfig& cfg, Rng& rng, const GpHyperparameters* warm_start) {
  Impl& m = *impl_;
  m.set_data(x, y);
  const Eigen::Index d = m.x.cols(), n = m.x.rows();

  std::vector<Eigen::MatrixXd> sqdist(static_cast<std::size_t>(d), Eigen::MatrixXd(n, n));
  for (Eigen::Index k = 0; k < d; ++k) {
    auto& s = sqdist[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) s(i, j) = s(j, i) = std::pow(m.x(i, k) - m.x(j, k), 2);
  }

  Eigen::VectorXd lo(d + 2), hi(d + 2);
  lo.head(d).setConstant(std::log(cfg.min_lengthscale));
  hi.head(d).setConstant(std::log(cfg.max_lengthscale));
  lo(d) = std::log(0.05);
  hi(d) = std::log(20.0);
  lo(d + 1) = std::log(cfg.min_noise);
  hi(d + 1) = std::log(cfg.max_noise);

  std::vector<Eigen::VectorXd> starts;
  Eigen::VectorXd base(d + 2);
  base.head(d).setConstant(std::log(0.5 * std::sqrt(static_cast<double>(d))));
  base(d) = 0.0;
  base(d + 1) = std::log(1e-3);
  if (warm_start && static_cast<Eigen::Index>(warm_start->lengthscales.size()) == d) {
    Eigen::VectorXd w(d + 2);
    for (Eigen::Index k = 0; k < d; ++k) w(k) = std::log(warm_start->lengthscales[static_cast<std::size_t>(k)]);
    w(d) = std::log(warm_start->signal_variance);
    w(d + 1) = std::log(warm_start->noise_variance);
    starts.push_back(w.cwiseMax(lo).cwiseMin(hi));
  }
  if (starts.empty() || cfg.restarts > 0) starts.push_back(base);
  for (int s = 0; s < cfg.restarts; ++s) {
    Eigen::VectorXd t(d + 2);
    for (Eigen::Index k = 0; k < d + 2; ++k) t(k) = lo(k) + (hi(k) - lo(k)) * (0.2 + 0.6 * rng.uniform());
    starts.push_back(t);
  }

  Eigen::VectorXd best_theta = base;
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd grad;
  for (const auto& start : starts) {
    Eigen::VectorXd theta = start, mom = Eigen::VectorXd::Zero(d + 2), vel = Eigen::VectorXd::Zero(d + 2);
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int step = 1; step <= cfg.adam_steps; ++step) {
      auto val = m.objective(theta, grad, sqdist, cfg);
      if (!val) break;
      if (*val < best) {
        best = *val;
        best_theta = theta;
      }
      mom = b1 * mom + (1 - b1) * grad;
      vel = b2 * vel + (1 - b2) * grad.cwiseProduct(grad);
      const Eigen::VectorXd mhat = mom / (1 - std::pow(b1, step));
      const Eigen::VectorXd vhat = vel / (1 - std::pow(b2, step));
      theta -= (cfg.learning_rate * mhat.array() / (vhat.array().sqrt() + eps)).matrix();
      theta = theta.cwiseMax(lo).cwiseMin(hi);
    }
    if (auto val = m.objective(theta, grad, sqdist, cfg); val && *val < best) {
      best = *val;
      best_theta = theta;
    }
  }

  GpHyperparameters hp;
  hp.lengthscales.resize(static_cast<std::size_t>(d));
  for (Eigen::Index k = 0; k < d; ++k) hp.lengthscales[static_cast<std::size_t>(k)] = std::exp(best_theta(k));
  hp.signal_variance = std::exp(best_theta(d));
  hp.noise_variance = std::exp(best_theta(d + 1));
  m.condition_on(hp, cfg);
}

Prediction GaussianProcess::predict(const std::vector<double>& xq) const {
  return predict(std::vector<std::vector<double>>{xq}).front();
}

std::vector<Prediction> GaussianProcess::predict(const std::vector<std::vector<double>>& xs) const {
  const Impl& m = *impl_;
  const Eigen::Index n = m.x.rows(), d = m.x.cols();
  const auto q = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd ks(n, q);
  for (Eigen::Index c = 0; c < q; ++c) {
    const auto& p = xs[static_cast<std::size_t>(c)];
    if (static_cast<Eigen::Index>(p.size()) != d) throw ConfigError("GP query has the wrong dimension");
    for (Eigen::Index i = 0; i < n; ++i) {
      double r2 = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double t = (p[static_cast<std::size_t>(k)] - m.x(i, k)) / m.hp.lengthscales[static_cast<std::size_t>(k)];
        r2 += t * t;
      }
      ks(i, c) = m.hp.signal_variance * matern52(std::sqrt(r2));
    }
  }
  const Eigen::VectorXd mean = ks.transpose() * m.alpha;
  const Eigen::MatrixXd v = m.chol.triangularView<Eigen::Lower>().solve(ks);
  const Eigen::VectorXd reduction = v.colwise().squaredNorm();
  std::vector<Prediction> out(static_cast<std::size_t>(q));
  for (Eigen::Index c = 0; c < q; ++c) {
    out[static_cast<std::size_t>(c)].mean = m.y_mean + m.y_scale * mean(c);
    out[static_cast<std::size_t>(c)].variance =
        std::max(0.0, m.hp.signal_variance - reduction(c)) * m.y_scale * m.y_scale;
  }
  return out;
}

const GpHyperparameters& GaussianProcess::hyperparameters() const { return impl_->hp; }
double GaussianProcess::log_marginal_likelihood() const { return impl_->lml; }
std::size_t GaussianProcess::size() const { return static_cast<std::size_t>(impl_->x.rows()); }
double GaussianProcess::jitter_used() const { return impl_->jitter; }

}  // namespace sizer
