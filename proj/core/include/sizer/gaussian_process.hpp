#pragma once

#include <memory>
#include <vector>

#include "sizer/rng.hpp"

namespace sizer {

struct GpConfig {
  int restarts = 2;  // random starts besides the warm and default starts; 0 with a warm start refines it alone
  int adam_steps = 60;
  double learning_rate = 0.08;
  double jitter = 1e-8;
  double jitter_cap = 1e-2;
  double min_lengthscale = 0.01;
  double max_lengthscale = 20.0;
  double min_noise = 1e-6;  // variance, in standardized units
  double max_noise = 0.1;
};

struct GpHyperparameters {
  std::vector<double> lengthscales;
  double signal_variance = 1.0;  // standardized units
  double noise_variance = 1e-4;
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// Gaussian-process regression with an ARD Matern-5/2 kernel and constant mean on unit-box inputs.
class GaussianProcess {
 public:
  GaussianProcess();
  ~GaussianProcess();
  GaussianProcess(GaussianProcess&&) noexcept;
  GaussianProcess& operator=(GaussianProcess&&) noexcept;
  GaussianProcess(const GaussianProcess&) = delete;
  GaussianProcess& operator=(const GaussianProcess&) = delete;

  /// Fits hyperparameters by maximizing the marginal likelihood (Adam, multi-start).
  /// `warm_start` seeds the first start when its dimension matches. Throws SingularKernel.
  void fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y, const GpConfig& cfg, Rng& rng,
           const GpHyperparameters* warm_start = nullptr);
  /// Conditions on data with fixed hyperparameters.
  void condition(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                 const GpHyperparameters& hp, const GpConfig& cfg = {});

  Prediction predict(const std::vector<double>& x) const;
  std::vector<Prediction> predict(const std::vector<std::vector<double>>& xs) const;

  const GpHyperparameters& hyperparameters() const;
  double log_marginal_likelihood() const;
  std::size_t size() const;
  double jitter_used() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Matern-5/2 correlation for scaled distance r.
double matern52(double r);

}  // namespace sizer
