#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace wm {

/// Largest supported pose dimension. Vectors and matrices are dynamically sized
/// up to this bound but live on the stack.
inline constexpr int kMaxPoseDim = 6;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxPoseDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                          kMaxPoseDim, kMaxPoseDim>;

using ObsId = std::int32_t;
using TrackId = std::int32_t;

/// Label of an observation explained by clutter.
inline constexpr TrackId kFalsePositive = 0;
/// Label of an observation whose assignment is currently being resampled.
inline constexpr TrackId kUnassigned = -1;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Error kinds. Each maps to a distinct CLI exit code in tools/.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};
struct Infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Unsupported : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// log(sum(exp(x))) that tolerates -inf entries; returns -inf for an empty or
/// all -inf input.
double log_sum_exp(std::span<const double> xs);

/// log(exp(a) + exp(b)).
double log_add(double a, double b);

/// log(1 - exp(x)) for x <= 0.
double log1m_exp(double x);

/// (M + M^T) / 2.
Mat symmetrized(const Mat& m);

/// log N(x; mean, cov). Throws NumericalError when cov is not positive definite.
double log_normal_pdf(const Vec& x, const Vec& mean, const Mat& cov);

/// Squared Mahalanobis distance of x from mean under cov.
double mahalanobis_sq(const Vec& x, const Vec& mean, const Mat& cov);

/// Standard normal CDF.
double normal_cdf(double z);

/// log of the binomial pmf Bin(k; n, p), with the 0*log(0) = 0 convention.
double log_binomial_pmf(int k, int n, double p);

}  // namespace wm
