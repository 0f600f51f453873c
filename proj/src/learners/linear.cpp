#include "linear.hpp"

#include <Eigen/Dense>

namespace mcufit::linear {

Fit least_squares(const Dataset& ds, std::span<const std::size_t> rows,
                  const Normalization* standardize) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(ds.features());
  Eigen::MatrixXd x(n, d + 1);
  Eigen::VectorXd y(n);
  std::vector<double> z(ds.features());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = rows[static_cast<std::size_t>(i)];
    auto features = ds.row(r);
    if (standardize) {
      standardize->apply(features, z);
      features = z;
    }
    x(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < d; ++j) x(i, j + 1) = features[static_cast<std::size_t>(j)];
    y(i) = ds.target(r);
  }

  Fit fit;
  Eigen::VectorXd beta;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (n > d && qr.rank() == d + 1) {
    beta = qr.solve(y);
  } else {
    fit.ridge = true;
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += 1e-8;
    beta = gram.ldlt().solve(x.transpose() * y);
  }
  fit.intercept = beta(0);
  fit.coefficients.assign(beta.data() + 1, beta.data() + 1 + d);
  fit.sse = (x * beta - y).squaredNorm();
  return fit;
}

}  // namespace mcufit::linear
