#ifndef AOISIM_PREDICTOR_LINEAR_HPP
#define AOISIM_PREDICTOR_LINEAR_HPP

#include <Eigen/Dense>
#include <vector>

#include "aoisim/predictor/dataset.hpp"

namespace aoisim {

/// Ordinary least squares over the flattened window features, solved via
/// normal equations. Singular systems fall back to a tiny ridge term.
struct LinearModel {
    FeatureScaler scaler;
    Eigen::VectorXd coefficients;  // per scaled feature
    double intercept = 0.0;
    double final_loss = 0.0;       // train MSE, ms^2

    static constexpr double kRidgeFallback = 1e-8;

    static LinearModel train(const std::vector<FeatureWindow>& inputs,
                             const std::vector<double>& targets) {
        if (inputs.empty() || inputs.size() != targets.size())
            throw SimError("linear: empty or mismatched dataset");
        LinearModel model;
        model.scaler = FeatureScaler::fit(inputs, targets);
        const Eigen::Index n = static_cast<Eigen::Index>(inputs.size());
        const Eigen::Index d = static_cast<Eigen::Index>(model.scaler.mean.size());

        Eigen::MatrixXd x(n, d + 1);
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto f = model.scaler.transform(inputs[static_cast<std::size_t>(i)]);
            x(i, 0) = 1.0;
            for (Eigen::Index j = 0; j < d; ++j) x(i, j + 1) = f[static_cast<std::size_t>(j)];
            y(i) = model.scaler.scale_target(targets[static_cast<std::size_t>(i)]);
        }

        const Eigen::MatrixXd gram = x.transpose() * x;
        const Eigen::VectorXd rhs = x.transpose() * y;
        Eigen::LDLT<Eigen::MatrixXd> solver(gram);
        Eigen::VectorXd beta;
        if (solver.info() == Eigen::Success && solver.isPositive()) {
            beta = solver.solve(rhs);
        }
        if (beta.size() == 0 || !beta.allFinite() ||
            (gram * beta - rhs).norm() > 1e-6 * (1.0 + rhs.norm())) {
            Eigen::MatrixXd ridge = gram;
            ridge.diagonal().array() += kRidgeFallback;
            beta = Eigen::LDLT<Eigen::MatrixXd>(ridge).solve(rhs);
        }

        model.intercept = beta(0);
        model.coefficients = beta.tail(d);
        double sse = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double pred = beta(0) + x.row(i).tail(d).dot(model.coefficients);
            const double err = model.scaler.unscale_target(pred) -
                               targets[static_cast<std::size_t>(i)];
            sse += err * err;
        }
        model.final_loss = sse / static_cast<double>(n);
        return model;
    }

    double predict(const FeatureWindow& window) const {
        const auto f = scaler.transform(window);
        double acc = intercept;
        for (Eigen::Index j = 0; j < coefficients.size(); ++j)
            acc += coefficients(j) * f[static_cast<std::size_t>(j)];
        return scaler.unscale_target(acc);
    }

    std::size_t parameter_count() const {
        return static_cast<std::size_t>(coefficients.size()) + 1;
    }
};

}  // namespace aoisim

#endif  // AOISIM_PREDICTOR_LINEAR_HPP
