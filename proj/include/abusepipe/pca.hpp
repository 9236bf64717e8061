#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "abusepipe/embedding.hpp"

namespace abusepipe {

struct NoVarianceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PcaResult {
    EmbeddingMatrix reduced;               // n x k projection of centered rows
    int k = 0;                             // components kept
    double explained_ratio = 0.0;          // cumulative ratio at k
    std::vector<double> component_ratios;  // per-component explained ratios, descending
};

// Centers the rows (no column scaling; embeddings share a scale) and
// projects onto the top-k principal components, where k is the minimum
// number whose cumulative explained-variance ratio reaches the threshold.
// Components follow a fixed sign convention: the largest-magnitude
// coordinate of each component is positive, first occurrence on ties.
inline PcaResult pca_reduce(const EmbeddingMatrix& m, double variance_threshold) {
    if (!(variance_threshold > 0.0) || variance_threshold > 1.0) {
        throw std::invalid_argument("variance threshold must be in (0, 1]");
    }
    const Eigen::Index n = m.values.rows();
    const Eigen::Index d = m.values.cols();
    if (n < 2) throw std::invalid_argument("pca needs at least 2 rows");
    if (d < 1) throw std::invalid_argument("pca needs at least 1 column");
    m.validate();

    Eigen::MatrixXd centered = m.values.rowwise() - m.values.colwise().mean();
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw std::runtime_error("eigen decomposition failed");

    // Eigen returns ascending eigenvalues; flip to descending and clamp the
    // tiny negatives that numerical symmetrization can produce.
    std::vector<double> lambdas(static_cast<std::size_t>(d));
    Eigen::MatrixXd components(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        lambdas[static_cast<std::size_t>(i)] = std::max(0.0, solver.eigenvalues()(d - 1 - i));
        components.col(i) = solver.eigenvectors().col(d - 1 - i);
    }
    double total = 0.0;
    for (double l : lambdas) total += l;
    if (total <= 0.0) throw NoVarianceError("no variance: all rows are identical");

    for (Eigen::Index i = 0; i < d; ++i) {
        Eigen::Index argmax = 0;
        components.col(i).cwiseAbs().maxCoeff(&argmax);
        if (components(argmax, i) < 0) components.col(i) = -components.col(i);
    }

    PcaResult out;
    out.component_ratios.resize(static_cast<std::size_t>(d));
    std::vector<double> cumulative(static_cast<std::size_t>(d));
    double prefix = 0.0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(d); ++i) {
        out.component_ratios[i] = lambdas[i] / total;
        prefix += lambdas[i];
        cumulative[i] = prefix / total;
    }
    cumulative.back() = 1.0;  // total/total, exact by definition

    int k = static_cast<int>(d);
    for (std::size_t i = 0; i < cumulative.size(); ++i) {
        if (cumulative[i] >= variance_threshold) {
            k = static_cast<int>(i) + 1;
            break;
        }
    }
    out.k = k;
    out.explained_ratio = cumulative[static_cast<std::size_t>(k - 1)];
    out.reduced.ids = m.ids;
    out.reduced.values = centered * components.leftCols(k);
    return out;
}

}  // namespace abusepipe
