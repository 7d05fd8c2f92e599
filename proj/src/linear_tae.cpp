#include "slowmode/linear_tae.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace slowmode {

void LinearTaeProblem::validate() const {
    if (!(var1 > 0) || !(var2 > 0))
        throw std::invalid_argument("component variances must be positive");
    if (std::abs(a1) > 1 || std::abs(a2) > 1)
        throw std::invalid_argument("autocorrelations must lie in [-1,1]");
}

double linear_tae_mixed_loss(const LinearTaeProblem& p, double b2) {
    p.validate();
    if (!(b2 >= 0.0 && b2 <= 1.0))
        throw std::invalid_argument("mixing weight must be in [0,1]");
    const double total = p.total_variance();
    const double m1 = p.var1 * p.a1 * p.a1;
    const double m2 = p.var2 * p.a2 * p.a2;
    if (b2 == 0.0) return total - m1;
    if (b2 == 1.0) return total - m2;
    const double denom = (1.0 / (b2 * b2) - 1.0) * p.var1 + p.var2;
    return total - m1 - p.var2 * (m2 - m1) / denom;
}

LinearTaeSolution linear_tae_closed_form(const LinearTaeProblem& p) {
    p.validate();
    LinearTaeSolution s;
    const double total = p.total_variance();
    const double m1 = p.var1 * p.a1 * p.a1;
    const double m2 = p.var2 * p.a2 * p.a2;
    s.loss_mode1 = total - m1;
    s.loss_mode2 = total - m2;
    if (m1 == m2)
        throw std::runtime_error(
            "mode selection tie: var1*a1^2 == var2*a2^2, both endpoints optimal");
    s.c0 = 0.0;
    if (m1 > m2) {
        s.b2 = 0.0;
        s.c1 = p.a1;
        s.loss = s.loss_mode1;
    } else {
        s.b2 = 1.0;
        s.c1 = p.a2;
        s.loss = s.loss_mode2;
    }
    return s;
}

std::vector<double> linear_tae_loss_curve(const LinearTaeProblem& p, int n) {
    if (n < 2) throw std::invalid_argument("curve needs at least 2 points");
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i)
        out[i] = linear_tae_mixed_loss(p, static_cast<double>(i) / (n - 1));
    return out;
}

RankOneOptimum linear_rank_one_optimum(const std::array<double, 4>& caa,
                                       const std::array<double, 4>& cba,
                                       double cbb_trace) {
    Eigen::Matrix2d Caa, Cba;
    Caa << caa[0], caa[1], caa[2], caa[3];
    Cba << cba[0], cba[1], cba[2], cba[3];
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(0.5 * (Caa + Caa.transpose()));
    if (es.eigenvalues().minCoeff() <= 0)
        throw std::invalid_argument("input covariance must be positive definite");
    const Eigen::Matrix2d W = es.eigenvectors() *
                              es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                              es.eigenvectors().transpose();
    const Eigen::Matrix2d M = Cba * W;
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(M, Eigen::ComputeFullV);
    const double s1 = svd.singularValues()(0);
    const Eigen::Vector2d e = W * svd.matrixV().col(0);
    RankOneOptimum r;
    r.loss = cbb_trace - s1 * s1;
    r.encoder = {e(0), e(1)};
    return r;
}

}  // namespace slowmode
