#include "fredformer/attention.hpp"

#include "fredformer/error.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace fredformer {

Matrix softmax_rows(const ConstMatrixRef& scores) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out = scores;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        row.array() -= row.maxCoeff();
        row = row.array().exp().matrix();
        row /= row.sum();
    }
    return out;
}

Matrix softmax_rows_backward(const ConstMatrixRef& probs, const ConstMatrixRef& grad_probs) {
    const Eigen::VectorXd inner = (probs.array() * grad_probs.array()).rowwise().sum();
    return (probs.array() * (grad_probs.array().colwise() - inner.array())).matrix();
}

Matrix pseudo_inverse(const ConstMatrixRef& a, double rel_tol) {
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();
    const double cutoff = sigma.size() > 0 ? rel_tol * sigma.maxCoeff() : 0.0;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sigma.size());
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        if (sigma[i] > cutoff) inv[i] = 1.0 / sigma[i];
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// dX = -X dA X + X X^T dA^T (I - A X) + (I - X A) dA^T X^T X, transposed into
// reverse mode.
Matrix pseudo_inverse_backward(const ConstMatrixRef& a, const ConstMatrixRef& a_pinv,
                               const ConstMatrixRef& grad_pinv) {
    const Matrix& x = a_pinv;
    const Matrix& g = grad_pinv;
    const Matrix left = Matrix::Identity(a.rows(), a.rows()) - a * x;
    const Matrix right = Matrix::Identity(a.cols(), a.cols()) - x * a;
    Matrix out = -(x.transpose() * g * x.transpose());
    out.noalias() += left * g.transpose() * x * x.transpose();
    out.noalias() += x.transpose() * x * g.transpose() * right;
    return out;
}

Matrix segment_mean_operator(Eigen::Index rows, Eigen::Index landmarks) {
    require(landmarks >= 1 && landmarks <= rows, ErrorKind::InvalidArgument,
            "landmarks must lie in [1, " + std::to_string(rows) + "], got " + std::to_string(landmarks));
    Matrix op = Matrix::Zero(landmarks, rows);
    for (Eigen::Index i = 0; i < landmarks; ++i) {
        const Eigen::Index begin = i * rows / landmarks;
        const Eigen::Index end = (i + 1) * rows / landmarks;
        op.block(i, begin, 1, end - begin).setConstant(1.0 / static_cast<double>(end - begin));
    }
    return op;
}

AttentionOutput exact_attention(const ConstMatrixRef& q, const ConstMatrixRef& k, const ConstMatrixRef& v) {
    require(q.cols() == k.cols() && k.rows() == v.rows(), ErrorKind::ShapeMismatch, "attention: Q/K/V shape mismatch");
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    AttentionOutput out;
    out.weights = softmax_rows(scale * (q * k.transpose()));
    out.output = out.weights * v;
    return out;
}

AttentionGrads exact_attention_backward(const ConstMatrixRef& q, const ConstMatrixRef& k,
                                        const ConstMatrixRef& v, const ConstMatrixRef& weights,
                                        const ConstMatrixRef& grad_output) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    AttentionGrads g;
    g.v = weights.transpose() * grad_output;
    const Matrix grad_scores = scale * softmax_rows_backward(weights, grad_output * v.transpose());
    g.q = grad_scores * k;
    g.k = grad_scores.transpose() * q;
    return g;
}

Matrix nystrom_attention(const ConstMatrixRef& q, const ConstMatrixRef& k, const ConstMatrixRef& v,
                         Eigen::Index landmarks, NystromCache* cache) {
    require(q.rows() == k.rows() && q.cols() == k.cols() && k.rows() == v.rows(), ErrorKind::ShapeMismatch,
            "nystrom attention: Q/K/V shape mismatch");
    NystromCache local;
    NystromCache& c = cache ? *cache : local;
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    c.landmark_op = segment_mean_operator(q.rows(), landmarks);
    c.q_land = c.landmark_op * q;
    c.k_land = c.landmark_op * k;
    c.kernel_f = softmax_rows(scale * (q * c.k_land.transpose()));
    c.kernel_a = softmax_rows(scale * (c.q_land * c.k_land.transpose()));
    c.kernel_b = softmax_rows(scale * (c.q_land * k.transpose()));
    c.kernel_a_pinv = pseudo_inverse(c.kernel_a);
    c.bv = c.kernel_b * v;
    c.apinv_bv = c.kernel_a_pinv * c.bv;
    return c.kernel_f * c.apinv_bv;
}

AttentionGrads nystrom_attention_backward(const ConstMatrixRef& q, const ConstMatrixRef& k,
                                          const ConstMatrixRef& v, const NystromCache& c,
                                          const ConstMatrixRef& grad_output) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    const Matrix grad_f = grad_output * c.apinv_bv.transpose();
    const Matrix grad_y = c.kernel_f.transpose() * grad_output;
    const Matrix grad_pinv = grad_y * c.bv.transpose();
    const Matrix grad_bv = c.kernel_a_pinv.transpose() * grad_y;
    const Matrix grad_b = grad_bv * v.transpose();
    const Matrix grad_a = pseudo_inverse_backward(c.kernel_a, c.kernel_a_pinv, grad_pinv);

    const Matrix sf = scale * softmax_rows_backward(c.kernel_f, grad_f);
    const Matrix sa = scale * softmax_rows_backward(c.kernel_a, grad_a);
    const Matrix sb = scale * softmax_rows_backward(c.kernel_b, grad_b);

    AttentionGrads g;
    g.v = c.kernel_b.transpose() * grad_bv;
    g.q = sf * c.k_land;
    g.k = sb.transpose() * c.q_land;
    const Matrix grad_q_land = sa * c.k_land + sb * k;
    const Matrix grad_k_land = sf.transpose() * q + sa.transpose() * c.q_land;
    g.q.noalias() += c.landmark_op.transpose() * grad_q_land;
    g.k.noalias() += c.landmark_op.transpose() * grad_k_land;
    return g;
}

Matrix nystrom_weights(const ConstMatrixRef& q, const ConstMatrixRef& k, Eigen::Index landmarks) {
    NystromCache c;
    const Matrix identity = Matrix::Identity(k.rows(), k.rows());
    return nystrom_attention(q, k, identity, landmarks, &c);
}

}  // namespace fredformer
