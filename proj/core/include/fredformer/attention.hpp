#pragma once

#include "fredformer/series.hpp"

namespace fredformer {

using MatrixRef = Eigen::Ref<Matrix>;
using ConstMatrixRef = Eigen::Ref<const Matrix>;

/// Row-wise softmax, max-shifted for stability.
Matrix softmax_rows(const ConstMatrixRef& scores);

/// Gradient w.r.t. the softmax input given the softmax output `probs` and
/// the gradient w.r.t. that output.
Matrix softmax_rows_backward(const ConstMatrixRef& probs, const ConstMatrixRef& grad_probs);

/// Moore-Penrose inverse via SVD; singular values below rel_tol * sigma_max
/// are treated as zero.
Matrix pseudo_inverse(const ConstMatrixRef& a, double rel_tol = 1e-6);

/// Gradient of a scalar loss w.r.t. A given pinv(A) and the gradient w.r.t.
/// pinv(A) (constant-rank differential of the pseudo-inverse).
Matrix pseudo_inverse_backward(const ConstMatrixRef& a, const ConstMatrixRef& a_pinv,
                               const ConstMatrixRef& grad_pinv);

/// m x rows averaging matrix: landmark i is the mean of the contiguous row
/// segment [floor(i*n/m), floor((i+1)*n/m)).
Matrix segment_mean_operator(Eigen::Index rows, Eigen::Index landmarks);

struct AttentionOutput {
    Matrix output;   // C x d_v
    Matrix weights;  // C x C, rows sum to one
};

/// softmax(Q K^T / sqrt(d)) V with d = Q.cols().
AttentionOutput exact_attention(const ConstMatrixRef& q, const ConstMatrixRef& k, const ConstMatrixRef& v);

struct AttentionGrads {
    Matrix q;
    Matrix k;
    Matrix v;
};

AttentionGrads exact_attention_backward(const ConstMatrixRef& q, const ConstMatrixRef& k,
                                        const ConstMatrixRef& v, const ConstMatrixRef& weights,
                                        const ConstMatrixRef& grad_output);

/// Intermediate products of one Nystrom evaluation, kept for the backward pass.
struct NystromCache {
    Matrix landmark_op;  // m x C
    Matrix q_land;       // m x d
    Matrix k_land;       // m x d
    Matrix kernel_f;     // C x m   softmax(Q K~^T / sqrt(d))
    Matrix kernel_a;     // m x m   softmax(Q~ K~^T / sqrt(d))
    Matrix kernel_a_pinv;
    Matrix kernel_b;     // m x C   softmax(Q~ K^T / sqrt(d))
    Matrix bv;           // m x d_v
    Matrix apinv_bv;     // m x d_v
};

/// F~ A~^+ B~ V with landmarks taken as segment means of Q and K. With
/// m == C every segment is one row and the result equals exact attention.
Matrix nystrom_attention(const ConstMatrixRef& q, const ConstMatrixRef& k, const ConstMatrixRef& v,
                         Eigen::Index landmarks, NystromCache* cache = nullptr);

AttentionGrads nystrom_attention_backward(const ConstMatrixRef& q, const ConstMatrixRef& k,
                                          const ConstMatrixRef& v, const NystromCache& cache,
                                          const ConstMatrixRef& grad_output);

/// The C x C matrix F~ A~^+ B~ that Nystrom attention applies to V.
Matrix nystrom_weights(const ConstMatrixRef& q, const ConstMatrixRef& k, Eigen::Index landmarks);

}  // namespace fredformer
