#pragma once

#include <functional>
#include <span>
#include <vector>

#include "cllab/matrix.hpp"
#include "cllab/rng.hpp"

namespace cllab {

struct LossConfig {
    double tau = 0.05;        // InfoNCE temperature
    double m = 0.9;           // off-dropout negative trade-off
    double tau_dcl = 5.0;     // DCL temperature
    double lambda_dcl = 0.1;  // DCL weight in the combined objective
    double lambda_bt = 5e-3;  // BarlowTwins off-diagonal weight
};

// Scalar loss plus gradients with respect to each input batch, in the same
// order the inputs were passed.
struct LossReport {
    double value = 0.0;
    std::vector<Matrix> grads;
};

// D x D cross-correlation matrix between the column spaces of two views,
// computed on raw (uncentered) columns.
struct CorrelationMatrix {
    Matrix values;
    std::size_t batch_size = 0;
};

// Mean over i of -log[ e^{s(z1_i,z2_i)} / (e^{s(z1_i,z2_i)} +
// sum_{j!=i} e^{s(z1_i,z2_j)}) ], s = cosine/tau. grads: {dz1, dz2}.
LossReport info_nce(const Matrix& z1, const Matrix& z2, const LossConfig& cfg);

// InfoNCE with distinct view tensors for the positive and negative roles:
// the positive term uses (z1p_i, z2p_i), the negative sum uses
// (z1n_i, z2n_j). The noise-manipulation runs replace one role at a time,
// which this generalization realizes; info_nce is the aliased special case.
// grads: {dz1p, dz2p, dz1n, dz2n}.
LossReport info_nce_roles(const Matrix& z1p, const Matrix& z2p,
                          const Matrix& z1n, const Matrix& z2n,
                          const LossConfig& cfg);

// Off-dropout InfoNCE: negatives are pairs of the deterministic forward z0,
// weighted by m. grads: {dz1, dz2, dz0}.
LossReport off_info_nce(const Matrix& z1, const Matrix& z2, const Matrix& z0,
                        const LossConfig& cfg);

// C_cd = sum_i z1_ic z2_id / (||z1_.c|| ||z2_.d||). Throws std::domain_error
// naming the column index when a column is all zero.
CorrelationMatrix cross_correlation(const Matrix& z1, const Matrix& z2);

// sum_c (1 - C_cc)^2 + lambda_bt * sum_{d!=c} C_cd^2, the redundancy-reduction
// form with a positive invariance term. grads: {dz1, dz2}.
LossReport barlow_twins(const Matrix& z1, const Matrix& z2, const LossConfig& cfg);

// Batches padded with i.i.d. standard-normal rows (independent per batch).
// real_rows marks where encoder-born rows end; no gradient is propagated
// back from the artificial rows.
struct PaddedViews {
    Matrix z1;
    Matrix z2;
    std::size_t real_rows = 0;
};

PaddedViews pad_artificial(const Matrix& z1, const Matrix& z2,
                           std::size_t m_rows, RngState& rng);

// Dimension-wise contrastive objective, summed over dimensions:
// -sum_c log[ e^{s(c,c)} / sum_d e^{s(c,d)} ] with
// s(c,d) = sum_i z1~_ic z2~_id / tau_dcl on batch-normalized columns.
// Gradients flow through the normalization. grads: {dz1, dz2}.
LossReport dcl(const Matrix& z1, const Matrix& z2, const LossConfig& cfg);

// off_info_nce + lambda_dcl * dcl, with DCL consuming the dropout views.
// grads: {dz1, dz2, dz0}.
LossReport combined(const Matrix& z1, const Matrix& z2, const Matrix& z0,
                    const LossConfig& cfg);

enum class ObjectiveKind { InfoNce, OffInfoNce, BarlowTwins, Dcl, Combined };

const char* objective_kind_name(ObjectiveKind kind);

// Evaluates the named objective on the inputs (2 batches, or 3 for
// OffInfoNce/Combined).
LossReport eval_objective(ObjectiveKind kind, std::span<const Matrix> inputs,
                          const LossConfig& cfg);

// Central-difference check of every input-entry gradient; returns the worst
// relative error. grad_mutator is a test hook that tampers with the analytic
// report before comparison (used by the gradcheck self-test).
double finite_diff_audit(ObjectiveKind kind, std::span<const Matrix> inputs,
                         const LossConfig& cfg, double step,
                         const std::function<void(LossReport&)>& grad_mutator = {});

struct AuditDetail {
    double worst_rel_error = 0.0;
    std::size_t input_index = 0;  // which input batch held the worst entry
    std::size_t entry_index = 0;  // flat row-major index within it
};

AuditDetail finite_diff_audit_detail(ObjectiveKind kind, std::span<const Matrix> inputs,
                                     const LossConfig& cfg, double step,
                                     const std::function<void(LossReport&)>& grad_mutator = {});

}  // namespace cllab
