#include "cllab/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cllab/core_math.hpp"

namespace cllab {

namespace {

void check_loss_config(const LossConfig& cfg) {
    if (cfg.tau <= 0.0) throw std::invalid_argument("LossConfig: tau must be > 0");
    if (cfg.tau_dcl <= 0.0) throw std::invalid_argument("LossConfig: tau_dcl must be > 0");
    if (cfg.m < 0.0) throw std::invalid_argument("LossConfig: m must be >= 0");
    if (cfg.lambda_dcl < 0.0) throw std::invalid_argument("LossConfig: lambda_dcl must be >= 0");
    if (cfg.lambda_bt < 0.0) throw std::invalid_argument("LossConfig: lambda_bt must be >= 0");
}

// Row-normalized view of a batch; throws on zero-norm rows.
struct UnitRows {
    Matrix unit;                // rows scaled to norm 1
    std::vector<double> norms;  // original row norms
};

UnitRows unit_rows(const Matrix& z, const char* what) {
    UnitRows out;
    out.unit = z;
    out.norms.resize(z.rows);
    for (std::size_t i = 0; i < z.rows; ++i) {
        double ss = 0.0;
        for (double v : z.row(i)) ss += v * v;
        if (ss == 0.0)
            throw std::domain_error(std::string(what) + ": zero-norm row " + std::to_string(i));
        double norm = std::sqrt(ss);
        out.norms[i] = norm;
        for (double& v : out.unit.row(i)) v /= norm;
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// d cos(u,v)/du expressed through the unit rows: (v_hat - cos * u_hat)/|u|.
// coeff additionally carries 1/tau and the loss sensitivity.
void add_cosine_grad(std::span<double> grad_u, std::span<const double> u_hat,
                     std::span<const double> v_hat, double cosine, double unorm,
                     double coeff) {
    const double a = coeff / unorm;
    for (std::size_t k = 0; k < grad_u.size(); ++k)
        grad_u[k] += a * (v_hat[k] - cosine * u_hat[k]);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace

LossReport info_nce_roles(const Matrix& z1p, const Matrix& z2p,
                          const Matrix& z1n, const Matrix& z2n,
                          const LossConfig& cfg) {
    check_loss_config(cfg);
    require_same_shape(z1p, z2p, "info_nce");
    require_same_shape(z1p, z1n, "info_nce");
    require_same_shape(z1p, z2n, "info_nce");
    const std::size_t n = z1p.rows;
    if (n == 0) throw std::invalid_argument("info_nce: empty batch");

    UnitRows u1p = unit_rows(z1p, "info_nce");
    UnitRows u2p = unit_rows(z2p, "info_nce");
    UnitRows u1n = unit_rows(z1n, "info_nce");
    UnitRows u2n = unit_rows(z2n, "info_nce");

    // cosines
    std::vector<double> pos(n);
    for (std::size_t i = 0; i < n; ++i)
        pos[i] = dot(u1p.unit.row(i), u2p.unit.row(i));
    Matrix neg(n, n);  // anchor i vs candidate j, diagonal unused
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) neg(i, j) = dot(u1n.unit.row(i), u2n.unit.row(j));

    LossReport report;
    report.grads = {Matrix(n, z1p.cols), Matrix(n, z1p.cols),
                    Matrix(n, z1p.cols), Matrix(n, z1p.cols)};
    Matrix& g1p = report.grads[0];
    Matrix& g2p = report.grads[1];
    Matrix& g1n = report.grads[2];
    Matrix& g2n = report.grads[3];

    const double inv_tau = 1.0 / cfg.tau;
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = pos[i] * inv_tau;
        double mx = a;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) mx = std::max(mx, neg(i, j) * inv_tau);
        double zsum = std::exp(a - mx);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) zsum += std::exp(neg(i, j) * inv_tau - mx);
        total += -a + mx + std::log(zsum);

        // d loss_i / d a = p - 1, d loss_i / d b_ij = q_ij
        const double ca = (std::exp(a - mx) / zsum - 1.0) * inv_n * inv_tau;
        add_cosine_grad(g1p.row(i), u1p.unit.row(i), u2p.unit.row(i), pos[i],
                        u1p.norms[i], ca);
        add_cosine_grad(g2p.row(i), u2p.unit.row(i), u1p.unit.row(i), pos[i],
                        u2p.norms[i], ca);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double cb = std::exp(neg(i, j) * inv_tau - mx) / zsum * inv_n * inv_tau;
            add_cosine_grad(g1n.row(i), u1n.unit.row(i), u2n.unit.row(j), neg(i, j),
                            u1n.norms[i], cb);
            add_cosine_grad(g2n.row(j), u2n.unit.row(j), u1n.unit.row(i), neg(i, j),
                            u2n.norms[j], cb);
        }
    }
    report.value = total * inv_n;
    return report;
}

LossReport info_nce(const Matrix& z1, const Matrix& z2, const LossConfig& cfg) {
    LossReport roles = info_nce_roles(z1, z2, z1, z2, cfg);
    LossReport report;
    report.value = roles.value;
    report.grads = {std::move(roles.grads[0]), std::move(roles.grads[1])};
    Matrix& g1 = report.grads[0];
    Matrix& g2 = report.grads[1];
    for (std::size_t i = 0; i < g1.values.size(); ++i) {
        g1.values[i] += roles.grads[2].values[i];
        g2.values[i] += roles.grads[3].values[i];
    }
    return report;
}

LossReport off_info_nce(const Matrix& z1, const Matrix& z2, const Matrix& z0,
                        const LossConfig& cfg) {
    check_loss_config(cfg);
    require_same_shape(z1, z2, "off_info_nce");
    require_same_shape(z1, z0, "off_info_nce");
    const std::size_t n = z1.rows;
    if (n == 0) throw std::invalid_argument("off_info_nce: empty batch");

    UnitRows u1 = unit_rows(z1, "off_info_nce");
    UnitRows u2 = unit_rows(z2, "off_info_nce");
    UnitRows u0 = unit_rows(z0, "off_info_nce");

    std::vector<double> pos(n);
    for (std::size_t i = 0; i < n; ++i)
        pos[i] = dot(u1.unit.row(i), u2.unit.row(i));
    Matrix neg(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) neg(i, j) = dot(u0.unit.row(i), u0.unit.row(j));

    LossReport report;
    report.grads = {Matrix(n, z1.cols), Matrix(n, z1.cols), Matrix(n, z1.cols)};
    Matrix& g1 = report.grads[0];
    Matrix& g2 = report.grads[1];
    Matrix& g0 = report.grads[2];

    const double inv_tau = 1.0 / cfg.tau;
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = pos[i] * inv_tau;
        double mx = a;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) mx = std::max(mx, neg(i, j) * inv_tau);
        double zsum = std::exp(a - mx);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) zsum += cfg.m * std::exp(neg(i, j) * inv_tau - mx);
        total += -a + mx + std::log(zsum);

        const double ca = (std::exp(a - mx) / zsum - 1.0) * inv_n * inv_tau;
        add_cosine_grad(g1.row(i), u1.unit.row(i), u2.unit.row(i), pos[i],
                        u1.norms[i], ca);
        add_cosine_grad(g2.row(i), u2.unit.row(i), u1.unit.row(i), pos[i],
                        u2.norms[i], ca);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double cb =
                cfg.m * std::exp(neg(i, j) * inv_tau - mx) / zsum * inv_n * inv_tau;
            add_cosine_grad(g0.row(i), u0.unit.row(i), u0.unit.row(j), neg(i, j),
                            u0.norms[i], cb);
            add_cosine_grad(g0.row(j), u0.unit.row(j), u0.unit.row(i), neg(i, j),
                            u0.norms[j], cb);
        }
    }
    report.value = total * inv_n;
    return report;
}

namespace {

// Column norms and column-normalized copy; throws on all-zero columns.
struct UnitCols {
    Matrix unit;
    std::vector<double> norms;
};

UnitCols unit_cols(const Matrix& z, const char* what) {
    UnitCols out;
    out.unit = z;
    out.norms.assign(z.cols, 0.0);
    for (std::size_t i = 0; i < z.rows; ++i)
        for (std::size_t c = 0; c < z.cols; ++c) out.norms[c] += z(i, c) * z(i, c);
    for (std::size_t c = 0; c < z.cols; ++c) {
        if (out.norms[c] == 0.0)
            throw std::domain_error(std::string(what) + ": all-zero column " +
                                    std::to_string(c));
        out.norms[c] = std::sqrt(out.norms[c]);
    }
    for (std::size_t i = 0; i < z.rows; ++i)
        for (std::size_t c = 0; c < z.cols; ++c) out.unit(i, c) /= out.norms[c];
    return out;
}

}  // namespace

CorrelationMatrix cross_correlation(const Matrix& z1, const Matrix& z2) {
    require_same_shape(z1, z2, "cross_correlation");
    UnitCols u = unit_cols(z1, "cross_correlation");
    UnitCols v = unit_cols(z2, "cross_correlation");
    CorrelationMatrix cm;
    cm.batch_size = z1.rows;
    cm.values = matmul_at_b(u.unit, v.unit);
    for (double& x : cm.values.values) x = std::clamp(x, -1.0, 1.0);
    return cm;
}

LossReport barlow_twins(const Matrix& z1, const Matrix& z2, const LossConfig& cfg) {
    check_loss_config(cfg);
    require_same_shape(z1, z2, "barlow_twins");
    const std::size_t d = z1.cols;
    UnitCols u = unit_cols(z1, "barlow_twins");
    UnitCols v = unit_cols(z2, "barlow_twins");
    Matrix corr = matmul_at_b(u.unit, v.unit);  // D x D

    double value = 0.0;
    Matrix dc(d, d);  // dL/dC
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t e = 0; e < d; ++e) {
            if (c == e) {
                double t = 1.0 - corr(c, c);
                value += t * t;
                dc(c, c) = -2.0 * t;
            } else {
                value += cfg.lambda_bt * corr(c, e) * corr(c, e);
                dc(c, e) = 2.0 * cfg.lambda_bt * corr(c, e);
            }
        }
    }

    // dL/dU~ = V~ G^T, dL/dV~ = U~ G, then project out the unit-norm
    // component per column.
    Matrix gu = matmul_a_bt(v.unit, dc);  // N x D: column c = sum_e G_ce v~_e
    Matrix gv = matmul(u.unit, dc);       // N x D: column e = sum_c G_ce u~_c
    LossReport report;
    report.value = value;
    report.grads = {Matrix(z1.rows, d), Matrix(z1.rows, d)};
    for (std::size_t c = 0; c < d; ++c) {
        double du = 0.0, dv = 0.0;
        for (std::size_t i = 0; i < z1.rows; ++i) {
            du += gu(i, c) * u.unit(i, c);
            dv += gv(i, c) * v.unit(i, c);
        }
        for (std::size_t i = 0; i < z1.rows; ++i) {
            report.grads[0](i, c) = (gu(i, c) - du * u.unit(i, c)) / u.norms[c];
            report.grads[1](i, c) = (gv(i, c) - dv * v.unit(i, c)) / v.norms[c];
        }
    }
    return report;
}

PaddedViews pad_artificial(const Matrix& z1, const Matrix& z2,
                           std::size_t m_rows, RngState& rng) {
    require_same_shape(z1, z2, "pad_artificial");
    PaddedViews out;
    out.real_rows = z1.rows;
    out.z1 = Matrix(z1.rows + m_rows, z1.cols);
    out.z2 = Matrix(z2.rows + m_rows, z2.cols);
    std::copy(z1.values.begin(), z1.values.end(), out.z1.values.begin());
    std::copy(z2.values.begin(), z2.values.end(), out.z2.values.begin());
    for (std::size_t i = 0; i < m_rows * z1.cols; ++i)
        out.z1.values[z1.values.size() + i] = next_normal(rng);
    for (std::size_t i = 0; i < m_rows * z2.cols; ++i)
        out.z2.values[z2.values.size() + i] = next_normal(rng);
    return out;
}

namespace {

// Backward through per-column standardization with the N-1 variance
// denominator; columns where the constant-column guard engaged get zero
// gradient (their normalized values are identically zero).
Matrix normalize_backward(const Matrix& raw, const NormalizedBatch& nb,
                          const Matrix& grad_tilde) {
    const std::size_t n = raw.rows, d = raw.cols;
    Matrix grad(n, d);
    for (std::size_t c = 0; c < d; ++c) {
        if (nb.constant_col[c]) continue;
        double gbar = 0.0, gz = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            gbar += grad_tilde(i, c);
            gz += grad_tilde(i, c) * nb.values(i, c);
        }
        gbar /= static_cast<double>(n);
        const double sigma = nb.col_stds[c];
        const double corr = gz / static_cast<double>(n - 1);
        for (std::size_t i = 0; i < n; ++i)
            grad(i, c) =
                (grad_tilde(i, c) - gbar - nb.values(i, c) * corr) / sigma;
    }
    return grad;
}

}  // namespace

LossReport dcl(const Matrix& z1, const Matrix& z2, const LossConfig& cfg) {
    check_loss_config(cfg);
    require_same_shape(z1, z2, "dcl");
    if (z1.rows < 2) throw std::invalid_argument("dcl: needs N >= 2");
    const std::size_t d = z1.cols;

    NormalizedBatch n1 = batch_normalize_columns(z1);
    NormalizedBatch n2 = batch_normalize_columns(z2);
    Matrix sim = matmul_at_b(n1.values, n2.values);  // D x D
    const double inv_tau = 1.0 / cfg.tau_dcl;
    for (double& v : sim.values) v *= inv_tau;

    double value = 0.0;
    Matrix ds(d, d);  // dL/dS = softmax(row) - I
    for (std::size_t c = 0; c < d; ++c) {
        double mx = sim(c, 0);
        for (std::size_t e = 1; e < d; ++e) mx = std::max(mx, sim(c, e));
        double zsum = 0.0;
        for (std::size_t e = 0; e < d; ++e) zsum += std::exp(sim(c, e) - mx);
        value += -sim(c, c) + mx + std::log(zsum);
        for (std::size_t e = 0; e < d; ++e) {
            ds(c, e) = std::exp(sim(c, e) - mx) / zsum;
            if (e == c) ds(c, e) -= 1.0;
        }
    }

    // S = Z1~^T Z2~ / tau: dL/dZ1~ = Z2~ G^T / tau, dL/dZ2~ = Z1~ G / tau.
    Matrix g1t = matmul_a_bt(n2.values, ds);
    Matrix g2t = matmul(n1.values, ds);
    for (double& v : g1t.values) v *= inv_tau;
    for (double& v : g2t.values) v *= inv_tau;

    LossReport report;
    report.value = value;
    report.grads = {normalize_backward(z1, n1, g1t), normalize_backward(z2, n2, g2t)};
    return report;
}

LossReport combined(const Matrix& z1, const Matrix& z2, const Matrix& z0,
                    const LossConfig& cfg) {
    LossReport off = off_info_nce(z1, z2, z0, cfg);
    LossReport dim = dcl(z1, z2, cfg);
    LossReport report;
    report.value = off.value + cfg.lambda_dcl * dim.value;
    report.grads = {std::move(off.grads[0]), std::move(off.grads[1]),
                    std::move(off.grads[2])};
    for (std::size_t i = 0; i < report.grads[0].values.size(); ++i) {
        report.grads[0].values[i] += cfg.lambda_dcl * dim.grads[0].values[i];
        report.grads[1].values[i] += cfg.lambda_dcl * dim.grads[1].values[i];
    }
    return report;
}

const char* objective_kind_name(ObjectiveKind kind) {
    switch (kind) {
        case ObjectiveKind::InfoNce: return "info_nce";
        case ObjectiveKind::OffInfoNce: return "off_info_nce";
        case ObjectiveKind::BarlowTwins: return "barlow_twins";
        case ObjectiveKind::Dcl: return "dcl";
        case ObjectiveKind::Combined: return "combined";
    }
    return "unknown";
}

LossReport eval_objective(ObjectiveKind kind, std::span<const Matrix> inputs,
                          const LossConfig& cfg) {
    auto need = [&](std::size_t n) {
        if (inputs.size() != n)
            throw std::invalid_argument(std::string(objective_kind_name(kind)) +
                                        ": expected " + std::to_string(n) + " inputs");
    };
    switch (kind) {
        case ObjectiveKind::InfoNce:
            need(2);
            return info_nce(inputs[0], inputs[1], cfg);
        case ObjectiveKind::OffInfoNce:
            need(3);
            return off_info_nce(inputs[0], inputs[1], inputs[2], cfg);
        case ObjectiveKind::BarlowTwins:
            need(2);
            return barlow_twins(inputs[0], inputs[1], cfg);
        case ObjectiveKind::Dcl:
            need(2);
            return dcl(inputs[0], inputs[1], cfg);
        case ObjectiveKind::Combined:
            need(3);
            return combined(inputs[0], inputs[1], inputs[2], cfg);
    }
    throw std::invalid_argument("eval_objective: unknown kind");
}

AuditDetail finite_diff_audit_detail(ObjectiveKind kind, std::span<const Matrix> inputs,
                                     const LossConfig& cfg, double step,
                                     const std::function<void(LossReport&)>& grad_mutator) {
    if (step <= 0.0) throw std::invalid_argument("finite_diff_audit: step must be > 0");
    LossReport analytic = eval_objective(kind, inputs, cfg);
    if (grad_mutator) grad_mutator(analytic);

    std::vector<Matrix> work(inputs.begin(), inputs.end());
    AuditDetail detail;
    for (std::size_t k = 0; k < work.size(); ++k) {
        for (std::size_t idx = 0; idx < work[k].values.size(); ++idx) {
            const double saved = work[k].values[idx];
            work[k].values[idx] = saved + step;
            double fp = eval_objective(kind, work, cfg).value;
            work[k].values[idx] = saved - step;
            double fm = eval_objective(kind, work, cfg).value;
            work[k].values[idx] = saved;
            double fd = (fp - fm) / (2.0 * step);
            double an = analytic.grads[k].values[idx];
            // The 1e-5 floor compares near-zero gradients absolutely, below
            // which central differences are dominated by rounding of the
            // loss itself.
            double rel = std::abs(an - fd) /
                         std::max({1e-5, std::abs(an), std::abs(fd)});
            if (rel > detail.worst_rel_error) {
                detail.worst_rel_error = rel;
                detail.input_index = k;
                detail.entry_index = idx;
            }
        }
    }
    return detail;
}

double finite_diff_audit(ObjectiveKind kind, std::span<const Matrix> inputs,
                         const LossConfig& cfg, double step,
                         const std::function<void(LossReport&)>& grad_mutator) {
    return finite_diff_audit_detail(kind, inputs, cfg, step, grad_mutator).worst_rel_error;
}

}  // namespace cllab
