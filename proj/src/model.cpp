#include "aflora/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aflora/errors.hpp"
#include "aflora/linalg.hpp"

namespace aflora {

void ToyModel::validate() const {
    if (w_base.rows() != num_classes) {
        throw ShapeError("ToyModel: w_base " + w_base.shape() + " vs " +
                         std::to_string(num_classes) + " classes");
    }
    if (!w_base.all_finite()) {
        throw NumericalError("ToyModel: non-finite backbone");
    }
}

namespace {

void check_batch(const ToyModel& model, const Matrix& w_eff,
                 const Dataset& batch) {
    if (batch.x.cols() != w_eff.cols()) {
        throw ShapeError("model: batch features " + batch.x.shape() +
                         " vs weights " + w_eff.shape());
    }
    for (int label : batch.y) {
        if (label < 0 || label >= model.num_classes) {
            throw DataError("model: label " + std::to_string(label) +
                            " outside [0, " +
                            std::to_string(model.num_classes) + ")");
        }
    }
}

// softmax with max-subtraction, written into probs (length m)
void softmax_row(const std::vector<double>& logits, std::vector<double>& probs) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        probs[c] = std::exp(logits[c] - peak);
        total += probs[c];
    }
    for (double& p : probs) {
        p /= total;
    }
}

void logits_for_row(const Matrix& w_eff, const Dataset& batch, int row,
                    std::vector<double>& z) {
    for (int c = 0; c < w_eff.rows(); ++c) {
        double acc = 0.0;
        for (int j = 0; j < w_eff.cols(); ++j) {
            acc += w_eff(c, j) * batch.x(row, j);
        }
        z[static_cast<std::size_t>(c)] = acc;
    }
}

double regularizer(const DecoupledAdapter& ad, double gamma) {
    if (gamma == 0.0) {
        return 0.0;
    }
    double total = 0.0;
    for (int j = 0; j < ad.r_initial; ++j) {
        if (!ad.mask[static_cast<std::size_t>(j)]) {
            continue;
        }
        const double norm2 = col_l2_norm(ad.b, j) * col_l2_norm(ad.b, j);
        total += (norm2 - 1.0) * (norm2 - 1.0);
    }
    return gamma * total;
}

}  // namespace

double forward_loss(const ToyModel& model, const DecoupledAdapter& ad,
                    const Dataset& batch, double gamma) {
    const Matrix w_eff = add_scaled(model.w_base, delta_weight(ad));
    check_batch(model, w_eff, batch);
    if (batch.size() == 0) {
        throw DomainError("forward_loss: empty batch");
    }
    const int m = model.num_classes;
    std::vector<double> z(static_cast<std::size_t>(m));
    std::vector<double> p(static_cast<std::size_t>(m));
    double ce = 0.0;
    for (int i = 0; i < batch.size(); ++i) {
        logits_for_row(w_eff, batch, i, z);
        softmax_row(z, p);
        ce -= std::log(p[static_cast<std::size_t>(batch.y[static_cast<std::size_t>(i)])]);
    }
    const double loss = ce / batch.size() + regularizer(ad, gamma);
    if (!std::isfinite(loss)) {
        throw NumericalError("forward_loss: non-finite loss");
    }
    return loss;
}

GradientSet backward(const ToyModel& model, const DecoupledAdapter& ad,
                     const Dataset& batch, double gamma, Wrt wrt) {
    const Matrix w_eff = add_scaled(model.w_base, delta_weight(ad));
    check_batch(model, w_eff, batch);
    if (batch.size() == 0) {
        throw DomainError("backward: empty batch");
    }
    const int m = model.num_classes;
    const int n = batch.x.cols();
    const int r1 = ad.r_initial;

    // G = (1/N) Σ_i (softmax(z_i) − onehot(y_i)) x_iᵀ
    Matrix g(m, n);
    std::vector<double> z(static_cast<std::size_t>(m));
    std::vector<double> p(static_cast<std::size_t>(m));
    const double inv_n = 1.0 / batch.size();
    for (int i = 0; i < batch.size(); ++i) {
        logits_for_row(w_eff, batch, i, z);
        softmax_row(z, p);
        p[static_cast<std::size_t>(batch.y[static_cast<std::size_t>(i)])] -= 1.0;
        for (int c = 0; c < m; ++c) {
            const double coeff = inv_n * p[static_cast<std::size_t>(c)];
            if (coeff == 0.0) {
                continue;
            }
            for (int j = 0; j < n; ++j) {
                g(c, j) += coeff * batch.x(i, j);
            }
        }
    }

    GradientSet out;
    const bool want_client = wrt == Wrt::kClient || wrt == Wrt::kFull;
    const bool want_server = wrt == Wrt::kServer || wrt == Wrt::kFull;

    if (want_client) {
        out.grad_b = Matrix(m, r1);
        out.grad_lambda.assign(static_cast<std::size_t>(r1), 0.0);
        for (int j = 0; j < r1; ++j) {
            if (!ad.mask[static_cast<std::size_t>(j)]) {
                continue;
            }
            const double lambda_j = ad.lambda[static_cast<std::size_t>(j)];
            // G·a_j, reused for both partials
            std::vector<double> ga(static_cast<std::size_t>(m), 0.0);
            for (int c = 0; c < m; ++c) {
                double acc = 0.0;
                for (int col = 0; col < n; ++col) {
                    acc += g(c, col) * ad.a_slice(j, col);
                }
                ga[static_cast<std::size_t>(c)] = acc;
            }
            double lambda_grad = 0.0;
            for (int c = 0; c < m; ++c) {
                out.grad_b(c, j) = lambda_j * ga[static_cast<std::size_t>(c)];
                lambda_grad += ad.b(c, j) * ga[static_cast<std::size_t>(c)];
            }
            out.grad_lambda[static_cast<std::size_t>(j)] = lambda_grad;
            if (gamma != 0.0) {
                const double norm2 = col_l2_norm(ad.b, j) * col_l2_norm(ad.b, j);
                const double pull = 4.0 * gamma * (norm2 - 1.0);
                for (int c = 0; c < m; ++c) {
                    out.grad_b(c, j) += pull * ad.b(c, j);
                }
            }
        }
    }
    if (want_server) {
        out.grad_a = Matrix(r1, n);
        for (int j = 0; j < r1; ++j) {
            if (!ad.mask[static_cast<std::size_t>(j)]) {
                continue;
            }
            const double lambda_j = ad.lambda[static_cast<std::size_t>(j)];
            for (int col = 0; col < n; ++col) {
                double acc = 0.0;
                for (int c = 0; c < m; ++c) {
                    acc += ad.b(c, j) * g(c, col);
                }
                out.grad_a(j, col) = lambda_j * acc;
            }
        }
    }
    return out;
}

double predict_accuracy(const ToyModel& model, const Matrix& delta,
                        const Dataset& test) {
    if (test.size() == 0) {
        throw DomainError("predict_accuracy: empty test set");
    }
    const Matrix w_eff = add_scaled(model.w_base, delta);
    check_batch(model, w_eff, test);
    const int m = model.num_classes;
    std::vector<double> z(static_cast<std::size_t>(m));
    int correct = 0;
    for (int i = 0; i < test.size(); ++i) {
        logits_for_row(w_eff, test, i, z);
        int best = 0;
        for (int c = 1; c < m; ++c) {
            if (z[static_cast<std::size_t>(c)] > z[static_cast<std::size_t>(best)]) {
                best = c;  // strict > keeps ties at the lowest index
            }
        }
        if (best == test.y[static_cast<std::size_t>(i)]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / test.size();
}

}  // namespace aflora
