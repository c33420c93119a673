#pragma once

#include <vector>

#include "aflora/adapter.hpp"
#include "aflora/dataset.hpp"
#include "aflora/matrix.hpp"

namespace aflora {

/// Frozen single-layer backbone: logits z = (W + ΔW)·x, one row of W per
/// class. Training code asserts the checksum of w_base around every call.
struct ToyModel {
    Matrix w_base;  // m × n
    int num_classes = 0;

    void validate() const;
};

/// Which parameters backward differentiates. Client rounds freeze A; the
/// server round freezes B; the full variant serves baselines that train
/// plain LoRA (both halves, no gate).
enum class Wrt { kClient, kServer, kFull };

/// Carriers for the Eq. 10 partials. Unpopulated members stay 0×0.
struct GradientSet {
    Matrix grad_b;                    // m × r_initial
    std::vector<double> grad_lambda;  // length r_initial
    Matrix grad_a;                    // r_initial × n
};

/// Mean cross-entropy over the batch plus gamma·Σ_active (‖b_j‖² − 1)².
double forward_loss(const ToyModel& model, const DecoupledAdapter& ad,
                    const Dataset& batch, double gamma);

/// Analytic gradients of forward_loss. With G = (1/N)·Σ(softmax(z_i) −
/// onehot(y_i))·x_iᵀ: ∂F/∂b_j = λ_j·G·a_j + 4γ(‖b_j‖²−1)·b_j,
/// ∂F/∂λ_j = b_jᵀ·G·a_j, ∂F/∂a_j = λ_j·b_jᵀ·G. Masked dims stay zero.
GradientSet backward(const ToyModel& model, const DecoupledAdapter& ad,
                     const Dataset& batch, double gamma, Wrt wrt);

/// Fraction of argmax-correct predictions under logits (W+ΔW)x; ties break
/// toward the lowest class index. Throws DomainError on an empty test set.
double predict_accuracy(const ToyModel& model, const Matrix& delta,
                        const Dataset& test);

}  // namespace aflora
