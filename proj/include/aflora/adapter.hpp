#pragma once

#include <vector>

#include "aflora/linalg.hpp"
#include "aflora/matrix.hpp"

namespace aflora {

/// Shared shape and hyperparameter bundle for every adapter in a run.
struct LoraHyper {
    int m = 0;                 // output dim
    int n = 0;                 // input dim
    int r_max = 0;             // largest initial rank across clients
    double c = 1.0;            // target ℓ₂ norm of every A row
    double beta = 0.5;         // pruning threshold multiplier
    double gamma = 0.0;        // B-column norm regularizer weight
    double alpha = 0.5;        // A-fusion ratio
    double lambda_init = 1.0;  // diagonal gate initialization

    /// Throws ConfigError on any violated bound.
    void validate() const;
};

/// ΔW = B·diag(λ)·A with a persistent on/off mask per rank dimension.
/// A is frozen on the client; B and λ are the trainable halves. Columns of
/// b at masked-out positions stay exactly zero; only merged_upload compacts.
struct DecoupledAdapter {
    Matrix a_slice;              // r_initial × n, rows hold ℓ₂ norm c_norm
    Matrix b;                    // m × r_initial
    std::vector<double> lambda;  // diagonal gate, length r_initial
    Mask mask;                   // length r_initial
    int r_initial = 0;
    double c_norm = 1.0;

    int r_eff() const { return mask_popcount(mask); }

    /// Throws ShapeError / DomainError on any violated structural invariant.
    void check_invariants() const;
};

/// Active columns of b scaled by their gate, plus the mask that places them.
struct MergedUpload {
    Matrix b_merged;  // m × r_eff
    Mask mask;        // length r_initial
};

/// First r1 rows of the global A. Throws ShapeError when r1 is out of
/// [1, a_global.rows].
Matrix truncate_a(const Matrix& a_global, int r1);

/// Fresh adapter against the given A slice: b = 0, λ = lambda_init on active
/// dims (0 on pruned ones), mask carried over.
DecoupledAdapter init_adapter(const LoraHyper& hyper, const Matrix& a_slice,
                              const Mask& mask);

/// ΔW = Σ over active j of λ_j · b_j · a_jᵀ. Masked-out dims contribute
/// exactly zero.
Matrix delta_weight(const DecoupledAdapter& ad);

/// Column i of the result is λ_{j(i)} · b_{j(i)} for the i-th active index.
MergedUpload merged_upload(const DecoupledAdapter& ad);

/// Information content C²·λ_j² of an active dimension j; throws DomainError
/// when j is out of range or pruned.
double dimension_information(const DecoupledAdapter& ad, int j);

}  // namespace aflora
