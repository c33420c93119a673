#pragma once

#include <vector>

#include "aflora/adapter.hpp"
#include "aflora/client.hpp"
#include "aflora/dataset.hpp"
#include "aflora/model.hpp"
#include "aflora/rng.hpp"

namespace aflora {

/// Server-side view of the run. a_global rows are ℓ₂-normalized to C at
/// initialization only; fusion drifts them and nothing re-enforces the norm.
struct GlobalState {
    Matrix a_global;  // r_max × n
    Matrix b_global;  // m × r_max
    Matrix w_base;    // frozen backbone, m × n
    int round = 0;
    LoraHyper hyper;
    double server_lr = 0.01;
    int server_epochs = 1;
};

/// Fresh state: a_global drawn standard normal then row-normalized to C,
/// b_global zero, round 0.
GlobalState init_global_state(const LoraHyper& hyper, const Matrix& w_base,
                              double server_lr, int server_epochs, Rng rng);

/// Zero-pad the merged upload out to r_max columns, active columns landing
/// at their original rank indices.
Matrix harmonize(const ClientUpdate& update, int r_max);

/// Composite weights p_k ∝ log(1 + r_k) · |D_k|, renormalized to sum to 1.
/// Throws AggregationError when no update carries any weight.
std::vector<double> rank_aware_weights(const std::vector<ClientUpdate>& updates);

/// B_global = Σ p_k · harmonize(update_k).
Matrix aggregate_b(const std::vector<ClientUpdate>& updates, int r_max);

/// Fine-tune A on the public split with B_global frozen (gates already
/// absorbed into the uploads): server_epochs full-batch steps on plain
/// cross-entropy. Empty public set, zero epochs, or zero b_global all
/// return a_global unchanged.
Matrix server_finetune_a(const GlobalState& state, const Dataset& public_split,
                         const ToyModel& model);

/// A′ = α·a_old + (1−α)·a_ft.
Matrix fuse_a(const Matrix& a_old, const Matrix& a_ft, double alpha);

/// ΔW for this round: matmul(b_global, a_global). The harness folds it
/// into every participant's backbone view.
Matrix broadcast_and_fold(const GlobalState& state);

}  // namespace aflora
