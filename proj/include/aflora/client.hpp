#pragma once

#include <optional>
#include <vector>

#include "aflora/adapter.hpp"
#include "aflora/dataset.hpp"
#include "aflora/model.hpp"
#include "aflora/rng.hpp"

namespace aflora {

/// Per-client persistent state. The mask survives across rounds and only
/// ever loses ones (a pruned dimension never revives).
struct ClientState {
    int id = 0;
    Dataset shard;
    int r_initial = 0;
    Mask mask;  // length r_initial
    LoraHyper hyper;
    int local_epochs = 1;
    double lr = 0.05;
    int batch_size = 32;
    bool prune_floor = true;  // keep the strongest dim when all fail the rule
};

/// What a client sends up after a local round: gate-scaled active columns
/// of B plus the mask that places them.
struct ClientUpdate {
    int client_id = 0;
    Matrix b_merged;  // m × r_eff
    Mask mask;        // length r_initial, the mask used THIS round
    int data_count = 0;
    int r_eff = 0;
};

/// One client round: truncate A, re-init B=0 / λ=lambda_init on active dims,
/// run local_epochs of minibatch SGD on the gated loss, package the upload,
/// then apply the pruning rule to state.mask for the next round. Returns
/// nothing when the shard is empty (the client skips the round).
std::optional<ClientUpdate> local_round(ClientState& state,
                                        const Matrix& a_global,
                                        const ToyModel& model, Rng rng);

/// The β·σ rule: h_j ← h_j · 1(λ_j² ≥ β·σ) with σ the population standard
/// deviation over the ACTIVE λ² values (given in active-index order).
/// With prune_floor, the largest λ² survives even when every dim fails.
/// Updates state.mask in place and returns it.
Mask ddr_prune(ClientState& state, const std::vector<double>& lambda_sq);

}  // namespace aflora
