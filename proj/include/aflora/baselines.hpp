#pragma once

#include <utility>
#include <vector>

#include "aflora/matrix.hpp"

namespace aflora {

/// Plain two-factor LoRA update as the reference schemes exchange it.
/// Classic FedAvg additionally requires the rank r to match across clients.
struct HomAdapterUpdate {
    Matrix a;  // r × n
    Matrix b;  // m × r
    int data_count = 0;
};

/// A fully materialized client delta plus its data weight.
struct WeightedDelta {
    Matrix delta;  // m × n
    int data_count = 0;
};

/// FedAvg on the factors: A = Σ p_k·A_k, B = Σ p_k·B_k with p_k = |D_k|/|D|.
/// Heterogeneous ranks cannot be averaged this way; throws RankMismatchError.
std::pair<Matrix, Matrix> classic_aggregate(
    const std::vector<HomAdapterUpdate>& updates);

/// The interference-free reference: ΔW = Σ p_k·ΔW_k.
Matrix ideal_aggregate(const std::vector<WeightedDelta>& updates);

/// Stack [√p₁B₁ | … | √p_K B_K] against [√p₁A₁; …; √p_K A_K] and multiply.
/// Exact (equals ideal_aggregate) at the cost of a Σr_k-wide exchange.
Matrix flora_aggregate(const std::vector<HomAdapterUpdate>& updates);

/// Redistribute W = ideal_aggregate through its SVD: client k receives
/// B_k = U[:, :r_k]·diag(σ[:r_k]) and A_k = V[:, :r_k]ᵀ, the best rank-r_k
/// approximation of W. Returned pairs are (A_k, B_k) in target_ranks order.
std::vector<std::pair<Matrix, Matrix>> flexlora_aggregate(
    const std::vector<HomAdapterUpdate>& updates,
    const std::vector<int>& target_ranks);

/// Zero-pad every factor pair to the largest rank in the roster (B right,
/// A bottom), then FedAvg each factor. Returns (A_padded_avg, B_padded_avg).
std::pair<Matrix, Matrix> hetlora_aggregate(
    const std::vector<HomAdapterUpdate>& updates);

}  // namespace aflora
