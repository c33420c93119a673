#include "aflora/client.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "aflora/errors.hpp"
#include "aflora/linalg.hpp"

namespace aflora {

namespace {

void sgd_epochs(const ToyModel& model, DecoupledAdapter& ad,
                const Dataset& shard, double gamma, int epochs, double lr,
                int batch_size, Rng& rng) {
    if (batch_size < 1) {
        throw ConfigError("local_round: batch_size must be positive");
    }
    std::vector<int> order(static_cast<std::size_t>(shard.size()));
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (int at = 0; at < shard.size(); at += batch_size) {
            const int end = std::min(at + batch_size, shard.size());
            const std::vector<int> rows(order.begin() + at, order.begin() + end);
            const Dataset batch = shard.subset(rows);
            const GradientSet grads =
                backward(model, ad, batch, gamma, Wrt::kClient);
            accumulate(ad.b, grads.grad_b, -lr);
            for (std::size_t j = 0; j < ad.lambda.size(); ++j) {
                ad.lambda[j] -= lr * grads.grad_lambda[j];
            }
        }
    }
}

}  // namespace

std::optional<ClientUpdate> local_round(ClientState& state,
                                        const Matrix& a_global,
                                        const ToyModel& model, Rng rng) {
    if (state.shard.size() == 0) {
        return std::nullopt;  // skip-round signal
    }
    if (static_cast<int>(state.mask.size()) != state.r_initial) {
        throw ShapeError("local_round: mask length " +
                         std::to_string(state.mask.size()) + " vs r_initial " +
                         std::to_string(state.r_initial));
    }
    const std::uint64_t backbone_sum = matrix_checksum(model.w_base);

    const Matrix a_slice = truncate_a(a_global, state.r_initial);
    DecoupledAdapter ad = init_adapter(state.hyper, a_slice, state.mask);
    sgd_epochs(model, ad, state.shard, state.hyper.gamma, state.local_epochs,
               state.lr, state.batch_size, rng);

    MergedUpload up = merged_upload(ad);
    ClientUpdate update;
    update.client_id = state.id;
    update.b_merged = std::move(up.b_merged);
    update.mask = up.mask;
    update.data_count = state.shard.size();
    update.r_eff = ad.r_eff();

    // prune AFTER packaging: the upload reflects this round's training, the
    // tightened mask applies from the next round on
    std::vector<double> lambda_sq;
    lambda_sq.reserve(static_cast<std::size_t>(update.r_eff));
    for (int j = 0; j < ad.r_initial; ++j) {
        if (ad.mask[static_cast<std::size_t>(j)]) {
            const double l = ad.lambda[static_cast<std::size_t>(j)];
            lambda_sq.push_back(l * l);
        }
    }
    ddr_prune(state, lambda_sq);

    if (matrix_checksum(model.w_base) != backbone_sum) {
        throw NumericalError("local_round: frozen backbone was mutated");
    }
    return update;
}

Mask ddr_prune(ClientState& state, const std::vector<double>& lambda_sq) {
    const int r_eff = mask_popcount(state.mask);
    if (r_eff == 0) {
        return state.mask;  // nothing left to prune
    }
    if (static_cast<int>(lambda_sq.size()) != r_eff) {
        throw ShapeError("ddr_prune: " + std::to_string(lambda_sq.size()) +
                         " gate values for " + std::to_string(r_eff) +
                         " active dims");
    }
    for (double v : lambda_sq) {
        // NaN gates would silently drop every dim AND skip the strongest-dim
        // floor (all comparisons false), so fail loudly instead
        if (!std::isfinite(v)) {
            throw NumericalError("ddr_prune: non-finite gate value; "
                                 "local training diverged");
        }
    }

    double mean = 0.0;
    for (double v : lambda_sq) {
        mean += v;
    }
    mean /= r_eff;
    double var = 0.0;
    for (double v : lambda_sq) {
        var += (v - mean) * (v - mean);
    }
    var /= r_eff;  // population form: the active dims ARE the population
    const double threshold = state.hyper.beta * std::sqrt(var);

    Mask next = state.mask;
    int surviving = 0;
    int active_index = 0;
    int strongest_dim = -1;
    double strongest = -1.0;
    for (int j = 0; j < static_cast<int>(state.mask.size()); ++j) {
        if (!state.mask[static_cast<std::size_t>(j)]) {
            continue;
        }
        const double v = lambda_sq[static_cast<std::size_t>(active_index++)];
        if (v > strongest) {
            strongest = v;
            strongest_dim = j;
        }
        if (v >= threshold) {
            ++surviving;
        } else {
            next[static_cast<std::size_t>(j)] = 0;
        }
    }
    if (surviving == 0 && state.prune_floor) {
        next[static_cast<std::size_t>(strongest_dim)] = 1;
    }
    state.mask = next;
    return state.mask;
}

}  // namespace aflora
