#include "aflora/server.hpp"

#include <cmath>
#include <cstddef>

#include "aflora/errors.hpp"
#include "aflora/linalg.hpp"

namespace aflora {

GlobalState init_global_state(const LoraHyper& hyper, const Matrix& w_base,
                              double server_lr, int server_epochs, Rng rng) {
    hyper.validate();
    if (w_base.rows() != hyper.m || w_base.cols() != hyper.n) {
        throw ShapeError("init_global_state: backbone is " +
                         w_base.shape() + ", hyper wants " +
                         Matrix::shape_string(hyper.m, hyper.n));
    }
    if (!(server_lr > 0.0)) {
        throw ConfigError("init_global_state: server_lr must be positive");
    }
    if (server_epochs < 0) {
        throw ConfigError("init_global_state: server_epochs must be >= 0");
    }
    GlobalState state;
    state.a_global = random_normal(hyper.r_max, hyper.n, rng);
    normalize_rows(state.a_global, hyper.c);
    state.b_global = Matrix(hyper.m, hyper.r_max);
    state.w_base = w_base;
    state.round = 0;
    state.hyper = hyper;
    state.server_lr = server_lr;
    state.server_epochs = server_epochs;
    return state;
}

Matrix harmonize(const ClientUpdate& update, int r_max) {
    return zero_pad_cols(update.b_merged, r_max, update.mask);
}

std::vector<double> rank_aware_weights(const std::vector<ClientUpdate>& updates) {
    if (updates.empty()) {
        throw AggregationError("rank_aware_weights: no updates");
    }
    // p_k ∝ [log(1+r_k)/Σlog] · [|D_k|/Σ|D|]; both denominators are shared
    // across k, so they cancel under the final renormalization.
    std::vector<double> raw(updates.size());
    double total = 0.0;
    for (std::size_t k = 0; k < updates.size(); ++k) {
        const ClientUpdate& u = updates[k];
        if (u.r_eff < 0 || u.data_count < 0) {
            throw AggregationError("rank_aware_weights: negative rank or count");
        }
        raw[k] = std::log1p(static_cast<double>(u.r_eff)) *
                 static_cast<double>(u.data_count);
        total += raw[k];
    }
    if (total <= 0.0) {
        throw AggregationError(
            "rank_aware_weights: every update is rank-0 or dataless");
    }
    for (double& w : raw) {
        w /= total;
    }
    return raw;
}

Matrix aggregate_b(const std::vector<ClientUpdate>& updates, int r_max) {
    const std::vector<double> weights = rank_aware_weights(updates);
    Matrix sum;
    for (std::size_t k = 0; k < updates.size(); ++k) {
        const Matrix padded = harmonize(updates[k], r_max);
        if (sum.empty()) {
            sum = Matrix(padded.rows(), padded.cols());
        }
        accumulate(sum, padded, weights[k]);
    }
    return sum;
}

namespace {

// Adapter view of the aggregated globals: gates sit absorbed inside
// b_global, so λ is all ones and every dimension counts as active.
DecoupledAdapter global_adapter(const Matrix& a, const Matrix& b, double c) {
    DecoupledAdapter ad;
    ad.a_slice = a;
    ad.b = b;
    ad.lambda.assign(static_cast<std::size_t>(a.rows()), 1.0);
    ad.mask.assign(static_cast<std::size_t>(a.rows()), 1);
    ad.r_initial = a.rows();
    ad.c_norm = c;
    return ad;
}

}  // namespace

Matrix server_finetune_a(const GlobalState& state, const Dataset& public_split,
                         const ToyModel& model) {
    if (public_split.size() == 0 || state.server_epochs == 0) {
        return state.a_global;
    }
    if (frobenius_norm(state.b_global) == 0.0) {
        return state.a_global;  // dead path: grad_a would be identically zero
    }
    const std::uint64_t backbone = matrix_checksum(model.w_base);
    Matrix a = state.a_global;
    for (int epoch = 0; epoch < state.server_epochs; ++epoch) {
        const DecoupledAdapter ad =
            global_adapter(a, state.b_global, state.hyper.c);
        const GradientSet g = backward(model, ad, public_split, 0.0, Wrt::kServer);
        accumulate(a, g.grad_a, -state.server_lr);
    }
    if (matrix_checksum(model.w_base) != backbone) {
        throw NumericalError("server_finetune_a: backbone mutated");
    }
    return a;
}

Matrix fuse_a(const Matrix& a_old, const Matrix& a_ft, double alpha) {
    if (!a_old.same_shape(a_ft)) {
        throw ShapeError("fuse_a: " + a_old.shape() + " vs " +
                         a_ft.shape());
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw DomainError("fuse_a: alpha outside [0, 1]");
    }
    if (alpha == 1.0) {
        return a_old;
    }
    if (alpha == 0.0) {
        return a_ft;
    }
    Matrix fused = scaled(a_old, alpha);
    accumulate(fused, a_ft, 1.0 - alpha);
    return fused;
}

Matrix broadcast_and_fold(const GlobalState& state) {
    return matmul(state.b_global, state.a_global);
}

}  // namespace aflora
