#include <cmath>
#include <limits>
#include <vector>

#include "aflora/client.hpp"
#include "aflora/errors.hpp"
#include "aflora/linalg.hpp"
#include "doctest.h"
#include "oracles.hpp"

using aflora::ClientState;
using aflora::ClientUpdate;
using aflora::Dataset;
using aflora::LoraHyper;
using aflora::Mask;
using aflora::Matrix;
using aflora::Rng;
using aflora::ToyModel;

namespace {

LoraHyper hyper(int m, int n, int r_max, double beta = 0.5) {
    LoraHyper h;
    h.m = m;
    h.n = n;
    h.r_max = r_max;
    h.beta = beta;
    return h;
}

// Two well-separated Gaussian blobs.
Dataset separable_shard(int count, int n, Rng& rng) {
    Dataset d;
    d.num_classes = 2;
    d.x = Matrix(count, n);
    d.y.resize(static_cast<std::size_t>(count));
    d.ids.resize(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int label = i % 2;
        for (int j = 0; j < n; ++j) {
            d.x(i, j) = (label == 0 ? 1.5 : -1.5) + 0.2 * rng.normal();
        }
        d.y[static_cast<std::size_t>(i)] = label;
        d.ids[static_cast<std::size_t>(i)] = i;
    }
    return d;
}

ClientState make_state(const LoraHyper& h, Dataset shard, int r1) {
    ClientState s;
    s.id = 3;
    s.shard = std::move(shard);
    s.r_initial = r1;
    s.mask.assign(static_cast<std::size_t>(r1), 1);
    s.hyper = h;
    s.local_epochs = 1;
    s.lr = 0.1;
    s.batch_size = 8;
    return s;
}

Matrix normalized_a(int rows, int n, double c, Rng& rng) {
    Matrix a = aflora::random_normal(rows, n, rng);
    aflora::normalize_rows(a, c);
    return a;
}

}  // namespace

TEST_CASE("ddr_prune hand fixture {4,4,0.1} with beta=1") {
    ClientState s = make_state(hyper(2, 4, 3, 1.0), Dataset{}, 3);
    // sigma = sqrt(((4-2.7)^2*2 + (0.1-2.7)^2)/3) = sqrt(10.14/3) ~ 1.8385
    const Mask next = aflora::ddr_prune(s, {4.0, 4.0, 0.1});
    CHECK(next == Mask{1, 1, 0});
    CHECK(aflora::mask_popcount(s.mask) == 2);
}

TEST_CASE("ddr_prune keeps everything when all gates are equal") {
    ClientState s = make_state(hyper(2, 4, 3), Dataset{}, 3);
    const Mask next = aflora::ddr_prune(s, {0.7, 0.7, 0.7});
    CHECK(next == Mask{1, 1, 1});
}

TEST_CASE("ddr_prune single dimension always survives") {
    ClientState s = make_state(hyper(2, 4, 1, 100.0), Dataset{}, 1);
    const Mask next = aflora::ddr_prune(s, {5.0});
    CHECK(next == Mask{1});
}

TEST_CASE("ddr_prune floor keeps the strongest dim; flag disables it") {
    // beta so large every dim fails the rule
    ClientState s = make_state(hyper(2, 8, 4, 50.0), Dataset{}, 4);
    aflora::ddr_prune(s, {1.0, 3.0, 2.0, 0.5});
    CHECK(s.mask == Mask{0, 1, 0, 0});

    ClientState bare = make_state(hyper(2, 8, 4, 50.0), Dataset{}, 4);
    bare.prune_floor = false;
    aflora::ddr_prune(bare, {1.0, 3.0, 2.0, 0.5});
    CHECK(aflora::mask_popcount(bare.mask) == 0);

    // rankless state: further prunes are no-ops
    const Mask still = aflora::ddr_prune(bare, {});
    CHECK(aflora::mask_popcount(still) == 0);
}

TEST_CASE("ddr_prune validates the gate vector length") {
    ClientState s = make_state(hyper(2, 4, 3), Dataset{}, 3);
    s.mask = {1, 0, 1};
    CHECK_THROWS_AS(aflora::ddr_prune(s, {1.0, 2.0, 3.0}), aflora::ShapeError);
    CHECK_NOTHROW(aflora::ddr_prune(s, {1.0, 2.0}));
}

TEST_CASE("ddr_prune rejects non-finite gates instead of corrupting the mask") {
    // NaN fails every comparison, which would zero the whole mask and skip
    // the strongest-dim floor (its argmax never fires)
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();
    ClientState s = make_state(hyper(2, 4, 3), Dataset{}, 3);
    CHECK_THROWS_AS(aflora::ddr_prune(s, {1.0, nan, 2.0}),
                    aflora::NumericalError);
    CHECK(s.mask == Mask{1, 1, 1});  // state untouched on failure
    CHECK_THROWS_AS(aflora::ddr_prune(s, {inf, 1.0, 2.0}),
                    aflora::NumericalError);
}

TEST_CASE("ddr_prune soundness: pruned iff below beta*sigma, floor excepted") {
    Rng rng(14);
    for (int trial = 0; trial < 200; ++trial) {
        const int r = 1 + static_cast<int>(rng.uniform_int(6));
        const double beta = 0.25 * (1 + static_cast<int>(rng.uniform_int(12)));
        ClientState s = make_state(hyper(2, 8, r, beta), Dataset{}, r);
        std::vector<double> lambda_sq;
        for (int j = 0; j < r; ++j) {
            const double l = rng.normal();
            lambda_sq.push_back(l * l);
        }
        const Mask before = s.mask;
        aflora::ddr_prune(s, lambda_sq);

        double mean = 0.0;
        for (double v : lambda_sq) {
            mean += v;
        }
        mean /= r;
        double var = 0.0;
        for (double v : lambda_sq) {
            var += (v - mean) * (v - mean);
        }
        const double threshold = beta * std::sqrt(var / r);

        int should_survive = 0;
        for (int j = 0; j < r; ++j) {
            if (lambda_sq[static_cast<std::size_t>(j)] >= threshold) {
                ++should_survive;
            }
        }
        for (int j = 0; j < r; ++j) {
            const bool kept = s.mask[static_cast<std::size_t>(j)] != 0;
            const bool passes = lambda_sq[static_cast<std::size_t>(j)] >= threshold;
            if (should_survive > 0) {
                CHECK(kept == passes);
            }
            CHECK(s.mask[static_cast<std::size_t>(j)] <= before[static_cast<std::size_t>(j)]);
        }
        if (should_survive == 0) {
            CHECK(aflora::mask_popcount(s.mask) == 1);  // floor
        }
        CHECK(aflora::mask_popcount(s.mask) <= r);
    }
}

TEST_CASE("local_round skips on an empty shard") {
    ClientState s = make_state(hyper(2, 4, 2), Dataset{}, 2);
    s.shard.num_classes = 2;
    Rng rng(1);
    const ToyModel model{Matrix(2, 4), 2};
    const auto update =
        aflora::local_round(s, normalized_a(2, 4, 1.0, rng), model, rng.split(9));
    CHECK_FALSE(update.has_value());
    CHECK(s.mask == Mask{1, 1});  // untouched
}

TEST_CASE("local_round with zero epochs uploads a zero block") {
    Rng rng(2);
    ClientState s = make_state(hyper(2, 4, 2), separable_shard(12, 4, rng), 2);
    s.local_epochs = 0;
    const ToyModel model{Matrix(2, 4), 2};
    const auto update =
        aflora::local_round(s, normalized_a(2, 4, 1.0, rng), model, rng.split(9));
    REQUIRE(update.has_value());
    CHECK(update->b_merged == Matrix(2, 2));
    CHECK(update->r_eff == 2);
    CHECK(update->data_count == 12);
    CHECK(update->client_id == 3);
}

TEST_CASE("local_round with a fully pruned mask uploads an empty block") {
    Rng rng(3);
    ClientState s = make_state(hyper(2, 4, 2), separable_shard(12, 4, rng), 2);
    s.mask = {0, 0};
    const ToyModel model{Matrix(2, 4), 2};
    const auto update =
        aflora::local_round(s, normalized_a(2, 4, 1.0, rng), model, rng.split(9));
    REQUIRE(update.has_value());
    CHECK(update->r_eff == 0);
    CHECK(update->b_merged.cols() == 0);
    CHECK(update->b_merged.rows() == 2);
}

TEST_CASE("local_round trains: folded update lowers shard cross-entropy") {
    Rng rng(4);
    const LoraHyper h = hyper(2, 6, 3);
    ClientState s = make_state(h, separable_shard(40, 6, rng), 3);
    s.local_epochs = 2;
    const ToyModel model{aflora::scaled(aflora::random_normal(2, 6, rng), 0.1), 2};
    const Matrix a_global = normalized_a(3, 6, 1.0, rng);

    // loss before: fresh adapter has b=0, so delta is zero
    const aflora::DecoupledAdapter fresh =
        aflora::init_adapter(h, aflora::truncate_a(a_global, 3), s.mask);
    const double before = aflora::forward_loss(model, fresh, s.shard, 0.0);

    const auto update = aflora::local_round(s, a_global, model, rng.split(9));
    REQUIRE(update.has_value());
    const Matrix padded = aflora::zero_pad_cols(update->b_merged, 3, update->mask);
    const Matrix delta = aflora::matmul(padded, aflora::truncate_a(a_global, 3));

    // rebuild an adapter carrying the trained delta to evaluate CE
    const Matrix w_after = aflora::add_scaled(model.w_base, delta);
    const ToyModel after_model{w_after, 2};
    const double after = aflora::forward_loss(after_model, fresh, s.shard, 0.0);
    CHECK(after < before);
}

TEST_CASE("upload reflects pre-prune training; mask tightens for next round") {
    Rng rng(5);
    // beta large enough that pruning will bite after training
    const LoraHyper h = hyper(2, 6, 4, 1.0);
    ClientState s = make_state(h, separable_shard(24, 6, rng), 4);
    s.local_epochs = 3;
    const ToyModel model{Matrix(2, 6), 2};
    const Matrix a_global = normalized_a(4, 6, 1.0, rng);

    const Mask mask_before = s.mask;
    const auto update = aflora::local_round(s, a_global, model, rng.split(9));
    REQUIRE(update.has_value());

    // the update carries the round's full active set
    CHECK(update->mask == mask_before);
    CHECK(update->r_eff == aflora::mask_popcount(mask_before));
    CHECK(update->b_merged.cols() == update->r_eff);

    // the state's mask may only lose dims
    for (std::size_t j = 0; j < s.mask.size(); ++j) {
        CHECK(s.mask[j] <= mask_before[j]);
    }
}

TEST_CASE("mask monotonicity and rank law over many rounds") {
    Rng rng(6);
    const LoraHyper h = hyper(3, 8, 5, 0.9);
    ClientState s = make_state(h, separable_shard(30, 8, rng), 5);
    s.local_epochs = 2;
    const ToyModel model{aflora::scaled(aflora::random_normal(3, 8, rng), 0.1), 3};
    // two-class shard, three-class model: fine, labels stay in range

    Mask prev = s.mask;
    for (int round = 0; round < 12; ++round) {
        const Matrix a_global = normalized_a(5, 8, 1.0, rng);
        const auto update = aflora::local_round(s, a_global, model, rng.split(100 + round));
        REQUIRE(update.has_value());
        CHECK(update->r_eff == aflora::mask_popcount(update->mask));
        CHECK(update->mask == prev);  // this round ran on last round's mask
        for (std::size_t j = 0; j < s.mask.size(); ++j) {
            CHECK(s.mask[j] <= prev[j]);
        }
        CHECK(aflora::mask_popcount(s.mask) >= 1);  // floor holds
        CHECK(aflora::mask_popcount(s.mask) <= s.r_initial);
        prev = s.mask;
    }
}

TEST_CASE("local_round is deterministic in (state, inputs, rng)") {
    Rng rng(7);
    const LoraHyper h = hyper(2, 5, 3);
    const Dataset shard = separable_shard(20, 5, rng);
    const ToyModel model{aflora::random_normal(2, 5, rng), 2};
    const Matrix a_global = normalized_a(3, 5, 1.0, rng);

    ClientState s1 = make_state(h, shard, 3);
    ClientState s2 = make_state(h, shard, 3);
    const auto u1 = aflora::local_round(s1, a_global, model, Rng(42));
    const auto u2 = aflora::local_round(s2, a_global, model, Rng(42));
    REQUIRE(u1.has_value());
    REQUIRE(u2.has_value());
    CHECK(u1->b_merged == u2->b_merged);
    CHECK(u1->mask == u2->mask);
    CHECK(s1.mask == s2.mask);

    const auto u3 = aflora::local_round(s1, a_global, model, Rng(43));
    REQUIRE(u3.has_value());
    CHECK_FALSE(u3->b_merged == u1->b_merged);
}

TEST_CASE("local_round rejects an undersized a_global") {
    Rng rng(8);
    ClientState s = make_state(hyper(2, 5, 3), separable_shard(10, 5, rng), 3);
    const ToyModel model{Matrix(2, 5), 2};
    CHECK_THROWS_AS(
        aflora::local_round(s, normalized_a(2, 5, 1.0, rng), model, Rng(1)),
        aflora::ShapeError);
}
