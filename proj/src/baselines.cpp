#include "aflora/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "aflora/errors.hpp"
#include "aflora/linalg.hpp"

namespace aflora {

namespace {

// p_k = |D_k| / Σ|D|; the roster must carry at least one sample.
std::vector<double> data_weights(const std::vector<int>& counts,
                                 const char* who) {
    double total = 0.0;
    for (int c : counts) {
        if (c < 0) {
            throw AggregationError(std::string(who) + ": negative data count");
        }
        total += c;
    }
    if (total <= 0.0) {
        throw AggregationError(std::string(who) + ": roster holds no data");
    }
    std::vector<double> p(counts.size());
    for (std::size_t k = 0; k < counts.size(); ++k) {
        p[k] = counts[k] / total;
    }
    return p;
}

void check_factor_shapes(const std::vector<HomAdapterUpdate>& updates,
                         const char* who) {
    if (updates.empty()) {
        throw AggregationError(std::string(who) + ": no updates");
    }
    const int m = updates.front().b.rows();
    const int n = updates.front().a.cols();
    for (const HomAdapterUpdate& u : updates) {
        if (u.a.rows() != u.b.cols()) {
            throw ShapeError(std::string(who) + ": factor ranks disagree, A is " +
                             u.a.shape() + " but B is " + u.b.shape());
        }
        if (u.b.rows() != m || u.a.cols() != n) {
            throw ShapeError(std::string(who) + ": mixed layer shapes in roster");
        }
    }
}

std::vector<int> counts_of(const std::vector<HomAdapterUpdate>& updates) {
    std::vector<int> counts;
    counts.reserve(updates.size());
    for (const HomAdapterUpdate& u : updates) {
        counts.push_back(u.data_count);
    }
    return counts;
}

}  // namespace

std::pair<Matrix, Matrix> classic_aggregate(
    const std::vector<HomAdapterUpdate>& updates) {
    check_factor_shapes(updates, "classic_aggregate");
    const int r = updates.front().a.rows();
    for (const HomAdapterUpdate& u : updates) {
        if (u.a.rows() != r) {
            throw RankMismatchError(
                "classic_aggregate: ranks " + std::to_string(r) + " vs " +
                std::to_string(u.a.rows()) +
                " (FedAvg on factors needs a homogeneous rank)");
        }
    }
    const std::vector<double> p =
        data_weights(counts_of(updates), "classic_aggregate");
    Matrix a_avg(r, updates.front().a.cols());
    Matrix b_avg(updates.front().b.rows(), r);
    for (std::size_t k = 0; k < updates.size(); ++k) {
        accumulate(a_avg, updates[k].a, p[k]);
        accumulate(b_avg, updates[k].b, p[k]);
    }
    return {a_avg, b_avg};
}

Matrix ideal_aggregate(const std::vector<WeightedDelta>& updates) {
    if (updates.empty()) {
        throw AggregationError("ideal_aggregate: no updates");
    }
    std::vector<int> counts;
    counts.reserve(updates.size());
    for (const WeightedDelta& u : updates) {
        if (!u.delta.same_shape(updates.front().delta)) {
            throw ShapeError("ideal_aggregate: delta shapes disagree, " +
                             u.delta.shape() + " vs " +
                             updates.front().delta.shape());
        }
        counts.push_back(u.data_count);
    }
    const std::vector<double> p = data_weights(counts, "ideal_aggregate");
    Matrix sum(updates.front().delta.rows(), updates.front().delta.cols());
    for (std::size_t k = 0; k < updates.size(); ++k) {
        accumulate(sum, updates[k].delta, p[k]);
    }
    return sum;
}

Matrix flora_aggregate(const std::vector<HomAdapterUpdate>& updates) {
    check_factor_shapes(updates, "flora_aggregate");
    const std::vector<double> p =
        data_weights(counts_of(updates), "flora_aggregate");
    const int m = updates.front().b.rows();
    const int n = updates.front().a.cols();
    int total_rank = 0;
    for (const HomAdapterUpdate& u : updates) {
        total_rank += u.a.rows();
    }
    Matrix b_stack(m, total_rank);
    Matrix a_stack(total_rank, n);
    int offset = 0;
    for (std::size_t k = 0; k < updates.size(); ++k) {
        const double s = std::sqrt(p[k]);
        const int r = updates[k].a.rows();
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < r; ++j) {
                b_stack(i, offset + j) = s * updates[k].b(i, j);
            }
        }
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < n; ++j) {
                a_stack(offset + i, j) = s * updates[k].a(i, j);
            }
        }
        offset += r;
    }
    return matmul(b_stack, a_stack);
}

std::vector<std::pair<Matrix, Matrix>> flexlora_aggregate(
    const std::vector<HomAdapterUpdate>& updates,
    const std::vector<int>& target_ranks) {
    check_factor_shapes(updates, "flexlora_aggregate");
    std::vector<WeightedDelta> deltas;
    deltas.reserve(updates.size());
    for (const HomAdapterUpdate& u : updates) {
        deltas.push_back({matmul(u.b, u.a), u.data_count});
    }
    const Matrix w = ideal_aggregate(deltas);
    const int full = std::min(w.rows(), w.cols());
    for (int r : target_ranks) {
        if (r < 1 || r > full) {
            throw DomainError("flexlora_aggregate: target rank " +
                              std::to_string(r) + " outside [1, " +
                              std::to_string(full) + "]");
        }
    }
    const SvdResult s = svd(w);

    std::vector<std::pair<Matrix, Matrix>> out;
    out.reserve(target_ranks.size());
    for (int r : target_ranks) {
        Matrix b(w.rows(), r);
        for (int i = 0; i < w.rows(); ++i) {
            for (int j = 0; j < r; ++j) {
                b(i, j) = s.u(i, j) * s.sigma[static_cast<std::size_t>(j)];
            }
        }
        Matrix a(r, w.cols());
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < w.cols(); ++j) {
                a(i, j) = s.v(j, i);
            }
        }
        out.emplace_back(std::move(a), std::move(b));
    }
    return out;
}

std::pair<Matrix, Matrix> hetlora_aggregate(
    const std::vector<HomAdapterUpdate>& updates) {
    check_factor_shapes(updates, "hetlora_aggregate");
    const std::vector<double> p =
        data_weights(counts_of(updates), "hetlora_aggregate");
    const int m = updates.front().b.rows();
    const int n = updates.front().a.cols();
    int r_max = 0;
    for (const HomAdapterUpdate& u : updates) {
        r_max = std::max(r_max, u.a.rows());
    }
    Matrix a_avg(r_max, n);
    Matrix b_avg(m, r_max);
    for (std::size_t k = 0; k < updates.size(); ++k) {
        const int r = updates[k].a.rows();
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < n; ++j) {
                a_avg(i, j) += p[k] * updates[k].a(i, j);
            }
        }
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < r; ++j) {
                b_avg(i, j) += p[k] * updates[k].b(i, j);
            }
        }
    }
    return {a_avg, b_avg};
}

}  // namespace aflora
