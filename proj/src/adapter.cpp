#include "aflora/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aflora/errors.hpp"

namespace aflora {

void LoraHyper::validate() const {
    if (m <= 0 || n <= 0) {
        throw ConfigError("LoraHyper: dims must be positive, got m=" +
                          std::to_string(m) + " n=" + std::to_string(n));
    }
    if (r_max < 1 || r_max > std::min(m, n)) {
        throw ConfigError("LoraHyper: r_max=" + std::to_string(r_max) +
                          " outside [1, min(m,n)=" +
                          std::to_string(std::min(m, n)) + "]");
    }
    if (!(c > 0.0)) {
        throw ConfigError("LoraHyper: C must be positive");
    }
    if (!(beta > 0.0)) {
        throw ConfigError("LoraHyper: beta must be positive");
    }
    if (!(gamma >= 0.0)) {
        throw ConfigError("LoraHyper: gamma must be non-negative");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("LoraHyper: alpha must lie in [0,1]");
    }
    if (!(lambda_init > 0.0)) {
        throw ConfigError("LoraHyper: lambda_init must be positive");
    }
}

void DecoupledAdapter::check_invariants() const {
    if (a_slice.rows() != r_initial || b.cols() != r_initial ||
        static_cast<int>(lambda.size()) != r_initial ||
        static_cast<int>(mask.size()) != r_initial) {
        throw ShapeError("adapter: inconsistent rank-dimension lengths");
    }
    for (auto h : mask) {
        if (h != 0 && h != 1) {
            throw DomainError("adapter: mask entries must be 0 or 1");
        }
    }
    for (int j = 0; j < r_initial; ++j) {
        if (mask[static_cast<std::size_t>(j)]) {
            continue;
        }
        for (int i = 0; i < b.rows(); ++i) {
            if (b(i, j) != 0.0) {
                throw DomainError("adapter: masked-out b column " +
                                  std::to_string(j) + " is non-zero");
            }
        }
    }
    for (int i = 0; i < a_slice.rows(); ++i) {
        if (std::abs(row_l2_norm(a_slice, i) - c_norm) > 1e-9) {
            throw DomainError("adapter: a_slice row " + std::to_string(i) +
                              " norm deviates from C");
        }
    }
}

Matrix truncate_a(const Matrix& a_global, int r1) {
    if (r1 < 1 || r1 > a_global.rows()) {
        throw ShapeError("truncate_a: r1=" + std::to_string(r1) +
                         " outside [1, " + std::to_string(a_global.rows()) + "]");
    }
    return take_rows(a_global, r1);
}

DecoupledAdapter init_adapter(const LoraHyper& hyper, const Matrix& a_slice,
                              const Mask& mask) {
    if (static_cast<int>(mask.size()) != a_slice.rows()) {
        throw ShapeError("init_adapter: mask length " +
                         std::to_string(mask.size()) + " vs A slice " +
                         a_slice.shape());
    }
    DecoupledAdapter ad;
    ad.a_slice = a_slice;
    ad.r_initial = a_slice.rows();
    ad.b = Matrix(hyper.m, ad.r_initial);
    ad.lambda.assign(static_cast<std::size_t>(ad.r_initial), 0.0);
    ad.mask = mask;
    ad.c_norm = hyper.c;
    for (int j = 0; j < ad.r_initial; ++j) {
        if (mask[static_cast<std::size_t>(j)]) {
            ad.lambda[static_cast<std::size_t>(j)] = hyper.lambda_init;
        }
    }
    return ad;
}

Matrix delta_weight(const DecoupledAdapter& ad) {
    // Dense path: scale active columns of b by their gate, multiply by A.
    // Inactive columns are zeroed outright so they contribute exactly zero
    // even if a caller violated the zero-column invariant.
    Matrix b_scaled(ad.b.rows(), ad.r_initial);
    for (int j = 0; j < ad.r_initial; ++j) {
        if (!ad.mask[static_cast<std::size_t>(j)]) {
            continue;
        }
        const double l = ad.lambda[static_cast<std::size_t>(j)];
        for (int i = 0; i < ad.b.rows(); ++i) {
            b_scaled(i, j) = l * ad.b(i, j);
        }
    }
    return matmul(b_scaled, ad.a_slice);
}

MergedUpload merged_upload(const DecoupledAdapter& ad) {
    Matrix out(ad.b.rows(), ad.r_eff());
    int dst = 0;
    for (int j = 0; j < ad.r_initial; ++j) {
        if (!ad.mask[static_cast<std::size_t>(j)]) {
            continue;
        }
        const double l = ad.lambda[static_cast<std::size_t>(j)];
        for (int i = 0; i < ad.b.rows(); ++i) {
            out(i, dst) = l * ad.b(i, j);
        }
        ++dst;
    }
    return MergedUpload{std::move(out), ad.mask};
}

double dimension_information(const DecoupledAdapter& ad, int j) {
    if (j < 0 || j >= ad.r_initial) {
        throw DomainError("dimension_information: index " + std::to_string(j) +
                          " outside [0, " + std::to_string(ad.r_initial) + ")");
    }
    if (!ad.mask[static_cast<std::size_t>(j)]) {
        throw DomainError("dimension_information: dimension " +
                          std::to_string(j) + " is pruned");
    }
    const double l = ad.lambda[static_cast<std::size_t>(j)];
    return ad.c_norm * ad.c_norm * l * l;
}

}  // namespace aflora
