#pragma once

#include <string>
#include <vector>

#include "aflora/matrix.hpp"
#include "aflora/rng.hpp"

namespace aflora {

/// Labeled sample block: one sample per row of x. Global sample ids travel
/// with the rows so splits can be checked for disjointness.
struct Dataset {
    Matrix x;              // N × n
    std::vector<int> y;    // length N, values in [0, num_classes)
    std::vector<int> ids;  // global sample ids
    int num_classes = 0;

    int size() const { return x.rows(); }
    int features() const { return x.cols(); }

    /// Row-gather into a new block (used for minibatching and partitioning).
    Dataset subset(const std::vector<int>& rows) const;
};

/// Gaussian-blob classification task. Labels are exactly balanced before
/// any partitioning.
struct SyntheticTask {
    int n = 0;
    int num_classes = 0;
    int samples_per_class = 0;
    std::vector<std::vector<double>> class_means;  // num_classes × n
    double noise_std = 0.1;
    std::uint64_t seed = 0;
};

/// shards[k] = D_k; public_split is the server's fine-tuning split; all
/// parts are pairwise disjoint by sample id and jointly cover the input.
/// leftover holds samples no shard may legally contain (label-skew mode
/// with a class outside every client's pair); empty in the other modes.
struct PartitionedDataset {
    std::vector<Dataset> shards;
    Dataset public_split;
    Dataset test_split;
    Dataset leftover;
};

/// Random class means: each a scaled unit-norm direction, pairwise distinct.
std::vector<std::vector<double>> default_class_means(int num_classes, int n,
                                                     double scale,
                                                     std::uint64_t seed);

/// x = mean[y] + noise_std·N(0,I); deterministic per task.seed; rows
/// shuffled so sample order carries no label signal.
Dataset generate(const SyntheticTask& task);

/// Uniform split after carving out the 2% public and 10% test reserves
/// (both stratified per class so the pool stays exactly balanced).
PartitionedDataset partition_iid(const Dataset& data, int clients,
                                 std::uint64_t seed);

/// Label-skew mixture: fraction epsilon of each shard drawn uniformly,
/// fraction (1-epsilon) from the client's dominant class (assigned
/// round-robin). epsilon=1 is IID; epsilon=0 is single-class shards.
PartitionedDataset partition_noniid(const Dataset& data, int clients,
                                    double epsilon, std::uint64_t seed);

/// Every shard's label support has cardinality exactly two; pairs assigned
/// cyclically: client k holds labels {2k mod C, (2k+1) mod C}.
PartitionedDataset partition_label_skew_two(const Dataset& data, int clients,
                                            std::uint64_t seed);

/// Plain-text export, header sample_id,label,f0..f{n-1}.
void export_csv(const Dataset& data, const std::string& path);

}  // namespace aflora
