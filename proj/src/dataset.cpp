#include "aflora/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>

#include "aflora/errors.hpp"
#include "aflora/linalg.hpp"

namespace aflora {

Dataset Dataset::subset(const std::vector<int>& rows) const {
    Dataset out;
    out.num_classes = num_classes;
    out.x = Matrix(static_cast<int>(rows.size()), x.cols());
    out.y.reserve(rows.size());
    out.ids.reserve(rows.size());
    int dst = 0;
    for (int r : rows) {
        if (r < 0 || r >= size()) {
            throw DomainError("Dataset::subset: row " + std::to_string(r) +
                              " outside [0, " + std::to_string(size()) + ")");
        }
        for (int j = 0; j < x.cols(); ++j) {
            out.x(dst, j) = x(r, j);
        }
        out.y.push_back(y[static_cast<std::size_t>(r)]);
        out.ids.push_back(ids[static_cast<std::size_t>(r)]);
        ++dst;
    }
    return out;
}

std::vector<std::vector<double>> default_class_means(int num_classes, int n,
                                                     double scale,
                                                     std::uint64_t seed) {
    Rng rng = Rng(seed).split(stream::kData, 17);
    std::vector<std::vector<double>> means;
    means.reserve(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        std::vector<double> mean(static_cast<std::size_t>(n));
        double norm = 0.0;
        for (double& v : mean) {
            v = rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : mean) {
            v = scale * v / norm;
        }
        means.push_back(std::move(mean));
    }
    return means;
}

Dataset generate(const SyntheticTask& task) {
    if (task.n <= 0 || task.num_classes <= 0 || task.samples_per_class <= 0) {
        throw ConfigError("generate: dims and counts must be positive");
    }
    if (static_cast<int>(task.class_means.size()) != task.num_classes) {
        throw ConfigError("generate: " + std::to_string(task.class_means.size()) +
                          " class means for " + std::to_string(task.num_classes) +
                          " classes");
    }
    for (const auto& mean : task.class_means) {
        if (static_cast<int>(mean.size()) != task.n) {
            throw ConfigError("generate: class mean length mismatch");
        }
    }
    if (!(task.noise_std >= 0.0)) {
        throw ConfigError("generate: noise_std must be non-negative");
    }

    Rng rng = Rng(task.seed).split(stream::kData);
    const int total = task.num_classes * task.samples_per_class;
    Dataset data;
    data.num_classes = task.num_classes;
    data.x = Matrix(total, task.n);
    data.y.resize(static_cast<std::size_t>(total));
    data.ids.resize(static_cast<std::size_t>(total));

    int row = 0;
    for (int c = 0; c < task.num_classes; ++c) {
        const auto& mean = task.class_means[static_cast<std::size_t>(c)];
        for (int s = 0; s < task.samples_per_class; ++s) {
            for (int j = 0; j < task.n; ++j) {
                data.x(row, j) = mean[static_cast<std::size_t>(j)] +
                                 task.noise_std * rng.normal();
            }
            data.y[static_cast<std::size_t>(row)] = c;
            data.ids[static_cast<std::size_t>(row)] = row;
            ++row;
        }
    }

    // shuffle rows so order carries no label signal
    std::vector<int> perm(static_cast<std::size_t>(total));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    return data.subset(perm);
}

namespace {

// Removes `count` uniform draws from `pool` and returns them.
std::vector<int> draw_uniform(std::vector<int>& pool, int count, Rng& rng) {
    if (count > static_cast<int>(pool.size())) {
        throw PartitionError("partition: need " + std::to_string(count) +
                             " samples, pool has " +
                             std::to_string(pool.size()));
    }
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const std::size_t pick =
            static_cast<std::size_t>(rng.uniform_int(pool.size()));
        out.push_back(pool[pick]);
        pool[pick] = pool.back();
        pool.pop_back();
    }
    return out;
}

// Removes `count` uniform draws restricted to rows whose label passes `keep`.
std::vector<int> draw_matching(std::vector<int>& pool, int count,
                               const Dataset& data,
                               const std::function<bool(int)>& keep, Rng& rng,
                               const std::string& what) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (keep(data.y[static_cast<std::size_t>(pool[i])])) {
            eligible.push_back(i);
        }
    }
    if (static_cast<int>(eligible.size()) < count) {
        throw PartitionError("partition: need " + std::to_string(count) + " " +
                             what + " samples, pool has " +
                             std::to_string(eligible.size()));
    }
    rng.shuffle(eligible);
    eligible.resize(static_cast<std::size_t>(count));
    // remove in descending index order so swap-and-pop stays valid
    std::sort(eligible.begin(), eligible.end(), std::greater<std::size_t>());
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::size_t idx : eligible) {
        out.push_back(pool[idx]);
        pool[idx] = pool.back();
        pool.pop_back();
    }
    return out;
}

struct Reserves {
    std::vector<int> pool;  // remaining row indices
    std::vector<int> public_rows;
    std::vector<int> test_rows;
};

// 2% public, 10% test, drawn stratified per class so the remaining pool
// keeps the exact input label proportions (and feasibility of exact-demand
// partitions depends only on (data, K, epsilon), never on the draw).
Reserves carve_reserves(const Dataset& data, Rng& rng) {
    Reserves r;
    std::vector<std::vector<int>> by_class(
        static_cast<std::size_t>(data.num_classes));
    for (int i = 0; i < data.size(); ++i) {
        by_class[static_cast<std::size_t>(data.y[static_cast<std::size_t>(i)])]
            .push_back(i);
    }
    for (auto& rows : by_class) {
        rng.shuffle(rows);
        const int n_public =
            static_cast<int>(std::round(0.02 * static_cast<double>(rows.size())));
        const int n_test =
            static_cast<int>(std::round(0.10 * static_cast<double>(rows.size())));
        if (n_public + n_test > static_cast<int>(rows.size())) {
            throw PartitionError("partition: class too small for reserves");
        }
        std::size_t at = 0;
        for (int i = 0; i < n_public; ++i) {
            r.public_rows.push_back(rows[at++]);
        }
        for (int i = 0; i < n_test; ++i) {
            r.test_rows.push_back(rows[at++]);
        }
        for (; at < rows.size(); ++at) {
            r.pool.push_back(rows[at]);
        }
    }
    rng.shuffle(r.pool);
    return r;
}

std::vector<int> shard_sizes(int remaining, int clients) {
    std::vector<int> sizes(static_cast<std::size_t>(clients),
                           remaining / clients);
    for (int k = 0; k < remaining % clients; ++k) {
        ++sizes[static_cast<std::size_t>(k)];
    }
    return sizes;
}

PartitionedDataset assemble(const Dataset& data, const Reserves& reserves,
                            const std::vector<std::vector<int>>& shard_rows,
                            const std::vector<int>& leftover_rows = {}) {
    PartitionedDataset out;
    out.shards.reserve(shard_rows.size());
    for (const auto& rows : shard_rows) {
        out.shards.push_back(data.subset(rows));
    }
    out.public_split = data.subset(reserves.public_rows);
    out.test_split = data.subset(reserves.test_rows);
    out.leftover = data.subset(leftover_rows);
    return out;
}

void check_partition_args(const Dataset& data, int clients) {
    if (clients < 1) {
        throw PartitionError("partition: need at least one client");
    }
    if (data.size() == 0) {
        throw PartitionError("partition: empty dataset");
    }
}

}  // namespace

PartitionedDataset partition_iid(const Dataset& data, int clients,
                                 std::uint64_t seed) {
    check_partition_args(data, clients);
    Rng rng = Rng(seed).split(stream::kData, 1);
    Reserves reserves = carve_reserves(data, rng);
    const auto sizes = shard_sizes(static_cast<int>(reserves.pool.size()), clients);
    std::vector<std::vector<int>> shard_rows;
    shard_rows.reserve(static_cast<std::size_t>(clients));
    for (int k = 0; k < clients; ++k) {
        shard_rows.push_back(
            draw_uniform(reserves.pool, sizes[static_cast<std::size_t>(k)], rng));
    }
    return assemble(data, reserves, shard_rows);
}

PartitionedDataset partition_noniid(const Dataset& data, int clients,
                                    double epsilon, std::uint64_t seed) {
    check_partition_args(data, clients);
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw PartitionError("partition_noniid: epsilon outside [0,1]");
    }
    Rng rng = Rng(seed).split(stream::kData, 2);
    Reserves reserves = carve_reserves(data, rng);
    const auto sizes = shard_sizes(static_cast<int>(reserves.pool.size()), clients);

    std::vector<std::vector<int>> shard_rows(static_cast<std::size_t>(clients));
    // dominant portions first so uniform draws cannot starve a class
    std::vector<int> dominant_counts(static_cast<std::size_t>(clients));
    for (int k = 0; k < clients; ++k) {
        const int size_k = sizes[static_cast<std::size_t>(k)];
        dominant_counts[static_cast<std::size_t>(k)] =
            static_cast<int>(std::round((1.0 - epsilon) * size_k));
        const int dominant_class = k % data.num_classes;
        shard_rows[static_cast<std::size_t>(k)] = draw_matching(
            reserves.pool, dominant_counts[static_cast<std::size_t>(k)], data,
            [dominant_class](int label) { return label == dominant_class; },
            rng, "class-" + std::to_string(dominant_class));
    }
    for (int k = 0; k < clients; ++k) {
        const int rest = sizes[static_cast<std::size_t>(k)] -
                         dominant_counts[static_cast<std::size_t>(k)];
        const auto uniform_part = draw_uniform(reserves.pool, rest, rng);
        auto& rows = shard_rows[static_cast<std::size_t>(k)];
        rows.insert(rows.end(), uniform_part.begin(), uniform_part.end());
    }
    return assemble(data, reserves, shard_rows);
}

PartitionedDataset partition_label_skew_two(const Dataset& data, int clients,
                                            std::uint64_t seed) {
    check_partition_args(data, clients);
    if (data.num_classes < 2) {
        throw PartitionError("partition_label_skew_two: need at least 2 classes");
    }
    Rng rng = Rng(seed).split(stream::kData, 3);
    Reserves reserves = carve_reserves(data, rng);

    // Shard sizes follow from dealing each class evenly among the clients
    // whose pair holds it; forcing equal sizes instead would make exact
    // 2-label supports unsatisfiable for most (K, C) combinations.
    std::vector<std::vector<int>> holders(
        static_cast<std::size_t>(data.num_classes));
    for (int k = 0; k < clients; ++k) {
        holders[static_cast<std::size_t>((2 * k) % data.num_classes)].push_back(k);
        holders[static_cast<std::size_t>((2 * k + 1) % data.num_classes)].push_back(k);
    }

    std::vector<std::vector<int>> by_class(
        static_cast<std::size_t>(data.num_classes));
    for (int row : reserves.pool) {
        by_class[static_cast<std::size_t>(data.y[static_cast<std::size_t>(row)])]
            .push_back(row);
    }

    std::vector<std::vector<int>> shard_rows(static_cast<std::size_t>(clients));
    std::vector<int> leftover;
    for (int c = 0; c < data.num_classes; ++c) {
        auto& rows = by_class[static_cast<std::size_t>(c)];
        const auto& who = holders[static_cast<std::size_t>(c)];
        if (who.empty()) {
            leftover.insert(leftover.end(), rows.begin(), rows.end());
            continue;
        }
        if (rows.size() < who.size()) {
            throw PartitionError("partition_label_skew_two: class " +
                                 std::to_string(c) + " has " +
                                 std::to_string(rows.size()) +
                                 " samples for " + std::to_string(who.size()) +
                                 " clients");
        }
        rng.shuffle(rows);
        // contiguous chunks differing by at most one sample
        const std::size_t base = rows.size() / who.size();
        std::size_t extra = rows.size() % who.size();
        std::size_t at = 0;
        for (int k : who) {
            std::size_t take = base + (extra > 0 ? 1 : 0);
            if (extra > 0) {
                --extra;
            }
            auto& dst = shard_rows[static_cast<std::size_t>(k)];
            dst.insert(dst.end(), rows.begin() + static_cast<std::ptrdiff_t>(at),
                       rows.begin() + static_cast<std::ptrdiff_t>(at + take));
            at += take;
        }
    }
    return assemble(data, reserves, shard_rows, leftover);
}

void export_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("export_csv: cannot open " + path);
    }
    out << "sample_id,label";
    for (int j = 0; j < data.features(); ++j) {
        out << ",f" << j;
    }
    out << '\n';
    for (int i = 0; i < data.size(); ++i) {
        out << data.ids[static_cast<std::size_t>(i)] << ','
            << data.y[static_cast<std::size_t>(i)];
        char buf[32];
        for (int j = 0; j < data.features(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.10g", data.x(i, j));
            out << ',' << buf;
        }
        out << '\n';
    }
}

}  // namespace aflora
