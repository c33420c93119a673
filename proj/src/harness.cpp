#include "aflora/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "aflora/client.hpp"
#include "aflora/errors.hpp"
#include "aflora/linalg.hpp"
#include "aflora/server.hpp"
#include "json.hpp"

namespace aflora {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Deterministic fan-out: slot i is always produced by fn(i), workers just
// pull indices, so thread count and completion order cannot change results.
void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int workers = std::min(threads, count);
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_lock;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                if (failed.load()) {
                    return;
                }
                try {
                    fn(i);
                } catch (...) {
                    const std::lock_guard<std::mutex> hold(error_lock);
                    if (!first_error) {
                        first_error = std::current_exception();
                    }
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (std::thread& t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

Method method_from_string(const std::string& name) {
    if (name == "aflora") return Method::kAflora;
    if (name == "classic") return Method::kClassic;
    if (name == "ideal") return Method::kIdeal;
    if (name == "flora") return Method::kFlora;
    if (name == "flexlora") return Method::kFlexlora;
    if (name == "hetlora") return Method::kHetlora;
    throw ConfigError("unknown method '" + name +
                      "' (expected aflora, classic, ideal, flora, flexlora "
                      "or hetlora)");
}

std::string method_name(Method method) {
    switch (method) {
        case Method::kAflora: return "aflora";
        case Method::kClassic: return "classic";
        case Method::kIdeal: return "ideal";
        case Method::kFlora: return "flora";
        case Method::kFlexlora: return "flexlora";
        case Method::kHetlora: return "hetlora";
    }
    throw DomainError("method_name: invalid enum value");
}

PartitionMode partition_from_string(const std::string& name) {
    if (name == "iid") return PartitionMode::kIid;
    if (name == "noniid") return PartitionMode::kNonIid;
    if (name == "label_skew_2") return PartitionMode::kLabelSkewTwo;
    throw ConfigError("unknown partition mode '" + name +
                      "' (expected iid, noniid or label_skew_2)");
}

std::string partition_name(PartitionMode mode) {
    switch (mode) {
        case PartitionMode::kIid: return "iid";
        case PartitionMode::kNonIid: return "noniid";
        case PartitionMode::kLabelSkewTwo: return "label_skew_2";
    }
    throw DomainError("partition_name: invalid enum value");
}

LoraHyper ExperimentConfig::filled_hyper() const {
    LoraHyper h = hyper;
    h.m = data.classes;
    h.n = data.features;
    h.r_max = rank_caps.empty()
                  ? 0
                  : *std::max_element(rank_caps.begin(), rank_caps.end());
    return h;
}

void ExperimentConfig::validate() const {
    if (clients < 1) {
        throw ConfigError("config: clients must be >= 1, got " +
                          std::to_string(clients));
    }
    if (static_cast<int>(rank_caps.size()) != clients) {
        throw ConfigError("config: rank_caps has " +
                          std::to_string(rank_caps.size()) + " entries for " +
                          std::to_string(clients) + " clients");
    }
    const int bound = std::min(data.classes, data.features);
    for (int cap : rank_caps) {
        if (cap < 1 || cap > bound) {
            throw ConfigError("config: rank cap " + std::to_string(cap) +
                              " outside [1, min(classes, features) = " +
                              std::to_string(bound) + "]");
        }
    }
    if (!(participation > 0.0 && participation <= 1.0)) {
        throw ConfigError("config: participation must lie in (0, 1]");
    }
    if (participation * clients < 1.0 - 1e-9) {
        throw ConfigError(
            "config: participation * clients < 1, no round could run");
    }
    if (rounds < 0) {
        throw ConfigError("config: rounds must be >= 0");
    }
    if (threads < 1) {
        throw ConfigError("config: threads must be >= 1");
    }
    if (partition == PartitionMode::kNonIid &&
        !(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw ConfigError("config: epsilon must lie in [0, 1]");
    }
    if (data.features < 1 || data.classes < 2 || data.samples_per_class < 1) {
        throw ConfigError("config: data block needs features >= 1, "
                          "classes >= 2, samples_per_class >= 1");
    }
    if (!(data.noise_std >= 0.0) || !(data.mean_scale > 0.0)) {
        throw ConfigError("config: noise_std must be >= 0 and mean_scale > 0");
    }
    if (train.local_epochs < 0 || train.server_epochs < 0) {
        throw ConfigError("config: epoch counts must be >= 0");
    }
    if (!(train.lr > 0.0) || !(train.server_lr > 0.0)) {
        throw ConfigError("config: learning rates must be positive");
    }
    if (train.batch_size < 1) {
        throw ConfigError("config: batch_size must be >= 1");
    }
    filled_hyper().validate();
    if (method == Method::kClassic) {
        for (int cap : rank_caps) {
            if (cap != rank_caps.front()) {
                throw RankMismatchError(
                    "config: classic aggregation needs one shared rank cap, "
                    "got " + std::to_string(rank_caps.front()) + " and " +
                    std::to_string(cap));
            }
        }
    }
}

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const char* where,
                         std::initializer_list<const char*> known) {
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* k : known) {
            ok = ok || item.key() == k;
        }
        if (!ok) {
            throw ConfigError(std::string("config: unknown key '") +
                              item.key() + "' in " + where);
        }
    }
}

template <typename T>
void read_into(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) {
        try {
            out = obj.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(std::string("config: key '") + key +
                              "' has the wrong type");
        }
    }
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!root.is_object()) {
        throw ConfigError("config: top level must be a JSON object");
    }
    reject_unknown_keys(root, "top level",
                        {"method", "seed", "rounds", "clients", "rank_caps",
                         "participation", "partition", "data", "hyper",
                         "train", "prune_floor", "threads", "output"});
    ExperimentConfig cfg;
    if (root.contains("method")) {
        cfg.method = method_from_string(root.at("method").get<std::string>());
    }
    read_into(root, "seed", cfg.seed);
    read_into(root, "rounds", cfg.rounds);
    read_into(root, "clients", cfg.clients);
    read_into(root, "rank_caps", cfg.rank_caps);
    read_into(root, "participation", cfg.participation);
    if (root.contains("partition")) {
        const json& part = root.at("partition");
        if (!part.is_object()) {
            throw ConfigError("config: 'partition' must be an object");
        }
        reject_unknown_keys(part, "partition", {"mode", "epsilon"});
        if (part.contains("mode")) {
            cfg.partition =
                partition_from_string(part.at("mode").get<std::string>());
        }
        read_into(part, "epsilon", cfg.epsilon);
    }
    if (root.contains("data")) {
        const json& d = root.at("data");
        if (!d.is_object()) {
            throw ConfigError("config: 'data' must be an object");
        }
        reject_unknown_keys(d, "data",
                            {"features", "classes", "samples_per_class",
                             "noise_std", "mean_scale"});
        read_into(d, "features", cfg.data.features);
        read_into(d, "classes", cfg.data.classes);
        read_into(d, "samples_per_class", cfg.data.samples_per_class);
        read_into(d, "noise_std", cfg.data.noise_std);
        read_into(d, "mean_scale", cfg.data.mean_scale);
    }
    if (root.contains("hyper")) {
        const json& h = root.at("hyper");
        if (!h.is_object()) {
            throw ConfigError("config: 'hyper' must be an object");
        }
        reject_unknown_keys(h, "hyper",
                            {"C", "beta", "gamma", "alpha", "lambda_init"});
        read_into(h, "C", cfg.hyper.c);
        read_into(h, "beta", cfg.hyper.beta);
        read_into(h, "gamma", cfg.hyper.gamma);
        read_into(h, "alpha", cfg.hyper.alpha);
        read_into(h, "lambda_init", cfg.hyper.lambda_init);
    }
    if (root.contains("train")) {
        const json& t = root.at("train");
        if (!t.is_object()) {
            throw ConfigError("config: 'train' must be an object");
        }
        reject_unknown_keys(t, "train",
                            {"local_epochs", "lr", "batch_size",
                             "server_epochs", "server_lr"});
        read_into(t, "local_epochs", cfg.train.local_epochs);
        read_into(t, "lr", cfg.train.lr);
        read_into(t, "batch_size", cfg.train.batch_size);
        read_into(t, "server_epochs", cfg.train.server_epochs);
        read_into(t, "server_lr", cfg.train.server_lr);
    }
    read_into(root, "prune_floor", cfg.prune_floor);
    read_into(root, "threads", cfg.threads);
    if (root.contains("output")) {
        const json& o = root.at("output");
        if (!o.is_object()) {
            throw ConfigError("config: 'output' must be an object");
        }
        reject_unknown_keys(o, "output", {"csv", "dump_rounds"});
        read_into(o, "csv", cfg.csv_path);
        read_into(o, "dump_rounds", cfg.dump_dir);
    }
    return cfg;
}

ExperimentConfig config_from_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json_text(buf.str());
}

CostRatios cost_ratios(Method method,
                       const std::vector<std::vector<int>>& per_round_ranks,
                       int m, int n) {
    if (per_round_ranks.empty()) {
        return {};
    }
    const double backbone = static_cast<double>(m) * n;
    CostRatios total;
    for (const std::vector<int>& ranks : per_round_ranks) {
        CostRatios round;
        for (int r : ranks) {
            if (method == Method::kAflora) {
                round.trained += (static_cast<double>(m) * r + r) / backbone;
                round.communicated += static_cast<double>(m) * r / backbone;
            } else {
                const double both =
                    static_cast<double>(m + n) * r / backbone;
                round.trained += both;
                round.communicated += both;
            }
        }
        if (!ranks.empty()) {
            round.trained /= static_cast<double>(ranks.size());
            round.communicated /= static_cast<double>(ranks.size());
        }
        total.trained += round.trained;
        total.communicated += round.communicated;
    }
    total.trained /= static_cast<double>(per_round_ranks.size());
    total.communicated /= static_cast<double>(per_round_ranks.size());
    return total;
}

double interference_gap(const std::vector<HomAdapterUpdate>& updates) {
    if (updates.empty()) {
        return kNan;
    }
    const int r = updates.front().a.rows();
    double total = 0.0;
    for (const HomAdapterUpdate& u : updates) {
        if (u.a.rows() != r) {
            return kNan;  // undefined across ranks
        }
        total += u.data_count;
    }
    if (total <= 0.0) {
        return kNan;
    }
    const auto [a_avg, b_avg] = classic_aggregate(updates);
    std::vector<WeightedDelta> deltas;
    deltas.reserve(updates.size());
    for (const HomAdapterUpdate& u : updates) {
        deltas.push_back({matmul(u.b, u.a), u.data_count});
    }
    const Matrix gap =
        add_scaled(matmul(b_avg, a_avg), ideal_aggregate(deltas), -1.0);
    return frobenius_norm(gap);
}

HomAdapterUpdate baseline_local_round(const Matrix& a_start,
                                      const Dataset& shard,
                                      const ToyModel& model, int epochs,
                                      double lr, int batch_size, Rng rng) {
    if (shard.size() == 0) {
        throw DataError("baseline_local_round: empty shard");
    }
    if (batch_size < 1) {
        throw ConfigError("baseline_local_round: batch_size must be positive");
    }
    const int r = a_start.rows();
    DecoupledAdapter ad;
    ad.a_slice = a_start;
    ad.b = Matrix(model.w_base.rows(), r);
    ad.lambda.assign(static_cast<std::size_t>(r), 1.0);
    ad.mask.assign(static_cast<std::size_t>(r), 1);
    ad.r_initial = r;

    std::vector<int> order(static_cast<std::size_t>(shard.size()));
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (int at = 0; at < shard.size(); at += batch_size) {
            const int end = std::min(at + batch_size, shard.size());
            const std::vector<int> rows(order.begin() + at, order.begin() + end);
            const Dataset batch = shard.subset(rows);
            const GradientSet grads = backward(model, ad, batch, 0.0, Wrt::kFull);
            accumulate(ad.b, grads.grad_b, -lr);
            accumulate(ad.a_slice, grads.grad_a, -lr);
        }
    }
    HomAdapterUpdate up;
    up.a = std::move(ad.a_slice);
    up.b = std::move(ad.b);
    up.data_count = shard.size();
    return up;
}

namespace {

PartitionedDataset partition_for(const ExperimentConfig& cfg,
                                 const Dataset& data) {
    switch (cfg.partition) {
        case PartitionMode::kIid:
            return partition_iid(data, cfg.clients, cfg.seed);
        case PartitionMode::kNonIid:
            return partition_noniid(data, cfg.clients, cfg.epsilon, cfg.seed);
        case PartitionMode::kLabelSkewTwo:
            return partition_label_skew_two(data, cfg.clients, cfg.seed);
    }
    throw DomainError("partition_for: invalid enum value");
}

// Uniform draw of round participants without replacement; its stream
// depends only on (seed, round), so extending `rounds` never reshuffles
// earlier rounds.
std::vector<int> sample_participants(int clients, double participation,
                                     Rng rng) {
    const int want = std::clamp(
        static_cast<int>(std::llround(participation * clients)), 1, clients);
    std::vector<int> ids(static_cast<std::size_t>(clients));
    std::iota(ids.begin(), ids.end(), 0);
    for (int i = 0; i < want; ++i) {
        const int j =
            i + static_cast<int>(rng.uniform_int(
                    static_cast<std::uint64_t>(clients - i)));
        std::swap(ids[static_cast<std::size_t>(i)],
                  ids[static_cast<std::size_t>(j)]);
    }
    ids.resize(static_cast<std::size_t>(want));
    std::sort(ids.begin(), ids.end());
    return ids;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
}

RoundMetrics pre_round_entry(const Matrix& w_now, const Dataset& test,
                             int classes) {
    RoundMetrics row;
    row.round = 0;
    row.test_accuracy = predict_accuracy(ToyModel{w_now, classes},
                                         Matrix(w_now.rows(), w_now.cols()),
                                         test);
    row.interference_fnorm = kNan;
    return row;
}

RunResult run_aflora(const ExperimentConfig& cfg, const LoraHyper& hyper,
                     const PartitionedDataset& parts, const Rng& master) {
    const int m = hyper.m;
    const int n = hyper.n;
    Matrix w_now(m, n);
    GlobalState state =
        init_global_state(hyper, w_now, cfg.train.server_lr,
                          cfg.train.server_epochs, master.split(stream::kInit));

    std::vector<ClientState> clients(static_cast<std::size_t>(cfg.clients));
    for (int k = 0; k < cfg.clients; ++k) {
        ClientState& c = clients[static_cast<std::size_t>(k)];
        c.id = k;
        c.shard = parts.shards[static_cast<std::size_t>(k)];
        c.r_initial = cfg.rank_caps[static_cast<std::size_t>(k)];
        c.mask.assign(static_cast<std::size_t>(c.r_initial), 1);
        c.hyper = hyper;
        c.local_epochs = cfg.train.local_epochs;
        c.lr = cfg.train.lr;
        c.batch_size = cfg.train.batch_size;
        c.prune_floor = cfg.prune_floor;
    }

    RunResult result;
    result.metrics.push_back(
        pre_round_entry(w_now, parts.test_split, cfg.data.classes));

    for (int t = 1; t <= cfg.rounds; ++t) {
        const auto start = std::chrono::steady_clock::now();
        const std::vector<int> roster = sample_participants(
            cfg.clients, cfg.participation,
            master.split(stream::kParticipation, static_cast<std::uint64_t>(t)));
        const ToyModel model{w_now, cfg.data.classes};

        std::vector<std::optional<ClientUpdate>> slots(roster.size());
        parallel_for(
            static_cast<int>(roster.size()), cfg.threads, [&](int i) {
                const int k = roster[static_cast<std::size_t>(i)];
                slots[static_cast<std::size_t>(i)] = local_round(
                    clients[static_cast<std::size_t>(k)], state.a_global,
                    model,
                    master.split(stream::kClient, static_cast<std::uint64_t>(k),
                                 static_cast<std::uint64_t>(t)));
            });

        std::vector<ClientUpdate> updates;
        for (const auto& slot : slots) {
            if (slot.has_value()) {
                updates.push_back(*slot);
            }
        }
        bool any_mass = false;
        for (const ClientUpdate& u : updates) {
            any_mass = any_mass || (u.r_eff > 0 && u.data_count > 0);
        }

        Matrix dw(m, n);
        std::vector<double> weights;
        if (any_mass) {
            state.b_global = aggregate_b(updates, hyper.r_max);
            weights = rank_aware_weights(updates);
            const Matrix a_ft =
                server_finetune_a(state, parts.public_split, model);
            state.a_global = fuse_a(state.a_global, a_ft, hyper.alpha);
            dw = broadcast_and_fold(state);
        }
        accumulate(w_now, dw, 1.0);
        state.w_base = w_now;
        state.round = t;

        RoundMetrics row;
        row.round = t;
        row.test_accuracy =
            predict_accuracy(ToyModel{w_now, cfg.data.classes}, Matrix(m, n),
                             parts.test_split);
        for (const ClientUpdate& u : updates) {
            row.per_client_r_eff.push_back(u.r_eff);
        }
        const CostRatios ratios =
            cost_ratios(cfg.method, {row.per_client_r_eff}, m, n);
        row.trained_param_ratio = ratios.trained;
        row.communicated_param_ratio = ratios.communicated;
        row.interference_fnorm = kNan;  // decoupled updates do not interfere
        row.wall_time_s = seconds_since(start);
        result.metrics.push_back(row);

        RoundDump dump;
        dump.round = t;
        dump.weights = weights;
        dump.r_eff = row.per_client_r_eff;
        dump.delta_fnorm = frobenius_norm(dw);
        dump.accuracy = row.test_accuracy;
        result.dumps.push_back(dump);
        result.round_deltas.push_back(std::move(dw));
    }
    result.final_w = std::move(w_now);
    return result;
}

RunResult run_baseline(const ExperimentConfig& cfg, const LoraHyper& hyper,
                       const PartitionedDataset& parts, const Rng& master) {
    const int m = hyper.m;
    const int n = hyper.n;
    Matrix w_now(m, n);

    // The server seeds one shared A at the widest cap; every client starts
    // from its leading slice.
    Rng init_rng = master.split(stream::kBaselineInit);
    Matrix a_store = random_normal(hyper.r_max, n, init_rng);
    normalize_rows(a_store, hyper.c);
    std::vector<Matrix> a_current(static_cast<std::size_t>(cfg.clients));
    for (int k = 0; k < cfg.clients; ++k) {
        a_current[static_cast<std::size_t>(k)] = truncate_a(
            a_store, cfg.rank_caps[static_cast<std::size_t>(k)]);
    }

    RunResult result;
    result.metrics.push_back(
        pre_round_entry(w_now, parts.test_split, cfg.data.classes));

    for (int t = 1; t <= cfg.rounds; ++t) {
        const auto start = std::chrono::steady_clock::now();
        const std::vector<int> roster = sample_participants(
            cfg.clients, cfg.participation,
            master.split(stream::kParticipation, static_cast<std::uint64_t>(t)));
        const ToyModel model{w_now, cfg.data.classes};

        std::vector<int> trainable;
        for (int k : roster) {
            if (parts.shards[static_cast<std::size_t>(k)].size() > 0) {
                trainable.push_back(k);
            }
        }
        std::vector<HomAdapterUpdate> updates(trainable.size());
        parallel_for(
            static_cast<int>(trainable.size()), cfg.threads, [&](int i) {
                const int k = trainable[static_cast<std::size_t>(i)];
                Matrix a_start;
                if (cfg.method == Method::kFlora) {
                    // fresh random A every round, like the stacking scheme
                    // prescribes; clients never reuse a subspace
                    Rng a_rng = master.split(stream::kServer,
                                             static_cast<std::uint64_t>(t),
                                             static_cast<std::uint64_t>(k));
                    a_start = random_normal(
                        cfg.rank_caps[static_cast<std::size_t>(k)], n, a_rng);
                    normalize_rows(a_start, hyper.c);
                } else {
                    a_start = a_current[static_cast<std::size_t>(k)];
                }
                updates[static_cast<std::size_t>(i)] = baseline_local_round(
                    a_start, parts.shards[static_cast<std::size_t>(k)], model,
                    cfg.train.local_epochs, cfg.train.lr, cfg.train.batch_size,
                    master.split(stream::kClient, static_cast<std::uint64_t>(k),
                                 static_cast<std::uint64_t>(t)));
            });

        bool any_mass = false;
        for (const HomAdapterUpdate& u : updates) {
            any_mass = any_mass || u.data_count > 0;
        }

        Matrix dw(m, n);
        std::vector<double> weights;
        if (any_mass) {
            double total = 0.0;
            for (const HomAdapterUpdate& u : updates) {
                total += u.data_count;
            }
            for (const HomAdapterUpdate& u : updates) {
                weights.push_back(u.data_count / total);
            }

            std::vector<WeightedDelta> deltas;
            for (const HomAdapterUpdate& u : updates) {
                deltas.push_back({matmul(u.b, u.a), u.data_count});
            }
            switch (cfg.method) {
                case Method::kClassic: {
                    const auto [a_avg, b_avg] = classic_aggregate(updates);
                    dw = matmul(b_avg, a_avg);
                    for (int k = 0; k < cfg.clients; ++k) {
                        a_current[static_cast<std::size_t>(k)] = a_avg;
                    }
                    break;
                }
                case Method::kIdeal: {
                    dw = ideal_aggregate(deltas);
                    // exact aggregation prescribes no redistribution; each
                    // participant keeps its own trained subspace
                    for (std::size_t i = 0; i < trainable.size(); ++i) {
                        a_current[static_cast<std::size_t>(trainable[i])] =
                            updates[i].a;
                    }
                    break;
                }
                case Method::kFlora: {
                    dw = flora_aggregate(updates);
                    break;
                }
                case Method::kFlexlora: {
                    dw = ideal_aggregate(deltas);
                    const auto pairs =
                        flexlora_aggregate(updates, cfg.rank_caps);
                    for (int k = 0; k < cfg.clients; ++k) {
                        a_current[static_cast<std::size_t>(k)] =
                            pairs[static_cast<std::size_t>(k)].first;
                    }
                    break;
                }
                case Method::kHetlora: {
                    const auto [a_pad, b_pad] = hetlora_aggregate(updates);
                    dw = matmul(b_pad, a_pad);
                    // rows beyond this round's widest participant keep
                    // their previous values; nobody sent an update there
                    for (int i = 0; i < a_pad.rows(); ++i) {
                        for (int j = 0; j < n; ++j) {
                            a_store(i, j) = a_pad(i, j);
                        }
                    }
                    for (int k = 0; k < cfg.clients; ++k) {
                        a_current[static_cast<std::size_t>(k)] = truncate_a(
                            a_store, cfg.rank_caps[static_cast<std::size_t>(k)]);
                    }
                    break;
                }
                case Method::kAflora:
                    throw DomainError("run_baseline: aflora routed here");
            }
        }
        accumulate(w_now, dw, 1.0);

        RoundMetrics row;
        row.round = t;
        row.test_accuracy =
            predict_accuracy(ToyModel{w_now, cfg.data.classes}, Matrix(m, n),
                             parts.test_split);
        for (const HomAdapterUpdate& u : updates) {
            row.per_client_r_eff.push_back(u.a.rows());
        }
        const CostRatios ratios =
            cost_ratios(cfg.method, {row.per_client_r_eff}, m, n);
        row.trained_param_ratio = ratios.trained;
        row.communicated_param_ratio = ratios.communicated;
        row.interference_fnorm =
            updates.empty() ? kNan : interference_gap(updates);
        row.wall_time_s = seconds_since(start);
        result.metrics.push_back(row);

        RoundDump dump;
        dump.round = t;
        dump.weights = weights;
        dump.r_eff = row.per_client_r_eff;
        dump.delta_fnorm = frobenius_norm(dw);
        dump.accuracy = row.test_accuracy;
        result.dumps.push_back(dump);
        result.round_deltas.push_back(std::move(dw));
    }
    result.final_w = std::move(w_now);
    return result;
}

}  // namespace

RunResult run_experiment_full(const ExperimentConfig& cfg) {
    cfg.validate();
    const LoraHyper hyper = cfg.filled_hyper();
    const Rng master(cfg.seed);

    SyntheticTask task;
    task.n = cfg.data.features;
    task.num_classes = cfg.data.classes;
    task.samples_per_class = cfg.data.samples_per_class;
    task.class_means = default_class_means(cfg.data.classes, cfg.data.features,
                                           cfg.data.mean_scale, cfg.seed);
    task.noise_std = cfg.data.noise_std;
    task.seed = cfg.seed;
    const Dataset data = generate(task);
    const PartitionedDataset parts = partition_for(cfg, data);

    if (cfg.method == Method::kAflora) {
        return run_aflora(cfg, hyper, parts, master);
    }
    return run_baseline(cfg, hyper, parts, master);
}

std::vector<RoundMetrics> run_experiment(const ExperimentConfig& cfg) {
    return run_experiment_full(cfg).metrics;
}

std::string csv_header() {
    return "round,method,accuracy,trained_ratio,comm_ratio,interference,"
           "mean_r_eff\n";
}

std::string csv_rows(const std::string& method,
                     const std::vector<RoundMetrics>& rows) {
    std::string out;
    for (const RoundMetrics& row : rows) {
        double mean_r = kNan;
        if (!row.per_client_r_eff.empty()) {
            double sum = 0.0;
            for (int r : row.per_client_r_eff) {
                sum += r;
            }
            mean_r = sum / static_cast<double>(row.per_client_r_eff.size());
        }
        out += std::to_string(row.round);
        out += ',';
        out += method;
        out += ',';
        out += format_double(row.test_accuracy);
        out += ',';
        out += format_double(row.trained_param_ratio);
        out += ',';
        out += format_double(row.communicated_param_ratio);
        out += ',';
        out += format_double(row.interference_fnorm);
        out += ',';
        out += format_double(mean_r);
        out += '\n';
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    std::error_code ec;
    if (p.has_parent_path()) {
        std::filesystem::create_directories(p.parent_path(), ec);
        if (ec) {
            throw ConfigError("cannot create directory '" +
                              p.parent_path().string() + "': " + ec.message());
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot open output file '" + path + "'");
    }
    out << text;
    out.flush();
    if (!out) {
        throw ConfigError("failed writing output file '" + path + "'");
    }
}

void write_round_dumps(const std::string& dir,
                       const std::vector<RoundDump>& dumps) {
    std::filesystem::create_directories(dir);
    for (const RoundDump& dump : dumps) {
        nlohmann::json doc;
        doc["round"] = dump.round;
        doc["weights"] = dump.weights;
        doc["r_eff"] = dump.r_eff;
        doc["delta_fnorm"] = dump.delta_fnorm;
        doc["accuracy"] = dump.accuracy;
        char name[32];
        std::snprintf(name, sizeof(name), "round_%04d.json", dump.round);
        write_text_file((std::filesystem::path(dir) / name).string(),
                        doc.dump(2) + "\n");
    }
}

}  // namespace aflora
