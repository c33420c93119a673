#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "aflora/adapter.hpp"
#include "aflora/baselines.hpp"
#include "aflora/dataset.hpp"
#include "aflora/matrix.hpp"
#include "aflora/model.hpp"
#include "aflora/rng.hpp"

namespace aflora {

/// Aggregation scheme driven by the round loop. kIdeal is the oracle every
/// exactness claim is measured against; the rest are the published schemes.
enum class Method { kAflora, kClassic, kIdeal, kFlora, kFlexlora, kHetlora };

/// Throws ConfigError on an unknown name.
Method method_from_string(const std::string& name);
std::string method_name(Method method);

enum class PartitionMode { kIid, kNonIid, kLabelSkewTwo };

PartitionMode partition_from_string(const std::string& name);
std::string partition_name(PartitionMode mode);

/// Synthetic task dimensions. The backbone layer is classes × features, so
/// these also bound the admissible adapter ranks.
struct DataConfig {
    int features = 64;
    int classes = 64;
    int samples_per_class = 250;
    double noise_std = 0.5;
    double mean_scale = 3.0;
};

struct TrainConfig {
    int local_epochs = 1;
    double lr = 0.05;
    int batch_size = 32;
    int server_epochs = 1;
    double server_lr = 0.05;
};

/// One experiment, fully specified. Defaults reproduce the reference setup:
/// ten clients with rank caps 64..4, one fifth participating per round.
struct ExperimentConfig {
    Method method = Method::kAflora;
    std::uint64_t seed = 1;
    int rounds = 10;
    int clients = 10;
    std::vector<int> rank_caps = {64, 32, 16, 16, 8, 8, 4, 4, 4, 4};
    double participation = 0.2;
    PartitionMode partition = PartitionMode::kNonIid;
    // dominant-class share is (1-epsilon); with 64 classes and 10 clients the
    // per-class pool supports at most ~0.156, so the default skew stays mild
    double epsilon = 0.9;
    DataConfig data;
    LoraHyper hyper;  // m, n, r_max are derived, see filled_hyper()
    TrainConfig train;
    bool prune_floor = true;
    int threads = 1;
    std::string csv_path;  // empty: no CSV
    std::string dump_dir;  // empty: no per-round JSON dumps

    /// The run-ready hyper block: m = classes, n = features,
    /// r_max = max rank cap.
    LoraHyper filled_hyper() const;

    /// Throws ConfigError (RankMismatchError for classic with heterogeneous
    /// caps) before any work starts.
    void validate() const;
};

/// Parse a JSON config file / text. Unknown keys are rejected so typos
/// cannot silently fall back to defaults. Missing keys keep defaults.
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig config_from_json(const std::string& path);

/// Everything measured after one round's fold. wall_time_s never feeds the
/// CSV, so reports stay byte-reproducible.
struct RoundMetrics {
    int round = 0;
    double test_accuracy = 0.0;
    std::vector<int> per_client_r_eff;  // participants, ascending client id
    double trained_param_ratio = 0.0;
    double communicated_param_ratio = 0.0;
    double interference_fnorm = 0.0;  // NaN when not applicable
    double wall_time_s = 0.0;
};

/// Per-round JSON dump payload.
struct RoundDump {
    int round = 0;
    std::vector<double> weights;  // aggregation weights, update order
    std::vector<int> r_eff;       // participant ranks, update order
    double delta_fnorm = 0.0;
    double accuracy = 0.0;
};

struct RunResult {
    std::vector<RoundMetrics> metrics;  // metrics[0] is the pre-round row
    std::vector<RoundDump> dumps;       // training rounds only
    std::vector<Matrix> round_deltas;   // ΔW folded each round
    Matrix final_w;
};

struct CostRatios {
    double trained = 0.0;
    double communicated = 0.0;
};

/// Parameter-count ratios against the m·n backbone, averaged over rounds
/// and participants. Decoupled clients train m·r + r values and upload m·r;
/// two-factor baselines train and upload (m+n)·r.
CostRatios cost_ratios(Method method,
                       const std::vector<std::vector<int>>& per_round_ranks,
                       int m, int n);

/// ‖(Σp_k·B_k)(Σp_k·A_k) − Σp_k·B_kA_k‖_F with data-proportional p.
/// NaN when ranks differ or the roster is empty (gap undefined).
double interference_gap(const std::vector<HomAdapterUpdate>& updates);

/// Toy local trainer shared by every baseline: B starts at zero, both
/// factors train (no gate, no b-norm regularizer).
HomAdapterUpdate baseline_local_round(const Matrix& a_start,
                                      const Dataset& shard,
                                      const ToyModel& model, int epochs,
                                      double lr, int batch_size, Rng rng);

/// The full federated loop: generate + partition data, init globals, then
/// per round sample participants, train, aggregate, (aflora) tune and fuse
/// A, fold ΔW, measure. Deterministic per (config, seed).
RunResult run_experiment_full(const ExperimentConfig& cfg);
std::vector<RoundMetrics> run_experiment(const ExperimentConfig& cfg);

/// CSV report. Header is fixed; one row per RoundMetrics entry; floats with
/// ten significant digits; NaN prints as "nan".
std::string csv_header();
std::string csv_rows(const std::string& method,
                     const std::vector<RoundMetrics>& rows);

void write_text_file(const std::string& path, const std::string& text);

/// round_NNNN.json files under dir (created if missing).
void write_round_dumps(const std::string& dir,
                       const std::vector<RoundDump>& dumps);

}  // namespace aflora
