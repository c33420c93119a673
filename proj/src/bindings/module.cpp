#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <stdexcept>
#include <vector>

#include "aflora/baselines.hpp"
#include "aflora/errors.hpp"
#include "aflora/harness.hpp"
#include "aflora/linalg.hpp"
#include "json.hpp"

namespace py = pybind11;

namespace {

using DenseArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

aflora::Matrix as_matrix(const DenseArray& arr) {
    if (arr.ndim() != 2) {
        throw std::invalid_argument("expected a 2-D float array");
    }
    const int rows = static_cast<int>(arr.shape(0));
    const int cols = static_cast<int>(arr.shape(1));
    std::vector<double> data(static_cast<std::size_t>(rows) *
                             static_cast<std::size_t>(cols));
    std::memcpy(data.data(), arr.data(), data.size() * sizeof(double));
    return aflora::Matrix(rows, cols, std::move(data));
}

py::array_t<double> as_array(const aflora::Matrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    std::memcpy(out.mutable_data(), m.data().data(),
                m.data().size() * sizeof(double));
    return out;
}

py::dict row_to_dict(const aflora::RoundMetrics& row) {
    py::dict d;
    d["round"] = row.round;
    d["accuracy"] = row.test_accuracy;
    d["r_eff"] = row.per_client_r_eff;
    d["trained_ratio"] = row.trained_param_ratio;
    d["comm_ratio"] = row.communicated_param_ratio;
    d["interference"] = row.interference_fnorm;
    d["wall_time_s"] = row.wall_time_s;
    return d;
}

std::string default_config_text() {
    const aflora::ExperimentConfig cfg;
    nlohmann::json doc;
    doc["method"] = aflora::method_name(cfg.method);
    doc["seed"] = cfg.seed;
    doc["rounds"] = cfg.rounds;
    doc["clients"] = cfg.clients;
    doc["rank_caps"] = cfg.rank_caps;
    doc["participation"] = cfg.participation;
    doc["partition"] = {{"mode", aflora::partition_name(cfg.partition)},
                        {"epsilon", cfg.epsilon}};
    doc["data"] = {{"features", cfg.data.features},
                   {"classes", cfg.data.classes},
                   {"samples_per_class", cfg.data.samples_per_class},
                   {"noise_std", cfg.data.noise_std},
                   {"mean_scale", cfg.data.mean_scale}};
    doc["hyper"] = {{"C", cfg.hyper.c},
                    {"beta", cfg.hyper.beta},
                    {"gamma", cfg.hyper.gamma},
                    {"alpha", cfg.hyper.alpha},
                    {"lambda_init", cfg.hyper.lambda_init}};
    doc["train"] = {{"local_epochs", cfg.train.local_epochs},
                    {"lr", cfg.train.lr},
                    {"batch_size", cfg.train.batch_size},
                    {"server_epochs", cfg.train.server_epochs},
                    {"server_lr", cfg.train.server_lr}};
    doc["prune_floor"] = cfg.prune_floor;
    doc["threads"] = cfg.threads;
    return doc.dump(2) + "\n";
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "federated LoRA fine-tuning simulator";

    // translators run newest-first: register the base before the derived so
    // ConfigError is not swallowed by the catch-all
    py::register_exception<aflora::Error>(m, "SimulatorError",
                                          PyExc_RuntimeError);
    py::register_exception<aflora::ConfigError>(m, "ConfigError",
                                                PyExc_ValueError);

    m.def(
        "matmul",
        [](const DenseArray& a, const DenseArray& b) {
            return as_array(aflora::matmul(as_matrix(a), as_matrix(b)));
        },
        py::arg("a"), py::arg("b"), "dense product of two 2-D arrays");

    m.def(
        "transpose",
        [](const DenseArray& a) {
            return as_array(aflora::transpose(as_matrix(a)));
        },
        py::arg("a"));

    m.def(
        "frobenius_norm",
        [](const DenseArray& a) { return aflora::frobenius_norm(as_matrix(a)); },
        py::arg("a"));

    m.def(
        "svd",
        [](const DenseArray& a) {
            const aflora::SvdResult r = aflora::svd(as_matrix(a));
            return py::make_tuple(as_array(r.u), r.sigma, as_array(r.v));
        },
        py::arg("a"), "thin SVD: returns (U, singular values, V)");

    m.def(
        "interference_gap",
        [](const std::vector<std::tuple<DenseArray, DenseArray, int>>& ups) {
            std::vector<aflora::HomAdapterUpdate> updates;
            updates.reserve(ups.size());
            for (const auto& [a, b, count] : ups) {
                aflora::HomAdapterUpdate u;
                u.a = as_matrix(a);
                u.b = as_matrix(b);
                u.data_count = count;
                updates.push_back(std::move(u));
            }
            return aflora::interference_gap(updates);
        },
        py::arg("updates"),
        "Frobenius gap between averaged-factor and averaged-product "
        "aggregation; updates are (A, B, sample_count) triples");

    m.def(
        "run_experiment",
        [](const std::string& config_json) {
            const aflora::ExperimentConfig cfg =
                aflora::config_from_json_text(config_json);
            py::list rows;
            for (const aflora::RoundMetrics& row : aflora::run_experiment(cfg)) {
                rows.append(row_to_dict(row));
            }
            return rows;
        },
        py::arg("config_json"),
        "run one experiment from a JSON config string; returns one dict per "
        "round, the first for the untouched backbone");

    m.def(
        "run_csv",
        [](const std::string& config_json) {
            const aflora::ExperimentConfig cfg =
                aflora::config_from_json_text(config_json);
            return aflora::csv_header() +
                   aflora::csv_rows(aflora::method_name(cfg.method),
                                    aflora::run_experiment(cfg));
        },
        py::arg("config_json"),
        "run one experiment and return the CSV report text");

    m.def("default_config", &default_config_text,
          "JSON text with every config key at its default value");

    m.def("methods", [] {
        return std::vector<std::string>{"aflora",   "classic",  "ideal",
                                        "flora",    "flexlora", "hetlora"};
    });
}
