#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sharplab/dataset.hpp"
#include "sharplab/diagnostics.hpp"
#include "sharplab/error.hpp"
#include "sharplab/harness.hpp"
#include "sharplab/sam.hpp"
#include "sharplab/sampler.hpp"

namespace py = pybind11;
using namespace sharplab;

namespace {

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ConfigError("matrix must be non-empty");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) throw ConfigError("ragged matrix");
        for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
    }
    return m;
}

std::vector<std::vector<double>> from_matrix(const Matrix& m) {
    std::vector<std::vector<double>> rows(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) rows[r][c] = m(r, c);
    return rows;
}

Batch make_batch(const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
    Batch b;
    if (x.empty()) return b;
    b.dim = x.front().size();
    for (std::size_t r = 0; r < x.size(); ++r) {
        if (x[r].size() != b.dim) throw ConfigError("ragged inputs");
        b.inputs.insert(b.inputs.end(), x[r].begin(), x[r].end());
        b.indices.push_back(r);
    }
    b.targets = y;
    b.validate();
    return b;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "sharpness-aware optimization lab";

    static py::exception<Error> error(m, "Error");
    static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
    static py::exception<NumericError> numeric_error(m, "NumericError", error.ptr());
    static py::exception<ContractError> contract_error(m, "ContractError", error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            py::set_error(config_error, e.what());
        } catch (const NumericError& e) {
            py::set_error(numeric_error, e.what());
        } catch (const ContractError& e) {
            py::set_error(contract_error, e.what());
        } catch (const Error& e) {
            py::set_error(error, e.what());
        }
    });

    py::class_<ObjectiveSpec>(m, "Objective")
        .def_property_readonly("kind", [](const ObjectiveSpec& s) { return to_string(s.kind()); })
        .def_property_readonly("parameter_count", &ObjectiveSpec::parameter_count)
        .def_property_readonly("segments", [](const ObjectiveSpec& s) {
            std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
            for (const auto& seg : s.layout()) out.emplace_back(seg.name, seg.start, seg.length);
            return out;
        });

    m.def("quadratic", [](const std::vector<std::vector<double>>& a, std::vector<double> b, double wd) {
        return make_quadratic(to_matrix(a), std::move(b), wd);
    }, py::arg("a"), py::arg("b"), py::arg("weight_decay") = 0.0);
    m.def("rosenbrock", &make_rosenbrock, py::arg("dim") = 2, py::arg("a") = 1.0, py::arg("b") = 100.0,
          py::arg("weight_decay") = 0.0);
    m.def("sharp_flat", &make_sharp_flat, py::arg("width_sharp") = 0.15, py::arg("width_flat") = 1.0,
          py::arg("depth_gap") = 0.1, py::arg("separation") = 1.5);
    m.def("mlp", [](std::vector<std::size_t> widths, const std::string& act, double wd) {
        return make_mlp(std::move(widths), parse_activation(act), wd);
    }, py::arg("widths"), py::arg("activation") = "tanh", py::arg("weight_decay") = 0.0);

    m.def("init_params", [](const ObjectiveSpec& s, std::uint64_t seed) {
        const auto p = init_params(s, seed);
        return std::vector<double>(p.values().begin(), p.values().end());
    }, py::arg("objective"), py::arg("seed"));

    m.def("loss", [](const ObjectiveSpec& s, const std::vector<double>& w, const std::vector<std::vector<double>>& x,
                     const std::vector<int>& y) { return eval_loss(s, w, make_batch(x, y)); },
          py::arg("objective"), py::arg("w"), py::arg("x") = std::vector<std::vector<double>>{},
          py::arg("y") = std::vector<int>{});
    m.def("grad", [](const ObjectiveSpec& s, const std::vector<double>& w, const std::vector<std::vector<double>>& x,
                     const std::vector<int>& y) {
        auto r = eval_grad(s, w, make_batch(x, y));
        return py::make_tuple(r.loss, r.grad);
    }, py::arg("objective"), py::arg("w"), py::arg("x") = std::vector<std::vector<double>>{},
          py::arg("y") = std::vector<int>{});

    m.def("sam_gradient", [](const ObjectiveSpec& s, const std::vector<double>& w, double rho,
                             const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
        const auto t = sam_gradient(s, ParamVector(w, s.layout()), make_batch(x, y), rho);
        py::dict d;
        d["loss"] = t.loss;
        d["g_sgd"] = t.g_sgd;
        d["g_sam"] = t.g_sam;
        d["psf"] = t.psf;
        d["l2_sgd"] = t.l2_sgd;
        d["l2_psf"] = t.l2_psf;
        return d;
    }, py::arg("objective"), py::arg("w"), py::arg("rho"), py::arg("x") = std::vector<std::vector<double>>{},
          py::arg("y") = std::vector<int>{});
    m.def("perturbation", [](const std::vector<double>& g, double rho) { return perturbation(g, rho); });

    m.def("sliced_variance", [](const std::vector<double>& v, std::size_t slices) {
        const auto r = sliced_variance(v, slices);
        return py::make_tuple(r.value, r.fallback);
    });
    m.def("change_rate_series", [](const std::vector<double>& h, double eps) { return change_rate_series(h, eps); },
          py::arg("history"), py::arg("eps") = 1e-12);
    m.def("next_budget", &next_budget, py::arg("s"), py::arg("c_var"), py::arg("c_norm"), py::arg("alpha"),
          py::arg("s_max"));

    m.def("symmetric_eigen", [](const std::vector<std::vector<double>>& a) {
        const auto e = symmetric_eigen(to_matrix(a));
        return py::make_tuple(e.eigenvalues, from_matrix(e.eigenvectors));
    });
    m.def("psf_bound_check", [](const std::vector<std::vector<double>>& a, const std::vector<double>& g, double rho) {
        const auto r = psf_bound_check(to_matrix(a), g, rho);
        return py::make_tuple(r.lhs, r.rhs, r.satisfied);
    });

    m.def("compute_ais", &compute_ais, py::arg("examples_per_epoch"), py::arg("epochs"), py::arg("seconds"));

    m.def("generate_dataset", [](const std::string& kind, std::size_t n, double noise, std::uint64_t seed) {
        const auto d = generate_dataset(parse_dataset_kind(kind), n, noise, seed);
        std::vector<std::vector<double>> x(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) x[i].assign(d.row(i).begin(), d.row(i).end());
        return py::make_tuple(x, d.targets, dataset_checksum(d));
    }, py::arg("kind"), py::arg("n"), py::arg("noise"), py::arg("seed"));

    m.def("run_experiment", [](const std::string& config_json) {
        const auto r = run_experiment(parse_config(nlohmann::json::parse(config_json)));
        py::list out;
        for (const auto& s : r.summaries) {
            py::dict d;
            d["method"] = s.method;
            d["seed"] = s.seed;
            d["iterations"] = s.iterations;
            d["sampling_number"] = s.sampling_number;
            d["grad_evals"] = s.grad_evals;
            d["final_accuracy"] = s.final_accuracy;
            d["final_train_loss"] = s.final_train_loss;
            out.append(d);
        }
        return py::make_tuple(r.directory, out);
    }, py::arg("config_json"), "Runs every seed of a JSON config; returns (directory, summaries).");

    m.def("verify", [](const std::filesystem::path& dir) {
        const auto r = verify_runs(dir);
        return py::make_tuple(r.ok(), r.failed);
    });

    m.def("selfcheck", [] {
        std::ostringstream out;
        const bool ok = run_selfcheck(out);
        return py::make_tuple(ok, out.str());
    });
}
