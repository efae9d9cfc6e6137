#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "phireg/errors.hpp"
#include "phireg/estimator.hpp"
#include "phireg/inference.hpp"
#include "phireg/json_io.hpp"
#include "phireg/robustness.hpp"
#include "phireg/samplers.hpp"
#include "phireg/simulation.hpp"
#include "phireg/survey_data.hpp"

namespace py = pybind11;
using namespace phireg;

namespace {

SurveyDataset dataset_from_arrays(const std::vector<long>& strata, const std::vector<long>& clusters,
                                  const Vector& weights, const std::vector<int>& sizes, const Matrix& counts,
                                  const Matrix& covariates) {
    const std::size_t n = strata.size();
    if (clusters.size() != n || static_cast<std::size_t>(weights.size()) != n || sizes.size() != n ||
        static_cast<std::size_t>(counts.rows()) != n || static_cast<std::size_t>(covariates.rows()) != n)
        throw DimensionError("all inputs need one row per cluster");
    std::vector<ClusterRecord> recs(n);
    for (std::size_t c = 0; c < n; ++c) {
        auto& r = recs[c];
        r.stratum = strata[c];
        r.cluster = clusters[c];
        r.weight = weights(static_cast<Index>(c));
        r.size = sizes[c];
        r.counts = counts.row(static_cast<Index>(c)).transpose();
        r.covariates.resize(covariates.cols() + 1);
        r.covariates(0) = 1.0;
        r.covariates.tail(covariates.cols()) = covariates.row(static_cast<Index>(c)).transpose();
    }
    return SurveyDataset(std::move(recs));
}

py::dict wald_dict(const WaldReport& w) {
    py::dict d;
    d["statistic"] = w.statistic;
    d["df"] = w.df;
    d["p_value"] = w.p_value;
    d["alpha"] = w.alpha;
    d["reject"] = w.reject;
    d["reject_at"] = w.reject_at;
    return d;
}

InitKind init_kind(const std::string& s) {
    if (s == "zeros") return InitKind::zeros;
    if (s == "pmle") return InitKind::pmle_first;
    throw ValidationError("init must be 'zeros' or 'pmle'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Minimum Cressie-Read divergence estimation for clustered multinomial survey data";

    static py::exception<NumericalError> numerical(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const NumericalError& e) {
            py::set_error(numerical, e.what());
        } catch (const Error& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    py::class_<SurveyDataset>(m, "Dataset")
        .def_static("from_csv", [](const std::string& path) { return load_dataset(path); }, py::arg("path"))
        .def_static("from_arrays", &dataset_from_arrays, py::arg("strata"), py::arg("clusters"), py::arg("weights"),
                    py::arg("sizes"), py::arg("counts"), py::arg("covariates"),
                    "Covariates exclude the intercept column; it is prepended.")
        .def("to_csv", [](const SurveyDataset& d, const std::string& path) { save_dataset(path, d); })
        .def_property_readonly("tau", &SurveyDataset::tau)
        .def_property_readonly("num_clusters", &SurveyDataset::num_clusters)
        .def_property_readonly("num_categories", &SurveyDataset::num_categories)
        .def_property_readonly("num_covariates", &SurveyDataset::num_covariates)
        .def_property_readonly("counts",
                               [](const SurveyDataset& d) {
                                   Matrix out(d.num_clusters(), d.num_categories());
                                   for (Index c = 0; c < d.num_clusters(); ++c) out.row(c) = d[c].counts.transpose();
                                   return out;
                               })
        .def_property_readonly("covariates",
                               [](const SurveyDataset& d) {
                                   Matrix out(d.num_clusters(), d.num_covariates());
                                   for (Index c = 0; c < d.num_clusters(); ++c)
                                       out.row(c) = d[c].covariates.transpose();
                                   return out;
                               })
        .def("__len__", [](const SurveyDataset& d) { return d.num_clusters(); });

    py::class_<FitResult>(m, "FitResult")
        .def_property_readonly("beta_hat", [](const FitResult& f) { return f.beta_hat.coefficients(); })
        .def_property_readonly("beta_flat", [](const FitResult& f) { return f.beta_hat.flatten(); })
        .def_readonly("V_hat", &FitResult::V_hat)
        .def_readonly("J_hat", &FitResult::J_hat)
        .def_readonly("G_hat", &FitResult::G_hat)
        .def_readonly("lam", &FitResult::lambda)
        .def_readonly("converged", &FitResult::converged)
        .def_readonly("iterations", &FitResult::iterations)
        .def_readonly("score_norm", &FitResult::score_norm)
        .def_readonly("objective", &FitResult::objective)
        .def_readonly("objective_path", &FitResult::objective_path)
        .def_readonly("n_clusters", &FitResult::n_clusters)
        .def_readonly("warnings", &FitResult::warnings)
        .def("to_json", &fit_to_json)
        .def_static("from_json", &fit_from_json);

    m.def(
        "fit",
        [](const SurveyDataset& data, double lam, const std::string& init, double tol, int max_iter,
           const std::string& g_score) {
            FitConfig c;
            c.lambda = CressieReadLambda(lam);
            c.init = init_kind(init);
            c.gradient_tolerance = tol;
            c.max_iterations = max_iter;
            if (g_score == "kl") c.g_score = GScore::kl;
            else if (g_score == "lambda") c.g_score = GScore::lambda;
            else throw ValidationError("g_score must be 'kl' or 'lambda'");
            py::gil_scoped_release release;
            return fit(data, c);
        },
        py::arg("data"), py::arg("lam") = 0.0, py::arg("init") = "pmle", py::arg("tol") = 1e-8,
        py::arg("max_iter") = 200, py::arg("g_score") = "kl");

    m.def(
        "divergence",
        [](const SurveyDataset& data, const Matrix& beta, double lam) {
            return divergence(CressieReadLambda(lam), data, BetaMatrix(beta));
        },
        py::arg("data"), py::arg("beta"), py::arg("lam"));
    m.def(
        "estimating_function",
        [](const SurveyDataset& data, const Matrix& beta, double lam) {
            return estimating_function(CressieReadLambda(lam), data, BetaMatrix(beta));
        },
        py::arg("data"), py::arg("beta"), py::arg("lam"));

    m.def(
        "wald_test",
        [](const FitResult& f, const Matrix& M, const Vector& rhs, double alpha) {
            return wald_dict(wald_test(f, LinearHypothesis(M, rhs), alpha));
        },
        py::arg("fit"), py::arg("M"), py::arg("m"), py::arg("alpha") = 0.05);

    m.def("approximate_power", py::overload_cast<double, double, double, Index, double>(&approximate_power),
          py::arg("ell"), py::arg("sigma_w"), py::arg("df"), py::arg("n"), py::arg("alpha") = 0.05);
    m.def("required_sample_size", py::overload_cast<double, double, double, double, double>(&required_sample_size),
          py::arg("ell"), py::arg("sigma_w"), py::arg("df"), py::arg("alpha") = 0.05, py::arg("target_power") = 0.8);

    m.def(
        "influence",
        [](const SurveyDataset& data, const Matrix& beta, double lam, long stratum, long cluster, Index category) {
            const auto point =
                ContaminationPoint::at_category(stratum, cluster, data.num_categories(), category - 1);
            const auto rep = influence(data, BetaMatrix(beta), CressieReadLambda(lam), point);
            py::dict d;
            d["if"] = rep.if_vector;
            d["psi"] = rep.psi;
            d["u_star"] = rep.u_star;
            return d;
        },
        py::arg("data"), py::arg("beta"), py::arg("lam"), py::arg("stratum"), py::arg("cluster"),
        py::arg("category"), "category is 1-based.");

    m.def(
        "generate",
        [](int H, int nh, int m_size, const Matrix& beta, const std::string& family, double rho2, double contaminate,
           std::uint64_t seed) {
            SimulationDesign design;
            design.strata = H;
            design.clusters_per_stratum = nh;
            design.cluster_size = m_size;
            design.beta = BetaMatrix(beta);
            return generate_dataset(design, OverdispersionSpec::from_rho2(parse_family(family), rho2, seed),
                                    ContaminationSpec{contaminate, {}});
        },
        py::arg("H"), py::arg("nh"), py::arg("m"), py::arg("beta"), py::arg("family") = "m_inflated",
        py::arg("rho2") = 0.5, py::arg("contaminate") = 0.0, py::arg("seed") = 42);

    m.def(
        "simulate",
        [](const std::string& plan_json, unsigned threads) {
            const ExperimentPlan plan = plan_from_json_text(plan_json);
            std::vector<CellResult> cells;
            {
                py::gil_scoped_release release;
                cells = run_experiment(plan, threads);
            }
            return cells_to_json(cells);
        },
        py::arg("plan_json"), py::arg("threads") = 0, "Returns the cell table as JSON text.");

    m.attr("__version__") = library_version();
}
