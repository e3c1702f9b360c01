#include "gwe/config.hpp"
#include "gwe/dataset.hpp"
#include "gwe/ensemble.hpp"
#include "gwe/learners.hpp"
#include "gwe/metrics.hpp"
#include "gwe/pipeline.hpp"
#include "gwe/pso.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

namespace py = pybind11;
using namespace gwe;

namespace {

ensemble::PredictionBundle make_bundle(const Matrix& P, const Labels& y, std::vector<std::string> names) {
  ensemble::PredictionBundle b;
  b.P = P;
  b.y = y;
  if (names.empty())
    for (Eigen::Index i = 0; i < P.cols(); ++i) names.push_back("m" + std::to_string(i));
  b.names = std::move(names);
  return b;
}

// Owns a fitted model and exposes the sklearn-like surface.
class PyClassifier {
 public:
  PyClassifier(const std::string& kind, const std::map<std::string, double>& hyperparameters) {
    spec_ = learn::ClassifierSpec::defaults(learn::parse_kind(kind));
    for (const auto& [k, v] : hyperparameters) spec_.hyperparameters[k] = v;
    spec_.validate();
  }
  explicit PyClassifier(std::unique_ptr<learn::Classifier> model) : spec_(model->spec()), model_(std::move(model)) {}

  PyClassifier& fit(const Matrix& X, const Labels& y, std::uint64_t seed) {
    model_ = learn::fit(spec_, X, y, seed);
    return *this;
  }
  Vector predict_proba(const Matrix& X) const { return fitted().predict_proba(X); }
  Labels predict(const Matrix& X, double threshold) const { return fitted().predict(X, threshold); }
  std::string save() const {
    std::ostringstream out;
    fitted().save(out);
    return out.str();
  }
  std::string kind() const { return learn::to_string(spec_.kind); }
  const std::map<std::string, double>& hyperparameters() const { return spec_.hyperparameters; }
  std::vector<double> loss_history() const { return model_ ? model_->loss_history() : std::vector<double>{}; }

 private:
  const learn::Classifier& fitted() const {
    if (!model_) throw Error("classifier is not fitted");
    return *model_;
  }
  learn::ClassifierSpec spec_;
  std::unique_ptr<learn::Classifier> model_;
};

}  // namespace

PYBIND11_MODULE(gwe, m) {
  m.doc() = "Greedy-weighted ensemble loan-default toolkit";
  py::register_exception<Error>(m, "GweError", PyExc_ValueError);

  m.def(
      "greedy_weights",
      [](const Matrix& P, const Labels& y, double lam, double delta, double min_delta, int max_passes,
         double tolerance) {
        ensemble::GreedyConfig c{lam, delta, min_delta, max_passes, tolerance};
        ensemble::GreedyTrace trace;
        const auto w = ensemble::greedy_weights(make_bundle(P, y, {}), c, &trace);
        return py::make_tuple(w.w, trace.accepted_losses);
      },
      py::arg("P"), py::arg("y"), py::arg("lam") = 0.01, py::arg("delta") = 0.05, py::arg("min_delta") = 0.005,
      py::arg("max_passes") = 200, py::arg("tolerance") = 1e-6,
      "Convex model weights for the (rows x models) probability matrix P. Returns (weights, accepted losses).");
  m.def(
      "regularised_loss",
      [](const Matrix& P, const Labels& y, const Vector& w, double lam) {
        return ensemble::regularised_loss(make_bundle(P, y, {}), w, lam);
      },
      py::arg("P"), py::arg("y"), py::arg("w"), py::arg("lam") = 0.01);
  m.def("softmax_weights", [](const std::vector<double>& s) { return ensemble::softmax_weights(s).w; });
  m.def("weighted_average", &ensemble::weighted_average, py::arg("P"), py::arg("w"));
  m.def("vote_score", &ensemble::vote_score, py::arg("P"), py::arg("threshold") = 0.5);

  m.def(
      "auc", [](const Labels& y, const std::vector<double>& s) { return metrics::auc(y, s); }, py::arg("y"),
      py::arg("scores"));
  m.def(
      "bootstrap_auc",
      [](const Labels& y, const std::vector<double>& s, int n_boot, std::uint64_t seed, double level) {
        const auto b = metrics::bootstrap_auc(y, s, n_boot, seed, level);
        return py::dict(py::arg("mean") = b.mean, py::arg("std") = b.std, py::arg("ci_low") = b.ci_low,
                        py::arg("ci_high") = b.ci_high, py::arg("n_boot") = b.n_boot, py::arg("skipped") = b.skipped);
      },
      py::arg("y"), py::arg("scores"), py::arg("n_boot") = 1000, py::arg("seed") = 42, py::arg("level") = 0.95);
  m.def(
      "brier", [](const Labels& y, const std::vector<double>& p) { return metrics::brier(y, p); }, py::arg("y"),
      py::arg("probs"));
  m.def(
      "log_loss", [](const Labels& y, const std::vector<double>& p) { return metrics::log_loss(y, p); }, py::arg("y"),
      py::arg("probs"));

  m.def(
      "pso_optimize",
      [](const std::vector<std::tuple<std::string, std::string, double, double>>& dims,
         const std::function<double(const Vector&)>& fitness, int particles, int iterations, double c1, double c2,
         double w, std::uint64_t seed) {
        pso::SearchSpace space;
        for (const auto& [name, kind, lo, hi] : dims) {
          if (kind != "real" && kind != "integer") throw Error("pso: dimension kind must be 'real' or 'integer'");
          space.dimensions.push_back(
              {name, kind == "integer" ? pso::DimensionKind::integer : pso::DimensionKind::real, lo, hi});
        }
        pso::SwarmConfig c;
        c.particles = particles;
        c.iterations = iterations;
        c.c1 = c1;
        c.c2 = c2;
        c.w = w;
        c.seed = seed;
        const auto r = pso::optimize(space, fitness, c);
        return py::make_tuple(r.best_position, r.best_fitness, r.trace);
      },
      py::arg("dimensions"), py::arg("fitness"), py::arg("particles") = 10, py::arg("iterations") = 10,
      py::arg("c1") = 1.5, py::arg("c2") = 1.5, py::arg("w") = 0.5, py::arg("seed") = 42,
      "Maximise fitness over [(name, 'real'|'integer', lower, upper), ...]. Returns (position, fitness, trace).");

  m.def("kinds", [] {
    std::vector<std::string> out;
    for (auto k : learn::all_kinds()) out.push_back(learn::to_string(k));
    return out;
  });
  m.def("search_space", [](const std::string& kind) {
    py::dict d;
    for (const auto& b : learn::search_space(learn::parse_kind(kind)))
      d[py::str(b.name)] = py::make_tuple(b.integer ? "integer" : "real", b.lower, b.upper);
    return d;
  });

  py::class_<PyClassifier>(m, "Classifier")
      .def(py::init<const std::string&, const std::map<std::string, double>&>(), py::arg("kind"),
           py::arg("hyperparameters") = std::map<std::string, double>{})
      .def("fit", &PyClassifier::fit, py::arg("X"), py::arg("y"), py::arg("seed") = 42,
           py::return_value_policy::reference_internal)
      .def("predict_proba", &PyClassifier::predict_proba, py::arg("X"))
      .def("predict", &PyClassifier::predict, py::arg("X"), py::arg("threshold") = 0.5)
      .def("save", &PyClassifier::save, "Model artifact text")
      .def_static(
          "load",
          [](const std::string& text) {
            std::istringstream in(text);
            return PyClassifier(learn::load_classifier(in));
          },
          py::arg("text"))
      .def_property_readonly("kind", &PyClassifier::kind)
      .def_property_readonly("hyperparameters", &PyClassifier::hyperparameters)
      .def_property_readonly("loss_history", &PyClassifier::loss_history);

  m.def(
      "synth",
      [](const std::filesystem::path& csv, std::size_t rows, std::uint64_t seed,
         const std::optional<std::filesystem::path>& schema) {
        data::SyntheticOptions o;
        o.rows = rows;
        o.seed = seed;
        std::ofstream out(csv);
        if (!out) throw Error("cannot write " + csv.string());
        data::write_synthetic_csv(out, o);
        if (schema) {
          std::ofstream s(*schema);
          data::write_schema(s, data::synthetic_schema());
        }
      },
      py::arg("csv"), py::arg("rows") = 5000, py::arg("seed") = 42, py::arg("schema") = py::none());

  m.def(
      "run",
      [](const std::filesystem::path& config, const std::optional<std::string>& out_dir,
         const std::optional<std::uint64_t>& seed, bool force) {
        auto c = pipeline::load_config(config);
        if (out_dir) c.out_dir = *out_dir;
        if (seed) c.seed = *seed;
        py::list stages;
        py::gil_scoped_release release;
        pipeline::Pipeline p(c);
        const auto outcomes = p.run_all(force);
        py::gil_scoped_acquire acquire;
        for (const auto& o : outcomes)
          stages.append(py::make_tuple(pipeline::to_string(o.stage), o.cached, o.key));
        return stages;
      },
      py::arg("config"), py::arg("out_dir") = py::none(), py::arg("seed") = py::none(), py::arg("force") = false,
      "Run every stage; returns [(stage, cached, key), ...].");
}
