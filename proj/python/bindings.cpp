#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "turing/error.hpp"
#include "turing/features.hpp"
#include "turing/io.hpp"
#include "turing/kernels.hpp"
#include "turing/model_file.hpp"
#include "turing/pipeline.hpp"
#include "turing/simulator.hpp"
#include "turing/stability.hpp"

namespace py = pybind11;
using namespace turing;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

TorusGrid grid_of(const Array& field) {
  if (field.ndim() != 2 || field.shape(0) != field.shape(1) || field.shape(0) < 2) {
    throw ShapeError("field must be a square 2-D array with side >= 2");
  }
  return TorusGrid(static_cast<std::size_t>(field.shape(0)));
}

std::span<const double> span_of(const Array& a) {
  return {a.data(), static_cast<std::size_t>(a.size())};
}

std::vector<double> vector_of(const Array& a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

Array to_array(const std::vector<double>& v) {
  return Array(static_cast<py::ssize_t>(v.size()), v.data());
}

Array species_array(const PatternField& p) {
  const auto n = static_cast<py::ssize_t>(p.grid.side());
  Array out({static_cast<py::ssize_t>(p.species.size()), n, n});
  double* dst = out.mutable_data();
  for (const auto& f : p.species) dst = std::copy(f.begin(), f.end(), dst);
  return out;
}

PatternField pattern_from(const Array& species, const GmParams& params) {
  if (species.ndim() != 3 || species.shape(1) != species.shape(2)) {
    throw ShapeError("species must have shape (k, n, n)");
  }
  PatternField p;
  p.grid = TorusGrid(static_cast<std::size_t>(species.shape(1)));
  p.params = params;
  const std::size_t m = p.grid.nodes();
  for (py::ssize_t i = 0; i < species.shape(0); ++i) {
    const double* src = species.data() + i * static_cast<py::ssize_t>(m);
    p.species.emplace_back(src, src + m);
  }
  return p;
}

PointSet points_of(const std::vector<Array>& rows) {
  PointSet out;
  for (const auto& r : rows) out.push_back(vector_of(r));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Turing pattern simulation, resistance distance histograms and parameter regression";

  auto base = py::register_exception<Error>(m, "TuringError", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<DegenerateFeatureError>(m, "DegenerateFeatureError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", base.ptr());
  py::register_exception<SimulationFailure>(m, "SimulationFailure", base.ptr());

  py::class_<GmParams>(m, "GmParams")
      .def(py::init([](double a, double b, double c, double delta, double s) {
             GmParams p{a, b, c, delta, s};
             p.validate();
             return p;
           }),
           py::arg("a"), py::arg("b"), py::arg("c"), py::arg("delta"), py::arg("s"))
      .def_readwrite("a", &GmParams::a)
      .def_readwrite("b", &GmParams::b)
      .def_readwrite("c", &GmParams::c)
      .def_readwrite("delta", &GmParams::delta)
      .def_readwrite("s", &GmParams::s)
      .def("as_tuple", [](const GmParams& p) { return py::make_tuple(p.a, p.b, p.c, p.delta, p.s); })
      .def("__eq__", [](const GmParams& x, const GmParams& y) { return x == y; })
      .def("__repr__", [](const GmParams& p) {
        return "GmParams(a=" + format_double(p.a) + ", b=" + format_double(p.b) +
               ", c=" + format_double(p.c) + ", delta=" + format_double(p.delta) +
               ", s=" + format_double(p.s) + ")";
      });

  m.def("equilibrium", [](const GmParams& p) {
    const auto u = gm_equilibrium(p);
    return py::make_tuple(u[0], u[1]);
  });

  m.def("turing_check", [](const GmParams& p) {
    const StabilityReport r = turing_check(p);
    py::dict d;
    d["turing"] = r.turing;
    d["ode_stable"] = r.ode_stable;
    d["q2_star"] = r.q2_star;
    d["max_growth"] = r.max_growth;
    d["q2_max"] = r.q2_max;
    d["equilibrium"] = r.equilibrium;
    return d;
  });

  m.def("dispersion", [](const GmParams& p, const std::vector<double>& q2) {
    const ReactionModel model = gierer_meinhardt_model(p);
    const auto u = gm_equilibrium(p);
    std::vector<double> out;
    for (double q : q2) out.push_back(dispersion(model, u, q));
    return to_array(out);
  }, py::arg("params"), py::arg("q2"));

  py::class_<PatternField>(m, "Pattern")
      .def(py::init(&pattern_from), py::arg("species"), py::arg("params"))
      .def_property_readonly("species", &species_array)
      .def_property_readonly("side", [](const PatternField& p) { return p.grid.side(); })
      .def_readonly("params", &PatternField::params)
      .def_readonly("elapsed_time", &PatternField::elapsed_time)
      .def_readonly("converged", &PatternField::converged);

  m.def("simulate",
        [](const GmParams& p, std::size_t grid, std::uint64_t seed, std::optional<double> t_final,
           double noise) {
          SimConfig cfg = SimConfig::for_grid(grid);
          cfg.seed = seed;
          cfg.noise_amplitude = noise;
          if (t_final) {
            cfg.t_final = *t_final;
            cfg.check_interval = std::min(cfg.check_interval, *t_final);
          }
          py::gil_scoped_release release;
          return simulate(p, TorusGrid(grid), cfg);
        },
        py::arg("params"), py::arg("grid") = 64, py::arg("seed") = 0,
        py::arg("t_final") = py::none(), py::arg("noise") = 0.01);

  m.def("coefficient_of_variation", [](const Array& f) { return coefficient_of_variation(span_of(f)); });
  m.def("load_pattern", &load_pattern, py::arg("path"));
  m.def("save_pattern", &save_pattern, py::arg("path"), py::arg("pattern"));

  m.def("resistances",
        [](const Array& field, double radius, double epsilon, std::size_t spacing) {
          const TorusGrid g = grid_of(field);
          std::vector<double> out;
          {
            py::gil_scoped_release release;
            const ResistanceSolver solver(build_pattern_graph(g, span_of(field), epsilon));
            out = collect_resistances(solver, g, radius, spacing);
          }
          return to_array(out);
        },
        py::arg("field"), py::arg("radius") = 8.0, py::arg("epsilon") = 0.003, py::arg("spacing") = 1);

  m.def("rdh",
        [](const Array& field, double r_max, double radius, std::size_t bins, double epsilon,
           std::size_t spacing) {
          const TorusGrid g = grid_of(field);
          require_nonhomogeneous(span_of(field));
          std::vector<double> out;
          {
            py::gil_scoped_release release;
            const RdhConfig cfg{radius, spacing, bins, r_max};
            out = compute_rdh(build_pattern_graph(g, span_of(field), epsilon), cfg).values;
          }
          return to_array(out);
        },
        py::arg("field"), py::arg("r_max"), py::arg("radius") = 8.0, py::arg("bins") = 12,
        py::arg("epsilon") = 0.003, py::arg("spacing") = 1);

  m.def("histogram", [](const Array& values, double r_max, std::size_t bins) {
    return to_array(histogram_rdh(span_of(values), RdhConfig{1.0, 1, bins, r_max}).values);
  }, py::arg("values"), py::arg("r_max"), py::arg("bins") = 12);

  m.def("quantile", [](const Array& values, double p) {
    auto v = vector_of(values);
    return empirical_quantile(v, p);
  });

  m.def("maximal_concentration", [](const Array& f) { return maximal_concentration(span_of(f)); });
  m.def("connected_components_high", [](const Array& field) {
    return connected_components_high(grid_of(field), span_of(field));
  });

  m.def("wasserstein_sq", [](const Array& x, const Array& y) {
    return wasserstein_sq(vector_of(x), vector_of(y));
  });
  m.def("chi2_distance", [](const Array& x, const Array& y) {
    return chi2_distance(vector_of(x), vector_of(y));
  });
  m.def("kernel", [](const std::string& kind, const Array& x, const Array& y, double gamma) {
    return KernelSpec{kernel_kind_from_string(kind), gamma}(vector_of(x), vector_of(y));
  }, py::arg("kind"), py::arg("x"), py::arg("y"), py::arg("gamma") = 1.0);

  m.def("cluster_patterns", [](const std::vector<Array>& rdhs, double threshold) {
    return cluster_patterns(points_of(rdhs), threshold);
  }, py::arg("rdhs"), py::arg("threshold") = 0.05);

  m.def("embed_2d", [](const std::vector<Array>& rdhs) {
    const Embedding e = embed_2d(points_of(rdhs));
    Array coords({static_cast<py::ssize_t>(e.coords.rows()), static_cast<py::ssize_t>(2)});
    for (Eigen::Index i = 0; i < e.coords.rows(); ++i) {
      coords.mutable_at(i, 0) = e.coords(i, 0);
      coords.mutable_at(i, 1) = e.coords(i, 1);
    }
    const std::vector<double> sv(e.singular_values.data(), e.singular_values.data() + e.singular_values.size());
    return py::make_tuple(coords, to_array(sv), e.rank_deficient);
  });

  py::class_<TrainedModel>(m, "Model")
      .def_property_readonly("method", [](const TrainedModel& t) { return to_string(t.method); })
      .def_property_readonly("targets", [](const TrainedModel& t) {
        std::vector<std::string> names;
        for (std::size_t i : t.targets) names.push_back(target_name(i));
        return names;
      })
      .def_property_readonly("r_max", [](const TrainedModel& t) { return t.rdh.r_max; })
      .def_property_readonly("radius", [](const TrainedModel& t) { return t.rdh.radius; })
      .def_property_readonly("bins", [](const TrainedModel& t) { return t.rdh.bins; })
      .def_readonly("validation_nrmse", &TrainedModel::validation_nrmse)
      .def("describe", &TrainedModel::describe)
      .def("predict", [](const TrainedModel& t, const Array& x) {
        return to_array(t.predict(vector_of(x)));
      });

  m.def("load_model", &load_model, py::arg("path"));
}
