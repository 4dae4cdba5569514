#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "fedaudit/attacks.hpp"
#include "fedaudit/auditor.hpp"
#include "fedaudit/config.hpp"
#include "fedaudit/datagen.hpp"
#include "fedaudit/experiment.hpp"
#include "fedaudit/federation.hpp"
#include "fedaudit/nn.hpp"
#include "fedaudit/ocsvm.hpp"
#include "fedaudit/serialize.hpp"

namespace py = pybind11;
using namespace fedaudit;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// ModelParams <-> list of float64 arrays, shapes preserved.
py::list to_py(const ModelParams& p) {
  py::list out;
  for (const auto& t : p.tensors) {
    std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
    Array a(shape);
    std::memcpy(a.mutable_data(), t.values.data(), t.values.size() * sizeof(double));
    out.append(a);
  }
  return out;
}

ModelParams from_py(const std::vector<Array>& arrays) {
  ModelParams p;
  for (const auto& a : arrays) {
    Tensor t;
    for (py::ssize_t d = 0; d < a.ndim(); ++d) t.shape.push_back(static_cast<std::size_t>(a.shape(d)));
    t.values.assign(a.data(), a.data() + a.size());
    p.tensors.push_back(std::move(t));
  }
  return p;
}

std::vector<std::vector<double>> rows_from(const Array& x) {
  if (x.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
  const auto n = static_cast<std::size_t>(x.shape(0)), d = static_cast<std::size_t>(x.shape(1));
  std::vector<std::vector<double>> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i].assign(x.data() + i * d, x.data() + (i + 1) * d);
  return rows;
}

py::tuple dataset_to_py(const Dataset& ds) {
  const auto n = static_cast<py::ssize_t>(ds.size()), l = static_cast<py::ssize_t>(ds.length());
  Array x({n, l});
  py::array_t<std::int64_t> y(n);
  auto xm = x.mutable_unchecked<2>();
  auto ym = y.mutable_unchecked<1>();
  for (py::ssize_t i = 0; i < n; ++i) {
    for (py::ssize_t t = 0; t < l; ++t) xm(i, t) = ds.samples[i].features[t];
    ym(i) = static_cast<std::int64_t>(ds.samples[i].label);
  }
  return py::make_tuple(x, y);
}

Dataset dataset_from_py(const Array& x, const py::array_t<std::int64_t>& y, std::size_t num_classes) {
  const auto rows = rows_from(x);
  if (y.ndim() != 1 || static_cast<std::size_t>(y.shape(0)) != rows.size())
    throw std::invalid_argument("labels must be a 1-D array with one entry per row");
  Dataset ds;
  ds.num_classes = num_classes;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (y.at(i) < 0) throw std::invalid_argument("labels must be non-negative");
    ds.samples.push_back({rows[i], static_cast<std::size_t>(y.at(i))});
  }
  ds.validate();
  return ds;
}

std::vector<Update> updates_from(const std::vector<std::pair<std::vector<Array>, std::size_t>>& items) {
  std::vector<Update> out;
  for (std::size_t i = 0; i < items.size(); ++i) out.push_back({i, from_py(items[i].first), items[i].second});
  return out;
}

py::object nan_to_none(double v) { return std::isnan(v) ? py::object(py::none()) : py::object(py::float_(v)); }

py::dict report_to_py(const RoundReport& r) {
  py::list verdicts;
  for (std::size_t k = 0; k < r.verdicts.size(); ++k) {
    const auto& v = r.verdicts[k];
    py::dict d;
    d["client_id"] = v.client_id;
    d["attack"] = r.attacks[k];
    d["h"] = nan_to_none(v.h);
    d["P"] = nan_to_none(v.threshold);
    d["accepted"] = v.accepted;
    d["audited"] = v.audited;
    d["degenerate_count"] = v.degenerate_count;
    verdicts.append(d);
  }
  py::dict d;
  d["round"] = r.round;
  d["aggregator"] = r.aggregator;
  d["verdicts"] = verdicts;
  d["accepted_ids"] = r.accepted_ids;
  d["all_rejected"] = r.all_rejected;
  d["acc_before"] = r.acc_before;
  d["acc_after"] = r.acc_after;
  return d;
}

ArchSpec make_arch(std::size_t input_length, std::size_t num_classes,
                   const std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>& conv,
                   const std::vector<std::size_t>& dense) {
  ArchSpec a{input_length, num_classes, {}, dense};
  for (const auto& [f, k, s] : conv) a.conv_layers.push_back({f, k, s});
  a.validate();
  return a;
}

}  // namespace

PYBIND11_MODULE(_fedaudit, m) {
  m.doc() = "Federated learning with activation-space update auditing";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<ArchSpec>(m, "ArchSpec")
      .def(py::init(&make_arch), py::arg("input_length") = 32, py::arg("num_classes") = 5,
           py::arg("conv") = std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>{{8, 5, 1}, {8, 5, 2}},
           py::arg("dense") = std::vector<std::size_t>{16})
      .def_readonly("input_length", &ArchSpec::input_length)
      .def_readonly("num_classes", &ArchSpec::num_classes)
      .def_property_readonly("tap_width", &ArchSpec::tap_width)
      .def_property_readonly("parameter_count", &ArchSpec::parameter_count);

  m.def("init_params", [](const ArchSpec& a, std::uint64_t seed) { return to_py(init_params(a, seed)); },
        py::arg("arch"), py::arg("seed"));
  m.def(
      "predict_proba",
      [](const ArchSpec& a, const std::vector<Array>& params, const Array& x) {
        std::vector<double> v(x.data(), x.data() + x.size());
        return predict_proba(a, from_py(params), v);
      },
      py::arg("arch"), py::arg("params"), py::arg("x"));
  m.def(
      "train",
      [](const ArchSpec& a, const std::vector<Array>& params, const Array& x, const py::array_t<std::int64_t>& y,
         std::size_t epochs, double lr, std::size_t batch_size, std::uint64_t seed, bool ascent) {
        const auto ds = dataset_from_py(x, y, a.num_classes);
        auto start = from_py(params);
        ModelParams out;
        {
          py::gil_scoped_release release;
          out = train(a, std::move(start), ds, {epochs, lr, batch_size}, seed,
                      ascent ? Direction::kAscent : Direction::kDescent);
        }
        return to_py(out);
      },
      py::arg("arch"), py::arg("params"), py::arg("x"), py::arg("y"), py::arg("epochs") = 10, py::arg("lr") = 0.05,
      py::arg("batch_size") = 16, py::arg("seed") = 0, py::arg("ascent") = false);
  m.def(
      "evaluate",
      [](const ArchSpec& a, const std::vector<Array>& params, const Array& x, const py::array_t<std::int64_t>& y) {
        return evaluate(a, from_py(params), dataset_from_py(x, y, a.num_classes));
      },
      py::arg("arch"), py::arg("params"), py::arg("x"), py::arg("y"));

  m.def(
      "synth_dataset",
      [](std::size_t num_classes, std::size_t per_class, std::size_t length, double noise_std, std::uint64_t seed) {
        return dataset_to_py(synth_dataset(num_classes, per_class, length, noise_std, seed));
      },
      py::arg("num_classes") = 5, py::arg("samples_per_class") = 100, py::arg("length") = 32,
      py::arg("noise_std") = 0.5, py::arg("seed") = 0);

  m.def("sign_flip", [](const std::vector<Array>& p, double scale) { return to_py(attack_sign_flip(from_py(p), scale)); },
        py::arg("params"), py::arg("scale") = 3.0);
  m.def("same_value", [](const std::vector<Array>& p, double c) { return to_py(attack_same_value(from_py(p), c)); },
        py::arg("params"), py::arg("constant") = 100.0);
  m.def(
      "additive_gaussian",
      [](const std::vector<Array>& p, double std, std::uint64_t seed) {
        return to_py(attack_additive_gaussian(from_py(p), std, seed));
      },
      py::arg("params"), py::arg("noise_std"), py::arg("seed") = 0);

  m.def("fedavg", [](const std::vector<std::pair<std::vector<Array>, std::size_t>>& u) {
    return to_py(fedavg(updates_from(u)));
  }, py::arg("updates"), "updates: list of (params, n_samples)");
  m.def("krum", [](const std::vector<std::pair<std::vector<Array>, std::size_t>>& u, std::size_t f) {
    return to_py(krum(updates_from(u), f));
  }, py::arg("updates"), py::arg("f") = 0);
  m.def("coordinate_median", [](const std::vector<std::pair<std::vector<Array>, std::size_t>>& u) {
    return to_py(coordinate_median(updates_from(u)));
  }, py::arg("updates"));
  m.def("trimmed_mean", [](const std::vector<std::pair<std::vector<Array>, std::size_t>>& u, std::size_t trim) {
    return to_py(trimmed_mean(updates_from(u), trim));
  }, py::arg("updates"), py::arg("trim") = 1);

  py::class_<OcsvmModel>(m, "OcsvmModel")
      .def_readonly("rho", &OcsvmModel::rho)
      .def_readonly("nu", &OcsvmModel::nu)
      .def_readonly("gamma", &OcsvmModel::gamma)
      .def_readonly("alphas", &OcsvmModel::alphas)
      .def_property_readonly("n_support", [](const OcsvmModel& s) { return s.support_vectors.size(); })
      .def(
          "decision",
          [](const OcsvmModel& s, const Array& x) {
            if (x.ndim() == 1) return py::cast(s.decision(std::vector<double>(x.data(), x.data() + x.size())));
            std::vector<double> out;
            for (const auto& r : rows_from(x)) out.push_back(s.decision(r));
            return py::cast(out);
          },
          py::arg("x"));
  m.def(
      "ocsvm_fit",
      [](const Array& x, double nu, std::optional<double> gamma, double tolerance) {
        OcsvmOptions opt;
        opt.nu = nu;
        opt.tolerance = tolerance;
        if (gamma) opt.gamma = GammaMode::fixed(*gamma);
        return ocsvm_fit(rows_from(x), opt);
      },
      py::arg("x"), py::arg("nu") = 0.1, py::arg("gamma") = py::none(), py::arg("tolerance") = 1e-6,
      "Per-feature standardized nu-one-class SVM; gamma=None uses the median heuristic.");

  m.def(
      "calibrate",
      [](double h_train, double h_test, double alpha) {
        const auto c = calibrate(h_train, h_test, alpha);
        return py::make_tuple(c.sigma(), c.threshold());
      },
      py::arg("h_train"), py::arg("h_test"), py::arg("alpha") = 1.0, "Returns (sigma, P).");

  m.def("serialize_params", [](const std::vector<Array>& p) {
    const auto bytes = serialize_params(from_py(p));
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  }, py::arg("params"));
  m.def("deserialize_params", [](const py::bytes& b) {
    const std::string s = b;
    return to_py(deserialize_params(std::vector<std::uint8_t>(s.begin(), s.end())));
  }, py::arg("data"));

  m.def("parse_config", [](const std::string& text) { return config_to_json(parse_config(text)); }, py::arg("text"),
        "Validates a config and returns its canonical JSON.");
  m.def(
      "run_experiment",
      [](const std::string& text) {
        const auto cfg = parse_config(text);
        ExperimentResult result;
        {
          py::gil_scoped_release release;
          const auto data = prepare_data(cfg);
          std::optional<Detector> det;
          if (cfg.detector.enabled) det = make_detector(cfg, data);
          result = execute(cfg, data, det ? &*det : nullptr);
        }
        py::list reports;
        for (const auto& r : result.reports) reports.append(report_to_py(r));
        return py::make_tuple(reports, to_py(result.final_global));
      },
      py::arg("config_text"), "Runs a config in memory, without writing files. Returns (reports, final_params).");
}
