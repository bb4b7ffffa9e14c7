#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "lsrlab/error.hpp"
#include "lsrlab/harness.hpp"

namespace py = pybind11;
using namespace lsrlab;

namespace {

AttributeId attr(const std::string& name) {
  const auto a = parse_attribute(name);
  if (!a) throw py::value_error("unknown attribute '" + name + "'");
  return *a;
}

py::dict attributes_dict(const AttributeVector& a) {
  py::dict d;
  for (AttributeId id : kAllAttributes) d[py::str(std::string(attribute_name(id)))] = a.get(id);
  return d;
}

py::array_t<double> to_numpy(const Tensor& t) {
  py::array_t<double> out({t.rows(), t.cols()});
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

Tensor from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-d array");
  Tensor t({static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))});
  std::copy(a.data(), a.data() + a.size(), t.data.begin());
  return t;
}

py::dict loss_dict(const LossBreakdown& l) {
  py::dict d;
  d["total"] = l.total;
  d["reconstruction"] = l.reconstruction;
  d["kld"] = l.kld;
  py::dict lsr;
  for (const auto& [a, v] : l.lsr_per_attribute) lsr[py::str(std::string(attribute_name(a)))] = v;
  d["lsr"] = lsr;
  d["adversarial_d"] = l.adversarial_d;
  d["adversarial_enc"] = l.adversarial_enc;
  return d;
}

py::dict metrics_dict(const MetricReport& m) {
  py::dict d;
  d["reconstruction_accuracy"] = m.reconstruction_accuracy;
  d["efficiency_mean"] = m.reconstruction_efficiency_mean;
  d["efficiency_sd"] = m.reconstruction_efficiency_sd;
  py::dict ind, interp;
  for (const auto& [a, v] : m.independence) ind[py::str(std::string(attribute_name(a)))] = v;
  for (const auto& [a, v] : m.interpretability) {
    interp[py::str(std::string(attribute_name(a)))] = v ? py::cast(*v) : py::none();
  }
  d["independence"] = ind;
  d["independence_mean"] = m.independence_mean;
  d["interpretability"] = interp;
  d["loss"] = loss_dict(m.loss);
  return d;
}

py::dict report_dict(const RunReport& r) {
  py::dict d;
  d["label"] = r.label;
  d["status"] = std::string(run_status_name(r.status));
  d["config_digest"] = r.config_digest;
  d["model"] = std::string(model_kind_name(r.kind));
  d["dataset"] = r.dataset;
  d["latent_dim"] = r.latent_dim;
  py::list reg;
  for (AttributeId a : r.regularised) reg.append(std::string(attribute_name(a)));
  d["regularised"] = reg;
  d["seed"] = r.seed;
  d["epochs"] = r.epochs;
  d["steps"] = r.steps;
  d["train_loss"] = r.train_loss ? py::cast(*r.train_loss) : py::none();
  d["metrics"] = r.metrics ? py::object(metrics_dict(*r.metrics)) : py::none();
  d["failed_step"] = r.failed_step ? py::cast(*r.failed_step) : py::none();
  d["wall_seconds"] = r.wall_seconds;
  d["error"] = r.error;
  return d;
}

/// A trained model loaded from a checkpoint directory.
struct PyModel {
  LoadedModel loaded;

  const Autoencoder& model() const { return *loaded.model; }
  Batch batch(const std::vector<Measure>& ms) const { return make_batch(ms, model().vocabulary()); }
};

}  // namespace

PYBIND11_MODULE(_lsrlab, m) {
  m.doc() = "Latent-space-regularised music VAEs";

  py::register_exception<Error>(m, "LsrlabError", PyExc_RuntimeError);

  py::class_<Measure>(m, "Measure")
      .def(py::init([](const std::string& line) { return parse_measure(line); }), py::arg("line"))
      .def("__str__", &serialize_measure)
      .def("__repr__", [](const Measure& x) { return "Measure('" + serialize_measure(x) + "')"; })
      .def("__eq__", [](const Measure& a, const Measure& b) { return a == b; })
      .def("attributes", [](const Measure& x) { return attributes_dict(compute_attributes(x)); });

  py::class_<Corpus>(m, "Corpus")
      .def_readonly("measures", &Corpus::measures)
      .def_readonly("name", &Corpus::name)
      .def("__len__", [](const Corpus& c) { return c.measures.size(); })
      .def("statistics", [](const Corpus& c) {
        const DatasetStats s = dataset_statistics(c);
        py::dict d;
        for (const auto& [a, mo] : s.attributes) {
          d[py::str(std::string(attribute_name(a)))] = py::make_tuple(mo.mean, mo.sd);
        }
        d["notes"] = s.note_count;
        d["measures"] = s.measure_count;
        return d;
      })
      .def("save", [](const Corpus& c, const std::filesystem::path& p) { save_corpus(p, c); });

  m.def("parse_measure", &parse_measure, py::arg("line"));
  m.def("compute_attributes", [](const Measure& x) { return attributes_dict(compute_attributes(x)); });
  m.def("load_corpus", &load_corpus, py::arg("path"));
  m.def("synthetic_corpus", [](std::uint64_t seed, std::size_t n) { return synthetic_corpus(seed, n); },
        py::arg("seed"), py::arg("n"));
  m.def(
      "split_corpus",
      [](const Corpus& c, double train, double test, double validation, std::uint64_t seed) {
        const CorpusSplit s = split_corpus(c, SplitSpec{train, test, validation, seed});
        return py::make_tuple(s.train, s.test, s.validation);
      },
      py::arg("corpus"), py::arg("train") = 0.70, py::arg("test") = 0.15, py::arg("validation") = 0.15,
      py::arg("seed") = 0);

  m.def(
      "mu_law_bins",
      [](const std::vector<double>& values, int k, double mu) {
        const BinSpec b = fit_mu_law_bins(values, k, mu);
        std::vector<int> out;
        for (double v : values) out.push_back(b.bin_of(v));
        return out;
      },
      py::arg("values"), py::arg("k") = kDefaultBins, py::arg("mu") = kDefaultMu,
      "Bin index of every value under equal-occupancy mu-law bins fitted to the values.");

  m.def(
      "spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); },
      py::arg("x"), py::arg("y"));
  m.def(
      "cosine_similarity",
      [](const std::vector<double>& u, const std::vector<double>& v) { return cosine_similarity(u, v); },
      py::arg("u"), py::arg("v"));
  m.def(
      "reconstruction_accuracy",
      [](const std::vector<Measure>& a, const std::vector<Measure>& b) { return reconstruction_accuracy(a, b); },
      py::arg("inputs"), py::arg("reconstructions"));

  m.def(
      "preset_config", [](const std::string& name) { return config_to_ini(preset_config(parse_preset(name))); },
      py::arg("name"), "INI text of a named preset.");
  m.def(
      "config_digest",
      [](const std::string& ini) {
        std::istringstream in(ini);
        return config_digest(parse_config(in, GridConfig{}).base);
      },
      py::arg("ini"));
  m.def(
      "run_single",
      [](const std::string& ini, const std::string& preset, bool resume) {
        GridConfig base;
        base.base = preset_config(parse_preset(preset));
        std::istringstream in(ini);
        const GridConfig g = parse_config(in, base);
        RunOptions opts;
        opts.resume = resume;
        RunReport r;
        {
          py::gil_scoped_release release;
          r = run_single(g.base, opts);
        }
        return report_dict(r);
      },
      py::arg("ini") = "", py::arg("preset") = "desk", py::arg("resume") = false,
      "Train and evaluate one model; `ini` overrides the preset.");
  m.def(
      "read_reports",
      [](const std::filesystem::path& p) {
        std::ifstream in(p);
        if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
        py::list out;
        for (const auto& r : read_reports(in)) out.append(report_dict(r));
        return out;
      },
      py::arg("path"));

  py::class_<PyModel>(m, "Model")
      .def(py::init([](const std::filesystem::path& dir) { return PyModel{load_model(dir)}; }), py::arg("directory"))
      .def_property_readonly("kind", [](const PyModel& p) { return std::string(model_kind_name(p.model().kind())); })
      .def_property_readonly("latent_dim", [](const PyModel& p) { return p.model().latent_dim(); })
      .def("encode", [](const PyModel& p, const std::vector<Measure>& ms) {
        return to_numpy(p.model().latent_means(p.batch(ms).tokens));
      })
      .def(
          "decode",
          [](const PyModel& p, const py::array_t<double, py::array::c_style | py::array::forcecast>& z,
             const std::vector<Measure>& like) {
            const Tensor zt = from_numpy(z);
            Tensor targets;
            if (p.model().needs_targets()) {
              if (like.size() != zt.rows()) throw py::value_error("adversarial models need one `like` measure per row");
              targets = p.model().targets_for(p.batch(like).attributes);
            }
            const Decoded d = p.model().decode(zt, p.model().needs_targets() ? &targets : nullptr);
            std::vector<Measure> out;
            for (const auto& seq : d.tokens) out.push_back(decode_indices(seq, p.model().vocabulary()));
            return out;
          },
          py::arg("z"), py::arg("like") = std::vector<Measure>{})
      .def("reconstruct", [](const PyModel& p, const std::vector<Measure>& ms) {
        std::vector<Measure> out;
        for (const auto& seq : reconstruct(p.model(), p.batch(ms))) out.push_back(decode_indices(seq, p.model().vocabulary()));
        return out;
      })
      .def(
          "interpolate",
          [](const PyModel& p, const std::vector<Measure>& corpus, const Measure& seed, const std::string& a) {
            const Batch data = p.batch(corpus);
            const Interpolation r =
                interpolate(p.model(), data, encode_indices(seed, p.model().vocabulary()), attr(a));
            py::list rows;
            for (std::size_t k = 0; k < r.mu.size(); ++k) {
              rows.append(py::make_tuple(r.mu[k], r.measures[k], attributes_dict(r.attributes[k])));
            }
            return rows;
          },
          py::arg("corpus"), py::arg("seed"), py::arg("attribute"))
      .def("evaluate", [](const PyModel& p, const std::vector<Measure>& ms) {
        const Batch data = p.batch(ms);
        return metrics_dict(evaluate(p.model(), data));
      });

  m.attr("__version__") = library_version();
}
