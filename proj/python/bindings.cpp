#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "stylefuse/cli.hpp"
#include "stylefuse/datastore.hpp"
#include "stylefuse/engine.hpp"
#include "stylefuse/error.hpp"
#include "stylefuse/fusion.hpp"
#include "stylefuse/reasoning.hpp"
#include "stylefuse/retrieval.hpp"

namespace py = pybind11;
using namespace stylefuse;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

UnitVector unit_from(const FloatArray& a) {
  if (a.ndim() != 1) throw Error(Errc::kInvalidArgument, "expected a 1-d vector");
  return normalize(std::span<const float>(a.data(), static_cast<std::size_t>(a.shape(0))));
}

std::vector<UnitVector> units_from(const FloatArray& a) {
  if (a.ndim() != 2) throw Error(Errc::kInvalidArgument, "expected a 2-d matrix (rows are vectors)");
  std::vector<UnitVector> out;
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto dim = static_cast<std::size_t>(a.shape(1));
  for (std::size_t r = 0; r < rows; ++r) {
    out.push_back(normalize(std::span<const float>(a.data() + r * dim, dim)));
  }
  return out;
}

py::array_t<float> to_array(const UnitVector& v) {
  py::array_t<float> out(static_cast<py::ssize_t>(v.dim()));
  std::copy(v.values().begin(), v.values().end(), out.mutable_data());
  return out;
}

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

fusion::AttributeVectors attributes_from(const std::map<std::string, FloatArray>& in) {
  fusion::AttributeVectors out;
  for (const auto& [name, vec] : in) {
    const auto a = parse_attribute(name);
    if (!a) throw Error(Errc::kInvalidArgument, "unknown attribute '" + name + "'");
    out.emplace(*a, unit_from(vec));
  }
  return out;
}

py::dict query_dict(const fusion::QueryVector& q) {
  py::dict d;
  d["q"] = to_array(q.q);
  d["diagnostics"] = to_python(engine::diagnostics_json(q.diagnostics));
  return d;
}

}  // namespace

PYBIND11_MODULE(_stylefuse, m) {
  m.doc() = "Outfit-completion engine: fusion, retrieval, reasoning parsing, evaluation CLI";

  // Kept alive by the module attribute for the interpreter's lifetime.
  static PyObject* error_type = PyErr_NewException("_stylefuse.Error", PyExc_RuntimeError, nullptr);
  m.attr("Error") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::handle(error_type)(py::str(e.what()));
      instance.attr("code") = std::string(errc_name(e.code()));
      PyErr_SetObject(error_type, instance.ptr());
    }
  });

  m.def("normalize", [](const FloatArray& v) { return to_array(unit_from(v)); }, py::arg("v"),
        "L2-normalize a vector (raises Error with code ZeroVector on degenerate input).");

  m.def(
      "ta_isa",
      [](const FloatArray& target, const FloatArray& outfit, double tau) {
        const auto r = fusion::ta_isa(unit_from(target), units_from(outfit), tau);
        return py::make_tuple(r.weights, to_array(r.visual));
      },
      py::arg("target_text"), py::arg("outfit"), py::arg("tau") = fusion::kDefaultTau,
      "Saliency weights over outfit rows and the target-aware visual vector.");

  m.def(
      "aa_va",
      [](const std::map<std::string, FloatArray>& attributes, const FloatArray& target,
         const FloatArray& visual, int sign) {
        const auto r = fusion::aa_va(attributes_from(attributes), unit_from(target),
                                     unit_from(visual), sign);
        py::dict scores, weights;
        for (const auto& [a, s] : r.scores) scores[py::str(std::string(to_string(a)))] = s;
        for (const auto& [a, w] : r.weights) weights[py::str(std::string(to_string(a)))] = w;
        return py::make_tuple(scores, weights, to_array(r.aesthetic));
      },
      py::arg("attributes"), py::arg("target_text"), py::arg("visual"), py::arg("sign") = 1);

  m.def(
      "entropy_of_distribution",
      [](const std::vector<double>& similarities, double temperature) {
        const auto r = fusion::entropy_of_distribution(similarities, temperature);
        return py::make_tuple(r.probabilities, r.entropy);
      },
      py::arg("similarities"), py::arg("temperature") = 1.0);

  m.def(
      "de_gf",
      [](std::optional<FloatArray> visual, const FloatArray& text,
         std::optional<FloatArray> aesthetic, const FloatArray& candidates) {
        fusion::CueSet cues{std::nullopt, unit_from(text), std::nullopt};
        if (visual) cues.visual = unit_from(*visual);
        if (aesthetic) cues.aesthetic = unit_from(*aesthetic);
        return query_dict(fusion::de_gf(cues, units_from(candidates)));
      },
      py::arg("visual"), py::arg("text"), py::arg("aesthetic"), py::arg("candidates"));

  m.def(
      "build_query",
      [](const FloatArray& outfit, const FloatArray& target,
         const std::map<std::string, FloatArray>& attributes, const FloatArray& pool, double tau,
         int aava_sign, bool svaf_enabled) {
        fusion::FusionConfig config;
        config.tau = tau;
        config.aava_sign = aava_sign;
        config.svaf_enabled = svaf_enabled;
        const auto candidates = units_from(pool);
        return query_dict(fusion::build_query(units_from(outfit), unit_from(target),
                                              attributes_from(attributes), candidates, config));
      },
      py::arg("outfit"), py::arg("target_text"), py::arg("attributes"), py::arg("pool"),
      py::arg("tau") = fusion::kDefaultTau, py::arg("aava_sign") = 1,
      py::arg("svaf_enabled") = true);

  m.def(
      "parse_reasoning",
      [](const std::string& raw) { return to_python(reasoning::to_json(reasoning::parse_reasoning(raw))); },
      py::arg("raw"), "Parse a raw model response into a reasoning record (dict).");

  m.def(
      "write_embeddings",
      [](const std::string& path, const std::vector<std::string>& ids, const FloatArray& matrix) {
        if (matrix.ndim() != 2 || static_cast<std::size_t>(matrix.shape(0)) != ids.size()) {
          throw Error(Errc::kDimensionMismatch, "matrix must have one row per id");
        }
        const auto dim = static_cast<std::size_t>(matrix.shape(1));
        std::vector<datastore::EmbeddingRecord> records;
        for (std::size_t r = 0; r < ids.size(); ++r) {
          records.push_back({ids[r], std::vector<float>(matrix.data() + r * dim,
                                                        matrix.data() + (r + 1) * dim)});
        }
        datastore::write_embeddings(path, records, static_cast<std::uint32_t>(dim));
      },
      py::arg("path"), py::arg("ids"), py::arg("matrix"));

  m.def(
      "read_embeddings",
      [](const std::string& path) {
        const auto file = datastore::read_embeddings(path);
        std::vector<std::string> ids;
        py::array_t<float> matrix({static_cast<py::ssize_t>(file.records.size()),
                                   static_cast<py::ssize_t>(file.dim)});
        float* out = matrix.mutable_data();
        for (const auto& r : file.records) {
          ids.push_back(r.id);
          out = std::copy(r.values.begin(), r.values.end(), out);
        }
        return py::make_tuple(ids, matrix);
      },
      py::arg("path"));

  py::class_<datastore::Catalog>(m, "Catalog")
      .def_property_readonly("size", &datastore::Catalog::size)
      .def_property_readonly("dim", &datastore::Catalog::dim)
      .def_property_readonly("categories", &datastore::Catalog::categories)
      .def_property_readonly("warnings", &datastore::Catalog::warnings)
      .def("item_ids",
           [](const datastore::Catalog& c) {
             std::vector<std::string> ids;
             for (const auto& item : c.items()) ids.push_back(item.item_id);
             return ids;
           })
      .def(
          "retrieve",
          [](const datastore::Catalog& c, const FloatArray& q, std::size_t k,
             std::optional<std::string> category, unsigned threads) {
            const auto result = retrieval::retrieve_top_k(unit_from(q), c, k, category, threads);
            py::list out;
            for (const auto& e : result.entries) out.append(py::make_tuple(e.item_id, e.score));
            return out;
          },
          py::arg("q"), py::arg("k"), py::arg("category") = py::none(), py::arg("threads") = 1,
          "Top-k (item_id, cosine) pairs, ties by ascending item_id.");

  m.def("load_catalog", &datastore::load_catalog_dir, py::arg("directory"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"stylefuse"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a CLI subcommand in-process; returns (exit_code, stdout, stderr).");
}
