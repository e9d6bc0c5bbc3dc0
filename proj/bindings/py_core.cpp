// Python bindings for the load-flow core.  Structured values cross the
// boundary as JSON-compatible dicts; bulk numeric data as NumPy arrays.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "json.hpp"
#include "loadflow/dataset.hpp"
#include "loadflow/experiments.hpp"
#include "loadflow/grid.hpp"
#include "loadflow/models.hpp"
#include "loadflow/powerflow.hpp"
#include "loadflow/rng.hpp"
#include "loadflow/training.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

json to_nlohmann(const py::handle& obj) {
  return json::parse(
      py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object to_python(const json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

loadflow::grid::GridCase grid_from_arg(const py::handle& spec) {
  if (py::isinstance<py::str>(spec)) {
    // A string argument is a path to a case file.
    return loadflow::grid::load_grid_case(spec.cast<std::string>());
  }
  return loadflow::grid::grid_case_from_json(to_nlohmann(spec));
}

py::array_t<double> dataset_matrix(const loadflow::datagen::Dataset& ds) {
  // Column-major storage maps onto a Fortran-ordered array without copying
  // strides (we still copy the buffer so the Python object owns its data).
  py::array_t<double, py::array::f_style> out(
      {static_cast<py::ssize_t>(ds.n_samples),
       static_cast<py::ssize_t>(ds.n_cols())});
  std::memcpy(out.mutable_data(), ds.data.data(),
              ds.data.size() * sizeof(double));
  return out;
}

py::dict dataset_to_python(const loadflow::datagen::Dataset& ds) {
  py::dict out;
  out["grid"] = to_python(ds.grid.to_json());
  out["seed"] = ds.seed;
  out["columns"] = ds.columns;
  out["n_samples"] = ds.n_samples;
  out["discarded"] = ds.discarded;
  out["fingerprint"] = ds.fingerprint();
  out["data"] = dataset_matrix(ds);
  return out;
}

py::dict solve_py(const py::handle& case_spec, const py::handle& injections,
                  double tolerance, int max_iterations) {
  auto grid = grid_from_arg(case_spec);
  auto inj = loadflow::pf::make_base_injections(grid);
  if (!injections.is_none())
    inj = loadflow::pf::injections_from_json(grid, to_nlohmann(injections));
  loadflow::pf::SolverSettings settings;
  settings.tolerance = tolerance;
  settings.max_iterations = max_iterations;
  auto solution = loadflow::pf::solve(grid, inj, settings);
  return to_python(solution.to_json(grid));
}

py::dict generate_py(const py::handle& case_spec, std::int64_t n,
                     std::uint64_t seed, const py::handle& ranges,
                     int workers) {
  auto grid = grid_from_arg(case_spec);
  loadflow::datagen::SamplingRanges r;
  if (!ranges.is_none())
    r = loadflow::datagen::sampling_ranges_from_json(to_nlohmann(ranges));
  return dataset_to_python(
      loadflow::datagen::generate_dataset(grid, n, seed, r, {}, workers));
}

py::dict train_py(const std::string& data_path, const std::string& arch,
                  double learning_rate, int batch_size, std::int64_t subset,
                  std::uint64_t seed, int max_epochs,
                  const std::string& checkpoint_path) {
  auto dataset = loadflow::datagen::read_dataset(data_path);
  loadflow::model::ModelConfig config;
  config.architecture = loadflow::model::architecture_from_string(arch);
  loadflow::train::TrainingSettings settings;
  settings.learning_rate = learning_rate;
  settings.batch_size = batch_size;
  settings.training_subset_size = subset;
  settings.max_epochs = max_epochs;
  auto result =
      loadflow::train::train_surrogate(dataset, config, settings, seed);
  if (!checkpoint_path.empty())
    loadflow::model::write_checkpoint(result.checkpoint, checkpoint_path);

  py::dict out;
  out["architecture"] = arch;
  out["epochs_run"] = result.epochs_run;
  out["best_epoch"] = result.best_epoch;
  out["diverged"] = result.diverged;
  out["best_val_mse"] = result.best_val_mse;
  out["final_val_mse"] = result.final_val_mse;
  out["train_seconds"] = result.train_seconds;
  if (!result.diverged) out["test_mse"] = result.test_mse;
  py::list history;
  for (const auto& e : result.history) {
    py::dict row;
    row["epoch"] = e.epoch;
    row["train_mse"] = e.train_mse;
    row["val_mse"] = e.val_mse;
    row["seconds"] = e.seconds;
    history.append(row);
  }
  out["history"] = history;
  return out;
}

py::array_t<double> predict_py(const std::string& checkpoint_path,
                               py::array_t<double, py::array::c_style |
                                                       py::array::forcecast>
                                   features) {
  auto ckpt = loadflow::model::read_checkpoint(checkpoint_path);
  auto model = loadflow::model::surrogate_from_checkpoint(ckpt);
  if (features.ndim() != 2)
    throw loadflow::ValidationError("features must be a 2-d array");
  const auto rows = static_cast<std::int64_t>(features.shape(0));
  const int width = loadflow::model::feature_width(ckpt.grid);
  if (static_cast<int>(features.shape(1)) != width)
    throw loadflow::ValidationError(
        "features must have " + std::to_string(width) + " columns");

  py::array_t<double> out(
      {static_cast<py::ssize_t>(rows),
       static_cast<py::ssize_t>(loadflow::model::target_width(ckpt.grid))});
  loadflow::nn::Matrix xb, pred;
  const std::int64_t chunk = 4096;
  for (std::int64_t row = 0; row < rows; row += chunk) {
    const int b = static_cast<int>(std::min(chunk, rows - row));
    if (xb.rows() != b) xb = loadflow::nn::Matrix(b, width);
    std::memcpy(xb.data(), features.data(row, 0),
                static_cast<std::size_t>(b) * width * sizeof(double));
    ckpt.x_standardizer.transform(xb, xb);
    model->forward(xb, pred);
    ckpt.y_standardizer.inverse_transform(pred, pred);
    std::memcpy(out.mutable_data(row, 0), pred.data(),
                pred.size() * sizeof(double));
  }
  return out;
}

py::dict checkpoint_info_py(const std::string& path) {
  auto ckpt = loadflow::model::read_checkpoint(path);
  py::dict out;
  out["architecture"] = loadflow::model::to_string(ckpt.config.architecture);
  out["config"] = to_python(ckpt.config.to_json());
  out["grid"] = to_python(ckpt.grid.to_json());
  out["init_seed"] = ckpt.init_seed;
  out["dataset_fingerprint"] = ckpt.dataset_fingerprint;
  out["training_meta"] = to_python(ckpt.training_meta);
  py::list params;
  for (const auto& [name, values] : ckpt.params) {
    py::dict p;
    p["name"] = name;
    p["rows"] = values.rows();
    p["cols"] = values.cols();
    params.append(p);
  }
  out["params"] = params;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "AC load-flow solver and neural surrogates";
  m.attr("rng_algorithm") = loadflow::kRngAlgorithm;

  m.def("solve", &solve_py, py::arg("case"), py::arg("injections") = py::none(),
        py::arg("tolerance") = 1e-8, py::arg("max_iterations") = 50,
        "Solve one load-flow case; `case` is a path or a case dict, "
        "`injections` an injections dict.  Returns the per-bus solution.");

  m.def("generate", &generate_py, py::arg("case"), py::arg("n"),
        py::arg("seed"), py::arg("ranges") = py::none(),
        py::arg("workers") = 0,
        "Sample and solve `n` cases.  Returns columns plus an "
        "(n, columns) array of inputs, outputs, and solver metadata.");

  m.def(
      "read_dataset",
      [](const std::string& path) {
        return dataset_to_python(loadflow::datagen::read_dataset(path));
      },
      py::arg("path"), "Read a binary dataset file.");

  m.def(
      "write_dataset",
      [](const py::dict& dataset, const std::string& path) {
        loadflow::datagen::Dataset ds;
        ds.grid = loadflow::grid::grid_case_from_json(
            to_nlohmann(dataset["grid"]));
        ds.seed = dataset["seed"].cast<std::uint64_t>();
        ds.columns = dataset["columns"].cast<std::vector<std::string>>();
        ds.n_samples = dataset["n_samples"].cast<std::int64_t>();
        if (dataset.contains("discarded"))
          ds.discarded = dataset["discarded"].cast<std::int64_t>();
        auto data = dataset["data"]
                        .cast<py::array_t<double, py::array::f_style |
                                                      py::array::forcecast>>();
        if (data.ndim() != 2 || data.shape(0) != ds.n_samples ||
            data.shape(1) != static_cast<py::ssize_t>(ds.columns.size()))
          throw loadflow::ValidationError(
              "data must be an (n_samples, columns) array");
        ds.data.assign(data.data(), data.data() + data.size());
        loadflow::datagen::write_dataset(ds, path);
      },
      py::arg("dataset"), py::arg("path"),
      "Write a dataset dict (as returned by generate/read_dataset) to disk.");

  m.def("train", &train_py, py::arg("data"), py::arg("arch"),
        py::arg("learning_rate") = 1e-3, py::arg("batch_size") = 32,
        py::arg("subset") = 0, py::arg("seed") = 0, py::arg("max_epochs") = 50,
        py::arg("checkpoint") = std::string(),
        "Train a surrogate on a dataset file; optionally write a checkpoint. "
        "Returns the training summary with per-epoch history.");

  m.def("predict", &predict_py, py::arg("checkpoint"), py::arg("features"),
        "Run a checkpointed surrogate over raw (unstandardized) feature rows; "
        "returns raw target rows.");

  m.def("checkpoint_info", &checkpoint_info_py, py::arg("path"),
        "Header data of a checkpoint file (no parameter payload).");

  m.def(
      "dataset_columns",
      [](const py::handle& case_spec) {
        return loadflow::datagen::dataset_columns(grid_from_arg(case_spec));
      },
      py::arg("case"), "Column order of datasets generated for this grid.");

  m.def(
      "validate_case",
      [](const py::handle& case_spec) {
        auto grid = grid_from_arg(case_spec);
        return to_python(grid.to_json());
      },
      py::arg("case"),
      "Parse and validate a case (path or dict); returns its canonical form.");

  static py::exception<loadflow::pf::NonConvergenceError> exc_nonconv(
      m, "NonConvergenceError", PyExc_RuntimeError);
  static py::exception<loadflow::Error> exc_error(m, "Error",
                                                  PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const loadflow::pf::NonConvergenceError& e) {
      exc_nonconv(e.what());
    } catch (const loadflow::Error& e) {
      exc_error(e.what());
    }
  });
}
