#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "maxoutlab/averaging.hpp"
#include "maxoutlab/config.hpp"
#include "maxoutlab/dataio.hpp"
#include "maxoutlab/dropout.hpp"
#include "maxoutlab/network.hpp"
#include "maxoutlab/pwlab.hpp"

namespace py = pybind11;
using namespace maxoutlab;

namespace {

Tensor tensor_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<std::size_t> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<std::size_t>(i)] =
        static_cast<std::size_t>(a.shape(i));
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> numpy_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
    py::array_t<double> a(shape);
    std::copy(t.data.begin(), t.data.end(), a.mutable_data());
    return a;
}

std::vector<double> probs_config(const NetworkSpec& spec, double p_input, double p_hidden) {
    std::vector<double> probs(spec.layer_count(), p_hidden);
    probs[0] = p_input;
    return probs;
}

struct PyModel {
    NetworkSpec spec;
    Parameters params;

    py::array_t<double> forward_probs(const py::array_t<double>& x) const {
        return numpy_from_tensor(forward(params, spec, tensor_from_numpy(x)).probs);
    }
    py::array_t<double> scaled_probs(const py::array_t<double>& x, double p_input,
                                     double p_hidden) const {
        return numpy_from_tensor(scaled_inference(params, spec,
                                                  probs_config(spec, p_input, p_hidden),
                                                  tensor_from_numpy(x)));
    }
    py::array_t<double> sampled_geo_probs(const py::array_t<double>& x, int n,
                                          std::uint64_t seed, double p_input,
                                          double p_hidden) const {
        Prng rng(seed, 0xAB6);
        return numpy_from_tensor(geometric_mean_sampled(params, spec, tensor_from_numpy(x), n,
                                                        rng,
                                                        probs_config(spec, p_input, p_hidden)));
    }
    void save(const std::string& path) const { save_model(path, spec, params); }
    std::string spec_json() const { return spec_to_config(spec).dump(); }
};

PyModel model_load(const std::string& path) {
    LoadedModel m = load_model(path);
    return {std::move(m.spec), std::move(m.params)};
}

PyModel train_from_config(const std::string& config_json) {
    const ExperimentConfig config = parse_experiment_config(nlohmann::json::parse(config_json));
    const PreparedData data = prepare_data(config.dataset);
    const FitResult fit = train(config.model, data.train, data.valid, config.training);
    return {config.model, fit.params};
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "maxout/dropout laboratory core";

    py::class_<PyModel>(m, "Model")
        .def_static("load", &model_load)
        .def("forward_probs", &PyModel::forward_probs)
        .def("scaled_probs", &PyModel::scaled_probs, py::arg("x"), py::arg("p_input") = 0.8,
             py::arg("p_hidden") = 0.5)
        .def("sampled_geo_probs", &PyModel::sampled_geo_probs, py::arg("x"), py::arg("n"),
             py::arg("seed") = 0, py::arg("p_input") = 0.8, py::arg("p_hidden") = 0.5)
        .def("save", &PyModel::save)
        .def("spec_json", &PyModel::spec_json);

    m.def("train_from_config", &train_from_config, py::arg("config_json"));

    m.def("matmul", [](const py::array_t<double>& a, const py::array_t<double>& b) {
        return numpy_from_tensor(matmul(tensor_from_numpy(a), tensor_from_numpy(b)));
    });

    m.def("load_idx", [](const std::string& images, const std::string& labels) {
        const Dataset d = load_idx(images, labels);
        return py::make_tuple(numpy_from_tensor(d.inputs), d.labels);
    });
    m.def("synth_digits", [](std::uint64_t seed, std::size_t n) {
        const Dataset d = synth_digits(seed, n);
        return py::make_tuple(numpy_from_tensor(d.inputs), d.labels);
    });
    m.def("gcn", [](const py::array_t<double>& x, double scale, double lambda) {
        return numpy_from_tensor(gcn(tensor_from_numpy(x), scale, lambda));
    });

    m.def("exact_mask_average",
          [](const py::array_t<double>& w, const py::array_t<double>& b,
             const py::array_t<double>& v, double p) {
              return numpy_from_tensor(exact_mask_average(tensor_from_numpy(w),
                                                          tensor_from_numpy(b),
                                                          tensor_from_numpy(v), p));
          });
    m.def("kl_divergence", [](const py::array_t<double>& p, const py::array_t<double>& q) {
        return kl_divergence(tensor_from_numpy(p), tensor_from_numpy(q));
    });

    m.def("pwl_sup_error",
          [](const std::string& target, double lo, double hi, std::size_t k) {
              std::function<double(double)> f;
              if (target == "abs")
                  f = [](double x) { return std::abs(x); };
              else if (target == "relu")
                  f = [](double x) { return std::max(0.0, x); };
              else if (target == "sin3x")
                  f = [](double x) { return std::sin(3.0 * x); };
              else if (target == "quadratic")
                  f = [](double x) { return x * x; };
              else
                  throw std::invalid_argument("unknown target " + target);
              return build_two_unit_approximator(f, lo, hi, k).sup_error;
          },
          py::arg("target"), py::arg("lo"), py::arg("hi"), py::arg("k"));
}
