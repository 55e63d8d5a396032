// Python bindings: numpy float32 arrays in and out, checkpoints by path.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cogo/analysis.hpp"
#include "cogo/attack.hpp"
#include "cogo/dataset.hpp"
#include "cogo/error.hpp"
#include "cogo/frequency.hpp"
#include "cogo/harness.hpp"
#include "cogo/suppression.hpp"

namespace py = pybind11;
using namespace cogo;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Array to_array(const FloatArray& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Array(shape, std::vector<float>(a.data(), a.data() + a.size()));
}

py::array_t<float> to_numpy(const Array& a) {
  std::vector<py::ssize_t> shape(a.shape.begin(), a.shape.end());
  py::array_t<float> out(shape);
  std::copy(a.data.begin(), a.data.end(), out.mutable_data());
  return out;
}

std::vector<float> to_vec(const FloatArray& a) { return {a.data(), a.data() + a.size()}; }

}  // namespace

PYBIND11_MODULE(_cogo, m) {
  m.doc() = "COGO adversarial transferability lab";

  py::register_exception<Error>(m, "CogoError");

  // frequency
  m.def("dct2", [](const FloatArray& x) { return to_numpy(dct2(to_array(x)).coeffs); }, py::arg("image"),
        "Orthonormal 2D DCT-II of a (C,H,W) array.");
  m.def("idct2", [](const FloatArray& c) { return to_numpy(idct2(SpectrumTensor{to_array(c)})); }, py::arg("coeffs"));
  m.def(
      "ce_transform",
      [](const FloatArray& x, const FloatArray& delta, float gamma, float noise_std, float rho, std::uint64_t seed) {
        Rng rng(seed);
        return to_numpy(ce_transform(to_array(x), to_array(delta), CeConfig{gamma, noise_std, rho}, rng));
      },
      py::arg("x"), py::arg("delta"), py::arg("gamma") = 1.0f, py::arg("noise_std") = 8.0f / 255.0f,
      py::arg("rho") = 0.5f, py::arg("seed") = 0);

  // statistics and suppression
  m.def("pearson", [](const FloatArray& a, const FloatArray& b) { return pearson(to_vec(a), to_vec(b)); });
  m.def(
      "mutual_info", [](const FloatArray& a, const FloatArray& b, std::size_t bins) { return mutual_info(to_vec(a), to_vec(b), bins); },
      py::arg("a"), py::arg("b"), py::arg("bins") = 16);
  m.def(
      "histogram_entropy", [](const FloatArray& a, std::size_t bins) { return histogram_entropy(to_vec(a), bins); },
      py::arg("a"), py::arg("bins") = 16);
  m.def(
      "suppression_weights",
      [](const FloatArray& grad, std::size_t n_pairs, float alpha, std::uint64_t seed) {
        SuppressionConfig cfg;
        cfg.n_pairs = n_pairs;
        cfg.alpha = alpha;
        cfg.validate();
        Rng rng(seed);
        return suppression_weights(to_array(grad), cfg, rng).weights;
      },
      py::arg("grad"), py::arg("n_pairs") = 5, py::arg("alpha") = 0.3f, py::arg("seed") = 0,
      "Per-channel weights for a gradient whose last axis indexes channels.");

  // data and models
  m.def(
      "generate_procedural",
      [](std::uint64_t seed, std::size_t n_per_class, const std::string& split) {
        const Dataset d = generate_procedural(seed, n_per_class, parse_split(split));
        return py::make_tuple(to_numpy(d.images), d.labels);
      },
      py::arg("seed") = 0, py::arg("n_per_class") = 10, py::arg("split") = "train",
      "Returns (images (N,3,32,32), labels).");

  py::class_<LoadedModel>(m, "Model")
      .def_property_readonly("id", [](const LoadedModel& lm) { return lm.id; })
      .def_property_readonly("variant", [](const LoadedModel& lm) { return to_string(lm.model.spec().variant); })
      .def("logits", [](const LoadedModel& lm, const FloatArray& x) { return to_numpy(predict_logits(lm.model, to_array(x))); })
      .def("classify", [](const LoadedModel& lm, const FloatArray& x) { return classify(lm.model, to_array(x)); });
  m.def("load_model", &load_model, py::arg("checkpoint"));
  m.def(
      "train",
      [](const std::string& variant, const std::filesystem::path& out, const std::string& dataset, const std::string& val,
         std::size_t epochs, std::uint64_t seed) {
        TrainRequest r;
        r.variant = parse_variant(variant);
        r.out_checkpoint = out;
        r.train_data = dataset;
        r.val_data = val;
        r.config.epochs = epochs;
        r.config.seed = seed;
        py::gil_scoped_release release;
        return cmd_train(r).meta.final_accuracy;
      },
      py::arg("variant"), py::arg("out"), py::arg("dataset") = "procedural:0:200:train",
      py::arg("val") = "procedural:0:50:val", py::arg("epochs") = 30, py::arg("seed") = 0,
      "Trains one variant, writes the checkpoint and returns the final val accuracy.");

  // attacks
  m.def(
      "attack",
      [](const LoadedModel& lm, const FloatArray& image, int label, const std::string& method, std::uint64_t seed,
         std::uint64_t stream, float epsilon, std::size_t iterations, bool ce, bool is) {
        AttackConfig cfg;
        cfg.seed = seed;
        cfg.epsilon = epsilon;
        cfg.iterations = iterations;
        if (!ce) cfg = without_ce(cfg);
        if (!is) cfg.is.reset();
        cfg.validate();
        const Array x = to_array(image);
        AttackResult r;
        {
          py::gil_scoped_release release;
          r = parse_attack_method(method) == AttackMethod::mim ? mim_attack(lm.model, x, label, cfg)
                                                               : cogo_attack(lm.model, x, label, cfg, stream);
        }
        py::dict out;
        out["x_adv"] = to_numpy(r.x_adv);
        out["losses"] = r.losses;
        out["pred_before"] = r.pred_before;
        out["pred_after"] = r.pred_after;
        return out;
      },
      py::arg("model"), py::arg("image"), py::arg("label"), py::arg("method") = "cogo", py::arg("seed") = 0,
      py::arg("stream") = 0, py::arg("epsilon") = 8.0f / 255.0f, py::arg("iterations") = 10, py::arg("ce") = true,
      py::arg("is_") = true, "Attacks one (C,H,W) image; returns x_adv, losses and predictions.");

  m.def("attack_success_rate", [](const std::vector<int>& preds, const std::vector<int>& labels) {
    return attack_success_rate(preds, labels);
  });
  m.def("gradient_dispersion", [](const FloatArray& g) { return gradient_dispersion(to_array(g)); });
}
