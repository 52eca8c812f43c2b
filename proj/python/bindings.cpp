#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "msdc/dataset.hpp"
#include "msdc/deq.hpp"
#include "msdc/errors.hpp"
#include "msdc/graph.hpp"
#include "msdc/io.hpp"
#include "msdc/ista.hpp"
#include "msdc/metrics.hpp"
#include "msdc/model.hpp"
#include "msdc/stp.hpp"
#include "msdc/training.hpp"

namespace py = pybind11;
using namespace msdc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor from_array(const Array& a) {
  const auto r = a.ndim();
  if (r < 1 || r > 4) throw ShapeError("expected an array with 1 to 4 dimensions");
  std::size_t ext[4] = {1, 1, 1, 1};
  for (py::ssize_t i = 0; i < r; ++i) ext[4 - r + i] = static_cast<std::size_t>(a.shape(i));
  return Tensor(Shape{ext[0], ext[1], ext[2], ext[3]}, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t, int rank) {
  const Shape& s = t.shape();
  const std::size_t all[4] = {s.n, s.c, s.h, s.w};
  std::vector<py::ssize_t> shape;
  for (int i = 4 - rank; i < 4; ++i) shape.push_back(static_cast<py::ssize_t>(all[i]));
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Array image_array(const Tensor& t) { return to_array(t, 2); }

Tensor image_tensor(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D image");
  return from_array(a);
}

Matrix to_eigen(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D matrix");
  return to_matrix(from_array(a));
}

Array from_eigen(const Matrix& m) { return image_array(to_tensor(m)); }

py::dict solve_dict(const FixedPointResult& r) {
  py::dict d;
  d["x"] = to_array(r.x_star, 1);
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["residual"] = r.residual_norm;
  d["residual_trace"] = r.residual_trace;
  return d;
}

SolverConfig solver(int max_iter, double tol, int memory, double beta) {
  SolverConfig c;
  c.max_iter = max_iter;
  c.tol = tol;
  c.anderson_memory = memory;
  c.beta = beta;
  return c;
}

FixedPointMap vector_map(const py::function& f) {
  return [f](const Tensor& x) {
    Array out = f(to_array(x, 1)).cast<Array>();
    if (static_cast<std::size_t>(out.size()) != x.size()) throw ShapeError("map changed the state size");
    return Tensor(x.shape(), std::vector<double>(out.data(), out.data() + out.size()));
  };
}

}  // namespace

PYBIND11_MODULE(msdc, m) {
  m.doc() = "Compressive sensing with separable sampling and a multi-scale dilated equilibrium block";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_RuntimeError);
  py::register_exception<IngestError>(m, "IngestError", PyExc_IOError);

  m.def("size_for_ratio", &size_for_ratio, py::arg("n"), py::arg("ratio"));
  m.def("gaussian_init", [](std::size_t rows, std::size_t cols, std::uint64_t seed) {
    return from_eigen(gaussian_init(rows, cols, seed));
  }, py::arg("m"), py::arg("n"), py::arg("seed"));
  m.def("stp_measure", [](const Array& x, const Array& phi1, const Array& phi2) {
    return from_eigen(to_eigen(phi1) * to_eigen(x) * to_eigen(phi2).transpose());
  }, py::arg("x"), py::arg("phi1"), py::arg("phi2"), "phi1 @ x @ phi2.T");
  m.def("measure_single", [](const Array& x, const Array& phi) {
    return from_eigen(measure_single(to_eigen(x), to_eigen(phi)));
  }, py::arg("x"), py::arg("phi"), "x @ phi.T");

  m.def("hmse", [](const Array& a, const Array& b) { return hmse(from_array(a), from_array(b)); });
  m.def("psnr", [](const Array& x, const Array& ref, double peak) {
    return psnr(image_tensor(x), image_tensor(ref), peak);
  }, py::arg("x"), py::arg("ref"), py::arg("peak") = 1.0);
  m.def("ssim", [](const Array& x, const Array& ref) { return ssim(image_tensor(x), image_tensor(ref)); });

  m.def("soft_threshold", [](const Array& v, double lam) {
    const Vector x = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    const Vector out = soft_threshold(x, lam);
    Array res(std::vector<py::ssize_t>(v.shape(), v.shape() + v.ndim()));
    std::copy(out.data(), out.data() + out.size(), res.mutable_data());
    return res;
  }, py::arg("v"), py::arg("lam"));
  m.def("conv2d", [](const Array& x, const Array& k, int dilation) {
    if (x.ndim() != 4 || k.ndim() != 4) throw ShapeError("conv2d expects NCHW input and OIHW kernel");
    return to_array(conv2d_forward(from_array(x), from_array(k), dilation), 4);
  }, py::arg("x"), py::arg("kernel"), py::arg("dilation") = 1, "zero-padded 'same' convolution");

  m.def("ista_solve", [](const Array& phi, const Array& y, double lam, int max_iter, double tol) {
    const SensingOperator op = SensingOperator::dense(to_eigen(phi));
    const Tensor yt = from_array(y);
    const SparseProblem p{op, Eigen::Map<const Vector>(yt.data().data(), static_cast<Eigen::Index>(yt.size())), lam,
                          1.0 / lipschitz_bound(op)};
    const IstaResult r = ista_solve(p, OrthoTransform::identity(static_cast<std::size_t>(op.cols())), max_iter, tol);
    py::dict d;
    d["x"] = std::vector<double>(r.x.data(), r.x.data() + r.x.size());
    d["objective_trace"] = r.objective_trace;
    d["iterations"] = r.iterations;
    d["converged"] = r.converged;
    return d;
  }, py::arg("phi"), py::arg("y"), py::arg("lam"), py::arg("max_iter") = 500, py::arg("tol") = 1e-8);

  m.def("picard_solve", [](const py::function& f, const Array& x0, int max_iter, double tol) {
    return solve_dict(picard_solve(vector_map(f), from_array(x0), solver(max_iter, tol, 5, 1.0)));
  }, py::arg("f"), py::arg("x0"), py::arg("max_iter") = 50, py::arg("tol") = 1e-5);
  m.def("anderson_solve", [](const py::function& f, const Array& x0, int max_iter, double tol, int memory, double beta) {
    return solve_dict(anderson_solve(vector_map(f), from_array(x0), solver(max_iter, tol, memory, beta)));
  }, py::arg("f"), py::arg("x0"), py::arg("max_iter") = 50, py::arg("tol") = 1e-5, py::arg("memory") = 5,
     py::arg("beta") = 1.0);

  m.def("read_pgm", [](const std::string& path) { return image_array(to_unit_tensor(read_pgm(path))); },
        "PGM as a float image in [0, 1]");
  m.def("write_pgm", [](const std::string& path, const Array& img) {
    write_pgm(path, from_unit_tensor(image_tensor(img)));
  });
  m.def("generate_synthetic", [](const std::string& kind, std::size_t n, std::uint64_t seed, std::size_t spikes) {
    return image_array(to_unit_tensor(generate_synthetic(parse_synthetic_kind(kind), n, seed, spikes)));
  }, py::arg("kind"), py::arg("n"), py::arg("seed"), py::arg("spikes") = 5);

  py::class_<Model>(m, "Model")
      .def_static("init", [](std::size_t n, double ratio, std::size_t channels, std::size_t cardinality,
                             std::size_t se_reduction, std::uint64_t seed, double head_gain) {
        return Model::init(n, ratio, BlockConfig{channels, cardinality, se_reduction, head_gain}, seed);
      }, py::arg("n"), py::arg("ratio"), py::arg("channels") = 32, py::arg("cardinality") = 4,
         py::arg("se_reduction") = 4, py::arg("seed") = 0, py::arg("head_gain") = 0.1)
      .def_static("identity", [](std::size_t n, std::size_t channels, std::size_t cardinality,
                                 std::size_t se_reduction, std::uint64_t seed) {
        return Model::identity(n, BlockConfig{channels, cardinality, se_reduction}, seed);
      }, py::arg("n"), py::arg("channels") = 32, py::arg("cardinality") = 4, py::arg("se_reduction") = 4,
         py::arg("seed") = 0)
      .def_static("load", [](const std::string& path) { return load_checkpoint(path); })
      .def("save", [](const Model& self, const std::string& path) { save_checkpoint(path, self); })
      .def_property_readonly("n", [](const Model& self) { return self.stp.n; })
      .def_property_readonly("m", [](const Model& self) { return self.stp.m; })
      .def_property_readonly("cs_ratio", [](const Model& self) { return self.stp.cs_ratio(); })
      .def_property_readonly("phi1", [](const Model& self) { return image_array(self.stp.phi1); })
      .def_property_readonly("phi2", [](const Model& self) { return image_array(self.stp.phi2); })
      .def("measure", [](const Model& self, const Array& img) { return image_array(measure(self, image_tensor(img))); })
      .def("initial_reconstruct", [](const Model& self, const Array& y) {
        return image_array(initial_reconstruct(self, image_tensor(y)));
      })
      .def("reconstruct", [](const Model& self, const Array& y, int max_iter, double tol, const std::string& mask) {
        const Reconstruction r = reconstruct_deq(self, image_tensor(y), solver(max_iter, tol, 5, 1.0), parse_mask(mask));
        py::dict d;
        d["image"] = image_array(r.image);
        d["iterations"] = r.solve.iterations;
        d["converged"] = r.solve.converged;
        d["diverged"] = r.diverged;
        d["residual_trace"] = r.solve.residual_trace;
        return d;
      }, py::arg("y"), py::arg("max_iter") = 50, py::arg("tol") = 1e-5, py::arg("mask") = "1111111");

  m.def("train", [](const Model& model, const std::vector<Array>& images, std::size_t steps, std::size_t batch,
                    double lr, std::uint64_t seed, int forward_iters, int backward_iters, bool jacobian_free) {
    std::vector<Tensor> ts;
    for (const Array& a : images) ts.push_back(image_tensor(a));
    TrainConfig cfg;
    cfg.image_side = model.stp.n;
    cfg.cs_ratio = model.stp.cs_ratio();
    cfg.steps = steps;
    cfg.batch = batch;
    cfg.lr = lr;
    cfg.seed = seed;
    cfg.forward.max_iter = forward_iters;
    cfg.backward.max_iter = backward_iters;
    cfg.adjoint_fallback = jacobian_free ? AdjointFallback::JacobianFree : AdjointFallback::Neumann;
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = train(model, make_dataset(ts), cfg);
    }
    std::vector<double> losses;
    for (const StepLog& s : r.steps) losses.push_back(s.loss);
    return py::make_tuple(r.model, losses, r.diagnostics);
  }, py::arg("model"), py::arg("images"), py::arg("steps"), py::arg("batch") = 8, py::arg("lr") = 1e-4,
     py::arg("seed") = 0, py::arg("forward_iters") = 30, py::arg("backward_iters") = 30,
     py::arg("jacobian_free") = false);
}
