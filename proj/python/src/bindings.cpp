// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include "mxsafe/block_quant.hpp"
#include "mxsafe/error.hpp"
#include "mxsafe/error_metrics.hpp"
#include "mxsafe/safe_mac.hpp"
#include "mxsafe/scalar_codec.hpp"
#include "mxsafe/tensor_store.hpp"

namespace py = pybind11;
using namespace mxsafe;

namespace {

FormatId format_arg(const std::string& name) {
  const auto f = parse_format(name);
  if (!f) throw Error(ErrorCode::InvalidArgument, "unknown format '" + name + "'");
  return *f;
}

TileShape tile_arg(py::object tile) {
  if (py::isinstance<py::str>(tile)) return parse_tile(tile.cast<std::string>());
  const auto t = tile.cast<std::pair<int, int>>();
  if (t.first <= 0 || t.second <= 0) throw Error(ErrorCode::InvalidArgument, "tile dims must be positive");
  return {t.first, t.second};
}

Matrix matrix_arg(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() == 1) {
    return Matrix(1, static_cast<std::size_t>(a.shape(0)), std::vector<double>(a.data(), a.data() + a.size()));
  }
  if (a.ndim() != 2) throw Error(ErrorCode::InvalidArgument, "expected a 1-D or 2-D array");
  return Matrix(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                std::vector<double>(a.data(), a.data() + a.size()));
}

template <typename T>
py::array_t<T> to_array(const BasicMatrix<T>& m) {
  py::array_t<T> out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

py::dict report_dict(const ErrorReport& r) {
  py::dict d;
  d["elements"] = r.element_count;
  d["nonzero"] = r.nonzero_count;
  d["underflow"] = r.underflow_count;
  d["mse"] = r.mse();
  d["max_err"] = r.max_abs_err;
  d["underflow_ratio"] = r.underflow_ratio();
  d["mean_distance"] = r.mean_distance();
  d["distance_histogram"] = r.distance_histogram;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Microscaling block quantization: codecs, error metrics and a MAC datapath model";

  // Leaked on purpose: the translator may run during interpreter teardown.
  static PyObject* error_type = PyErr_NewException("mxsafe._core.MxError", PyExc_ValueError, nullptr);
  m.attr("MxError") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_steal<py::object>(PyObject_CallOneArg(error_type, py::str(e.what()).ptr()));
      exc.attr("code") = std::string(error_code_name(e.code()));
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  m.def("formats", [] {
    std::vector<std::string> names;
    for (FormatId f : all_formats()) names.emplace_back(element_format(f).name);
    return names;
  });

  m.def(
      "encode",
      [](double x, int shared_exp, const std::string& format) {
        const Quantized q = encode(x, shared_exp, format_arg(format));
        return py::make_tuple(q.value, q.code.bits);
      },
      py::arg("x"), py::arg("shared_exp"), py::arg("format") = "mxsf",
      "Quantize one value in a block with the given shared exponent; returns (value, code).");
  m.def(
      "decode",
      [](int code, int shared_exp, const std::string& format) {
        if (code < 0 || code > 255) throw Error(ErrorCode::MalformedCode, "code out of byte range");
        return decode({static_cast<std::uint8_t>(code), format_arg(format)}, shared_exp);
      },
      py::arg("code"), py::arg("shared_exp"), py::arg("format") = "mxsf");

  py::class_<QuantizedTensor>(m, "QuantizedTensor")
      .def_property_readonly("shape", [](const QuantizedTensor& q) { return py::make_tuple(q.rows(), q.cols()); })
      .def_property_readonly("tile", [](const QuantizedTensor& q) { return py::make_tuple(q.tile().rows, q.tile().cols); })
      .def_property_readonly("format", [](const QuantizedTensor& q) { return std::string(element_format(q.format()).name); })
      .def_property_readonly("transposed", &QuantizedTensor::transposed)
      .def_property_readonly("block_count", &QuantizedTensor::block_count)
      .def("dequantize", [](const QuantizedTensor& q) { return to_array(q.dequantize()); })
      .def("transpose_view", &QuantizedTensor::transpose_view)
      .def("shared_exponents",
           [](const QuantizedTensor& q) {
             py::array_t<int> out({q.grid_rows(), q.grid_cols()});
             auto v = out.mutable_unchecked<2>();
             for (std::size_t br = 0; br < q.grid_rows(); ++br)
               for (std::size_t bc = 0; bc < q.grid_cols(); ++bc) v(br, bc) = q.block(br, bc).shared_exp;
             return out;
           })
      .def("to_bytes",
           [](const QuantizedTensor& q) {
             const auto bytes = serialize_mxb(q);
             return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
           })
      .def_static("from_bytes", [](const py::bytes& b) {
        const std::string s = b;
        return deserialize_mxb(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
      });

  m.def(
      "quantize",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a, const std::string& format,
         py::object tile) { return quantize_tensor(matrix_arg(a), tile_arg(tile), format_arg(format)); },
      py::arg("array"), py::arg("format") = "mxsf", py::arg("tile") = py::make_tuple(1, 32));

  m.def(
      "error_report",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a, const std::string& format,
         py::object tile) { return report_dict(tensor_error_report(matrix_arg(a), format_arg(format), tile_arg(tile))); },
      py::arg("array"), py::arg("format") = "mxsf", py::arg("tile") = py::make_tuple(1, 32));

  m.def(
      "gemm",
      [](const QuantizedTensor& a, const QuantizedTensor& b, const std::string& mapping, bool exact) {
        Mapping mp;
        if (mapping == "1d") {
          mp = Mapping::OneD;
        } else if (mapping == "tiled") {
          mp = Mapping::Tiled;
        } else {
          throw Error(ErrorCode::InvalidArgument, "mapping must be '1d' or 'tiled'");
        }
        const MatrixF c = [&] {
          py::gil_scoped_release release;
          return gemm(a, b, mp, exact ? MacConfig::exact() : MacConfig{});
        }();
        return to_array(c);
      },
      py::arg("a"), py::arg("b"), py::arg("mapping") = "1d", py::arg("exact") = false);

  m.def(
      "count_quantization_events",
      [](std::size_t rows, std::size_t k, std::size_t n, py::object tile, bool training) {
        return count_quantization_events({rows, k, n}, tile_arg(tile),
                                         training ? StepKind::Training : StepKind::Inference);
      },
      py::arg("m"), py::arg("k"), py::arg("n"), py::arg("tile"), py::arg("training") = true);

  m.def(
      "empirical_max_error",
      [](const std::string& format, int distance, int shared_exp) {
        return empirical_max_error(format_arg(format), distance, shared_exp);
      },
      py::arg("format"), py::arg("distance"), py::arg("shared_exp") = 0);
  m.def("max_error_int", &max_error_int, py::arg("shared_exp"), py::arg("exponent"), py::arg("m_i") = 8);
  m.def("max_error_fp", &max_error_fp, py::arg("exponent"), py::arg("local_exp"), py::arg("m_f"));
}
