#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sparq/codec.hpp"
#include "sparq/engine.hpp"
#include "sparq/error.hpp"
#include "sparq/mem_model.hpp"
#include "sparq/netdesc.hpp"
#include "sparq/report.hpp"
#include "sparq/synth.hpp"

namespace py = pybind11;
using namespace sparq;

namespace {

using I16Array = py::array_t<std::int16_t, py::array::c_style | py::array::forcecast>;

QTensor to_tensor(const I16Array& a, const std::string& fmt) {
  std::vector<std::uint32_t> dims;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) dims.push_back(static_cast<std::uint32_t>(a.shape(i)));
  std::vector<std::int16_t> data(a.data(), a.data() + a.size());
  return QTensor(std::move(dims), QFormat::parse(fmt), std::move(data));
}

I16Array to_array(const QTensor& t) {
  std::vector<py::ssize_t> shape(t.dims().begin(), t.dims().end());
  I16Array out(shape);
  std::copy(t.raw().begin(), t.raw().end(), out.mutable_data());
  return out;
}

// Round-trips through the same JSON the CLI writes, so both agree on keys.
py::object report_dict(const RunReport& r) {
  return py::module_::import("json").attr("loads")(to_json(r).dump());
}

MemConfig mem_from_kwargs(const py::dict& kw) {
  if (kw.empty()) return {};
  const auto text = py::module_::import("json").attr("dumps")(kw).cast<std::string>();
  return mem_config_from_json(nlohmann::json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_sparq, m) {
  m.doc() = "Sparse fixed-point inference simulator";

  // Registered base first: translators run newest first, so subclasses win.
  auto& error = py::register_exception<Error>(m, "Error");
  py::register_exception<ShapeMismatch>(m, "ShapeError", error.ptr());
  py::register_exception<IndexOutOfRange>(m, "IndexOutOfRangeError", error.ptr());
  py::register_exception<MissingArtifact>(m, "MissingArtifactError", error.ptr());

  m.def("quantize", [](double v, const std::string& fmt) { return quantize(v, QFormat::parse(fmt)).raw; },
        py::arg("value"), py::arg("fmt") = "Q8.8");
  m.def("dequantize", [](std::int16_t raw, const std::string& fmt) { return dequantize({raw, QFormat::parse(fmt)}); },
        py::arg("raw"), py::arg("fmt") = "Q8.8");

  m.def(
      "read_qt",
      [](const std::filesystem::path& p) {
        const QTensor t = read_qt(p);
        return py::make_tuple(to_array(t), t.fmt().to_string());
      },
      py::arg("path"));
  m.def(
      "write_qt", [](const std::filesystem::path& p, const I16Array& a, const std::string& fmt) {
        write_qt(p, to_tensor(a, fmt));
      },
      py::arg("path"), py::arg("array"), py::arg("fmt") = "Q8.8");

  // Compressed (SMFM) bytes for a (C, H, W) map.
  m.def(
      "encode",
      [](const I16Array& a, const std::string& fmt) {
        const auto bytes = serialize_smfm(encode_sm(to_tensor(a, fmt)));
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      },
      py::arg("array"), py::arg("fmt") = "Q8.8");
  m.def(
      "decode",
      [](const py::bytes& b) {
        const std::string s = b;
        const auto sm = deserialize_smfm({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
        const QTensor t = decode_sm(sm);
        return py::make_tuple(to_array(t), t.fmt().to_string());
      },
      py::arg("data"));
  m.def(
      "sparsity",
      [](const I16Array& a) {
        const auto s = measure_sparsity(to_tensor(a, "Q8.8"));
        py::dict d;
        d["total_pixels"] = s.total_pixels;
        d["zero_pixels"] = s.zero_pixels;
        d["sparsity"] = s.sparsity;
        d["per_channel_sparsity"] = s.per_channel_sparsity;
        return d;
      },
      py::arg("array"));

  m.def(
      "random_vs_burst_ratio",
      [](std::uint64_t n, const py::kwargs& kw) { return random_vs_burst_ratio(n, mem_from_kwargs(kw)); },
      py::arg("n_words"));
  m.def(
      "cost_trace",
      [](const std::string& csv, const py::kwargs& kw) {
        const auto r = cost_trace(AccessTrace::from_csv(csv), mem_from_kwargs(kw));
        py::dict d;
        d["cycles"] = r.cycles;
        d["row_activations"] = r.row_activations;
        d["dram_words"] = r.dram_words;
        d["sram_words"] = r.sram_words;
        d["energy_pj"] = r.energy_pj;
        return d;
      },
      py::arg("trace_csv"));

  m.def(
      "brain_budget",
      [](std::optional<double> rate, std::optional<double> fanout, std::optional<double> neurons,
         std::optional<double> esyn, std::optional<double> power) {
        const BrainBudget b = solve_for({rate, fanout, neurons, esyn, power});
        py::dict d;
        d["rate_hz"] = *b.rate_hz;
        d["fanout"] = *b.fanout;
        d["neurons"] = *b.neurons;
        d["energy_per_syn_j"] = *b.energy_per_syn_j;
        d["power_w"] = *b.power_w;
        return d;
      },
      py::kw_only(), py::arg("rate_hz") = py::none(), py::arg("fanout") = py::none(),
      py::arg("neurons") = py::none(), py::arg("energy_per_syn_j") = py::none(), py::arg("power_w") = py::none());

  // Runs a network file on one input: a (C, H, W) map for conv nets or a
  // (T, I) sequence for recurrent ones, both raw values in the first layer's
  // activation format. Returns (report, output).
  m.def(
      "run",
      [](const std::filesystem::path& net_path, const I16Array& input, const std::string& mode, std::uint64_t seed,
         std::optional<double> theta) {
        NetworkDesc net = load_network(net_path, seed);
        RunOptions opts;
        opts.mode = parse_run_mode(mode);
        opts.name = net.name;
        if (net.mem_config) opts.mem = load_mem_config(*net.mem_config);
        if (net.kind == NetworkKind::Conv) {
          const QTensor x = to_tensor(input, net.conv.front().in_fmt.to_string());
          auto r = run_network(net.conv, x, opts);
          return py::make_tuple(report_dict(r.report), to_array(r.output));
        }
        if (theta) {
          for (auto& l : net.gru) l.theta = quantize(*theta, l.act_fmt);
        }
        const QTensor seq = to_tensor(input, net.gru.front().act_fmt.to_string());
        auto r = run_sequence(net.gru, unstack_sequence(seq), opts);
        return py::make_tuple(report_dict(r.report), to_array(stack_sequence(r.outputs)));
      },
      py::arg("net"), py::arg("input"), py::kw_only(), py::arg("mode") = "sparse", py::arg("seed") = 0,
      py::arg("theta") = py::none());
}
