#include "sparq/netdesc.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>

#include "sparq/error.hpp"
#include "sparq/io.hpp"
#include "sparq/report.hpp"
#include "sparq/synth.hpp"

namespace sparq {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json scalar_to_json(const std::string& s, const std::string& tag) {
  if (tag == "!") return s;  // quoted
  if (s == "true" || s == "True" || s == "yes") return true;
  if (s == "false" || s == "False" || s == "no") return false;
  if (s == "~" || s == "null") return nullptr;
  {
    std::int64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size()) return v;
  }
  {
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(v)) return v;
  }
  return s;
}

json node_to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Scalar: return scalar_to_json(n.Scalar(), n.Tag());
    case YAML::NodeType::Sequence: {
      json a = json::array();
      for (const auto& e : n) a.push_back(node_to_json(e));
      return a;
    }
    case YAML::NodeType::Map: {
      json o = json::object();
      for (const auto& kv : n) o[kv.first.Scalar()] = node_to_json(kv.second);
      return o;
    }
  }
  return nullptr;
}

// Thin accessor layer that turns json type errors into InvalidArgument with
// the layer context attached.
struct Fields {
  const json& obj;
  std::string where;

  bool has(const char* key) const { return obj.contains(key) && !obj.at(key).is_null(); }

  const json& at(const char* key) const {
    if (!has(key)) throw InvalidArgument(where + ": missing field '" + key + "'");
    return obj.at(key);
  }

  std::uint32_t u32(const char* key) const {
    const json& v = at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0 || v.get<std::int64_t>() > UINT32_MAX) {
      throw InvalidArgument(where + ": '" + key + "' must be a non-negative integer");
    }
    return v.get<std::uint32_t>();
  }
  std::uint32_t u32(const char* key, std::uint32_t dflt) const { return has(key) ? u32(key) : dflt; }

  double number(const char* key, double dflt) const {
    if (!has(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_number()) throw InvalidArgument(where + ": '" + key + "' must be a number");
    return v.get<double>();
  }

  bool boolean(const char* key, bool dflt) const {
    if (!has(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw InvalidArgument(where + ": '" + key + "' must be true or false");
    return v.get<bool>();
  }

  std::string string(const char* key, const std::string& dflt) const {
    if (!has(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_string()) throw InvalidArgument(where + ": '" + key + "' must be a string");
    return v.get<std::string>();
  }

  QFormat fmt(const char* key, QFormat dflt) const { return has(key) ? QFormat::parse(string(key, "")) : dflt; }
};

QTensor load_tensor(const fs::path& base, const json& entry, const std::string& where) {
  if (!entry.is_string()) throw InvalidArgument(where + ": tensor path must be a string");
  fs::path p = entry.get<std::string>();
  if (p.is_relative()) p = base / p;
  if (!fs::exists(p)) throw MissingArtifact(where + ": file not found: " + p.string());
  return read_qt(p);
}

void require_shape(const QTensor& t, const std::vector<std::uint32_t>& dims, const std::string& where) {
  if (t.dims() != dims) {
    std::string want, got;
    for (auto d : dims) want += (want.empty() ? "" : "x") + std::to_string(d);
    for (auto d : t.dims()) got += (got.empty() ? "" : "x") + std::to_string(d);
    throw ShapeMismatch(where + ": expected shape " + want + ", file has " + got);
  }
}

void require_fmt(const QTensor& t, QFormat fmt, const std::string& where) {
  if (t.fmt() != fmt) {
    throw InvalidArgument(where + ": file format " + t.fmt().to_string() + " != declared " + fmt.to_string());
  }
}

struct RandomInit {
  bool enabled = false;
  std::uint64_t seed = 0;
  double scale = 0.25;
};

RandomInit random_init(const Fields& f, std::uint64_t default_seed, std::size_t layer_index, double default_scale) {
  RandomInit r;
  r.scale = default_scale;
  if (!f.has("init")) return r;
  const json& init = f.at("init");
  if (init.is_string()) {
    if (init.get<std::string>() != "random") throw InvalidArgument(f.where + ": unknown init '" + init.get<std::string>() + "'");
    r.enabled = true;
    r.seed = default_seed + 1000003ULL * (layer_index + 1);
    return r;
  }
  Fields g{init, f.where + ".init"};
  if (g.string("kind", "random") != "random") throw InvalidArgument(f.where + ": only random init is supported");
  r.enabled = true;
  r.seed = g.has("seed") ? g.u32("seed") : default_seed + 1000003ULL * (layer_index + 1);
  r.scale = g.number("scale", default_scale);
  return r;
}

ConvLayerSpec parse_conv(const Fields& f, const fs::path& base, std::uint64_t seed, std::size_t index) {
  const std::uint32_t in_c = f.u32("in_c");
  const std::uint32_t out_c = f.u32("out_c");
  const std::uint32_t k = f.u32("k");
  const std::uint32_t stride = f.u32("stride", 1);
  const std::uint32_t pad = f.u32("pad", 0);
  const bool relu = f.boolean("relu", true);
  const Pool pool = parse_pool(f.string("pool", "none"));
  const QFormat act = f.fmt("act_fmt", kActivationFormat);
  const QFormat wfmt = f.fmt("w_fmt", kWeightFormat);

  ConvLayerSpec s;
  const RandomInit init = random_init(f, seed, index, 0.25);
  if (init.enabled) {
    Rng rng(init.seed);
    s = random_conv_spec(rng, in_c, out_c, k, stride, pad, relu, pool, init.scale, wfmt);
    s.in_fmt = act;
    s.out_fmt = act;
    rng = Rng(init.seed ^ 0xb1a5ULL);
    s.bias = bias_to_accumulator(random_tensor(rng, {out_c}, act, 0.5), s.acc_frac_bits());
  } else {
    s.in_channels = in_c;
    s.out_channels = out_c;
    s.kernel_h = k;
    s.kernel_w = k;
    s.stride = stride;
    s.pad = pad;
    s.relu = relu;
    s.pool = pool;
    s.in_fmt = act;
    s.out_fmt = act;
    s.weights = load_tensor(base, f.at("weights"), f.where + ".weights");
    require_shape(s.weights, {out_c, in_c, k, k}, f.where + ".weights");
    if (f.has("w_fmt")) require_fmt(s.weights, wfmt, f.where + ".weights");
    if (f.has("bias")) {
      const QTensor b = load_tensor(base, f.at("bias"), f.where + ".bias");
      require_shape(b, {out_c}, f.where + ".bias");
      s.bias = bias_to_accumulator(b, s.acc_frac_bits());
    } else {
      s.bias.assign(out_c, 0);
    }
  }
  s.validate();
  return s;
}

GruLayerSpec parse_gru(const Fields& f, const fs::path& base, std::uint64_t seed, std::size_t index) {
  const std::uint32_t in = f.u32("input");
  const std::uint32_t hid = f.u32("hidden");
  const double theta = f.number("theta", 0.0);
  if (theta < 0) throw InvalidArgument(f.where + ": theta must be >= 0");
  const QFormat act = f.fmt("act_fmt", kActivationFormat);
  const QFormat wfmt = f.fmt("w_fmt", kWeightFormat);

  const RandomInit init = random_init(f, seed, index, 1.0);
  if (init.enabled) {
    Rng rng(init.seed);
    GruLayerSpec s = random_gru_spec(rng, in, hid, theta, init.scale, act, wfmt);
    s.validate();
    return s;
  }

  GruLayerSpec s;
  s.input_size = in;
  s.hidden_size = hid;
  s.act_fmt = act;
  s.theta = quantize(theta, act);
  Fields w{f.at("weights"), f.where + ".weights"};
  if (!w.obj.is_object()) throw InvalidArgument(w.where + ": expected a mapping of w_xr..w_hc to files");
  struct Slot {
    const char* key;
    QTensor* dst;
    std::uint32_t cols;
  };
  const Slot slots[] = {{"w_xr", &s.w_xr, in}, {"w_xu", &s.w_xu, in}, {"w_xc", &s.w_xc, in},
                        {"w_hr", &s.w_hr, hid}, {"w_hu", &s.w_hu, hid}, {"w_hc", &s.w_hc, hid}};
  for (const auto& slot : slots) {
    const std::string where = w.where + "." + slot.key;
    *slot.dst = load_tensor(base, w.at(slot.key), where);
    require_shape(*slot.dst, {hid, slot.cols}, where);
    if (f.has("w_fmt")) require_fmt(*slot.dst, wfmt, where);
  }
  const int acc_frac = act.frac_bits + s.w_xr.fmt().frac_bits;
  std::vector<std::int32_t>* biases[] = {&s.b_r, &s.b_u, &s.b_c};
  const char* bias_keys[] = {"b_r", "b_u", "b_c"};
  for (int i = 0; i < 3; ++i) {
    if (f.has("bias") && f.at("bias").contains(bias_keys[i])) {
      const std::string where = f.where + ".bias." + bias_keys[i];
      const QTensor b = load_tensor(base, f.at("bias").at(bias_keys[i]), where);
      require_shape(b, {hid}, where);
      *biases[i] = bias_to_accumulator(b, acc_frac);
    } else {
      biases[i]->assign(hid, 0);
    }
  }
  s.validate();
  return s;
}

}  // namespace

json yaml_to_json(const std::string& text) {
  try {
    return node_to_json(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw MalformedStream(std::string("YAML parse error: ") + e.what());
  }
}

std::uint32_t NetworkDesc::input_size() const noexcept {
  std::uint32_t n = input_shape.empty() ? 0 : 1;
  for (auto d : input_shape) n *= d;
  return n;
}

NetworkDesc parse_network(const std::string& text, const fs::path& base_dir, std::uint64_t seed) {
  const json doc = yaml_to_json(text);
  if (!doc.is_object()) throw InvalidArgument("network file must be a mapping");
  const Fields top{doc, "network"};
  NetworkDesc net;
  net.name = top.string("name", "network");
  if (top.has("seed")) seed = top.u32("seed");
  if (top.has("mem")) {
    fs::path p = top.string("mem", "");
    net.mem_config = p.is_relative() ? base_dir / p : p;
  }
  const json& layers = top.at("layers");
  if (!layers.is_array() || layers.empty()) throw InvalidArgument("network: 'layers' must be a non-empty list");

  bool any_conv = false, any_gru = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Fields f{layers[i], "layers[" + std::to_string(i) + "]"};
    if (!f.obj.is_object()) throw InvalidArgument(f.where + ": expected a mapping");
    const std::string type = f.string("type", "");
    if (type == "conv") {
      net.conv.push_back(parse_conv(f, base_dir, seed, i));
      any_conv = true;
    } else if (type == "gru") {
      net.gru.push_back(parse_gru(f, base_dir, seed, i));
      any_gru = true;
    } else {
      throw InvalidArgument(f.where + ": type must be conv or gru");
    }
  }
  if (any_conv && any_gru) throw InvalidArgument("network: mixing conv and gru layers in one file is not supported");
  net.kind = any_gru ? NetworkKind::Gru : NetworkKind::Conv;

  if (top.has("input_shape")) {
    const json& shape = top.at("input_shape");
    if (!shape.is_array()) throw InvalidArgument("network: input_shape must be a list");
    for (const auto& d : shape) {
      if (!d.is_number_integer() || d.get<std::int64_t>() <= 0) {
        throw InvalidArgument("network: input_shape entries must be positive integers");
      }
      net.input_shape.push_back(d.get<std::uint32_t>());
    }
  } else if (net.kind == NetworkKind::Gru) {
    net.input_shape = {net.gru.front().input_size};
  }
  validate_chain(net);
  return net;
}

NetworkDesc load_network(const fs::path& path, std::uint64_t seed) {
  const auto bytes = read_file(path);
  return parse_network(std::string(bytes.begin(), bytes.end()), path.parent_path(), seed);
}

void validate_chain(const NetworkDesc& net) {
  if (net.kind == NetworkKind::Gru) {
    if (!net.input_shape.empty() && (net.input_shape.size() != 1 || net.input_shape[0] != net.gru.front().input_size)) {
      throw ShapeMismatch("network: input_shape does not match the first GRU layer");
    }
    for (std::size_t i = 1; i < net.gru.size(); ++i) {
      if (net.gru[i].input_size != net.gru[i - 1].hidden_size) {
        throw ShapeMismatch("layers[" + std::to_string(i) + "]: input " + std::to_string(net.gru[i].input_size) +
                            " != previous hidden " + std::to_string(net.gru[i - 1].hidden_size));
      }
      if (net.gru[i].act_fmt != net.gru[i - 1].act_fmt) {
        throw ShapeMismatch("layers[" + std::to_string(i) + "]: activation format differs from previous layer");
      }
    }
    return;
  }
  for (std::size_t i = 1; i < net.conv.size(); ++i) {
    if (net.conv[i].in_channels != net.conv[i - 1].out_channels) {
      throw ShapeMismatch("layers[" + std::to_string(i) + "]: in_c " + std::to_string(net.conv[i].in_channels) +
                          " != previous out_c " + std::to_string(net.conv[i - 1].out_channels));
    }
    if (net.conv[i].in_fmt != net.conv[i - 1].out_fmt) {
      throw ShapeMismatch("layers[" + std::to_string(i) + "]: activation format differs from previous layer");
    }
  }
  if (net.input_shape.empty()) return;
  if (net.input_shape.size() != 3) throw ShapeMismatch("network: conv input_shape must be [C, H, W]");
  std::uint32_t c = net.input_shape[0], h = net.input_shape[1], w = net.input_shape[2];
  for (const auto& layer : net.conv) {
    const ConvGeometry g = layer.geometry(c, h, w);
    c = layer.out_channels;
    h = g.out_h;
    w = g.out_w;
  }
}

RunConfig load_run_config(const fs::path& path, RunConfig base) {
  const auto bytes = read_file(path);
  const json doc = yaml_to_json(std::string(bytes.begin(), bytes.end()));
  if (doc.is_null()) return base;
  if (!doc.is_object()) throw InvalidArgument(path.string() + ": config must be a mapping");
  json mem = json::object();
  for (const auto& [key, value] : doc.items()) {
    if (key == "mem") {
      if (!value.is_object()) throw InvalidArgument(path.string() + ": 'mem' must be a mapping");
      for (const auto& [k, v] : value.items()) mem[k] = v;
    } else if (key == "fuse_relu_pool") {
      if (!value.is_boolean()) throw InvalidArgument(path.string() + ": fuse_relu_pool must be true or false");
      base.fuse_relu_pool = value.get<bool>();
    } else {
      mem[key] = value;
    }
  }
  base.mem = mem_config_from_json(mem, base.mem);
  return base;
}

MemConfig load_mem_config(const fs::path& path, MemConfig base) {
  RunConfig rc;
  rc.mem = base;
  return load_run_config(path, rc).mem;
}

}  // namespace sparq
