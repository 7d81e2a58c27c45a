// sparq command-line front end.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "sparq/codec.hpp"
#include "sparq/engine.hpp"
#include "sparq/error.hpp"
#include "sparq/io.hpp"
#include "sparq/netdesc.hpp"
#include "sparq/report.hpp"
#include "sparq/synth.hpp"

namespace fs = std::filesystem;
using namespace sparq;
using ojson = nlohmann::ordered_json;

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 1;
  std::string format = "json";
};

// Dense/sparse disagreement. Not an input error, so it gets its own code.
struct Divergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig run_config(const Globals& g, const std::string& mem_path, const NetworkDesc* net = nullptr) {
  RunConfig rc;
  if (net && net->mem_config) rc = load_run_config(*net->mem_config, rc);
  if (!g.config.empty()) rc = load_run_config(g.config, rc);
  if (!mem_path.empty()) rc.mem = load_mem_config(mem_path, rc.mem);
  rc.mem.validate();
  return rc;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
  } else {
    write_file_atomic(path, text);
  }
}

std::string stats_text(const SparsityStats& s, const std::string& format, const SparseFeatureMap* sm = nullptr) {
  if (format == "csv") {
    std::ostringstream o;
    o << "total_pixels,zero_pixels,sparsity";
    if (sm) o << ",payload_bits,dense_bits,compression_ratio";
    o << '\n' << s.total_pixels << ',' << s.zero_pixels << ',' << format_double(s.sparsity);
    if (sm) o << ',' << sm->payload_bits() << ',' << sm->dense_bits() << ',' << format_double(sm->compression_ratio());
    o << '\n';
    return o.str();
  }
  ojson j{{"total_pixels", s.total_pixels}, {"zero_pixels", s.zero_pixels}, {"sparsity", s.sparsity},
          {"per_channel_sparsity", s.per_channel_sparsity}};
  if (sm) {
    j["payload_bits"] = sm->payload_bits();
    j["dense_bits"] = sm->dense_bits();
    j["compression_ratio"] = sm->compression_ratio();
  }
  return j.dump(2) + "\n";
}

bool has_magic(const std::vector<std::uint8_t>& bytes, const char* magic) {
  return bytes.size() >= 4 && std::equal(magic, magic + 4, bytes.begin());
}

std::vector<fs::path> list_inputs(const fs::path& p) {
  if (!fs::exists(p)) throw MissingArtifact("input not found: " + p.string());
  if (!fs::is_directory(p)) return {p};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(p)) {
    if (e.is_regular_file() && e.path().extension() == ".qt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw MissingArtifact("no .qt inputs in " + p.string());
  return files;
}

// Runs f(i) for i in [0, n) on up to `jobs` threads. Results land by index,
// so aggregation order does not depend on scheduling.
template <class F>
void parallel_for(std::size_t n, unsigned jobs, F&& f) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

struct SynthOptions {
  std::size_t count = 0;
  double zero_prob = 0.0;
  std::string kind = "piecewise-constant";
  std::uint32_t steps = 100;
  std::uint32_t hold = 10;
  double smoothing = 0.9;
  double amplitude = 1.0;
};

void add_synth_flags(CLI::App* cmd, SynthOptions& s) {
  cmd->add_option("--synthetic", s.count, "Generate N seeded synthetic inputs instead of reading files");
  cmd->add_option("--zero-prob", s.zero_prob, "Synthetic CNN input: probability a pixel is zero");
  cmd->add_option("--sequence", s.kind, "Synthetic RNN input: uniform | piecewise-constant | band-limited");
  cmd->add_option("--steps", s.steps, "Synthetic RNN input: timesteps per sequence");
  cmd->add_option("--hold", s.hold, "Piecewise-constant hold length");
  cmd->add_option("--smoothing", s.smoothing, "Band-limited low-pass pole in [0, 1)");
  cmd->add_option("--amplitude", s.amplitude, "Synthetic input amplitude");
}

std::vector<std::vector<QTensor>> load_sequences(const NetworkDesc& net, const std::string& input,
                                                 const SynthOptions& so, std::uint64_t seed) {
  std::vector<std::vector<QTensor>> seqs;
  const QFormat fmt = net.gru.front().act_fmt;
  if (so.count > 0) {
    Rng master(seed);
    SequenceParams p;
    p.kind = parse_sequence_kind(so.kind);
    p.steps = so.steps;
    p.size = net.gru.front().input_size;
    p.amplitude = so.amplitude;
    p.hold = so.hold;
    p.smoothing = so.smoothing;
    for (std::size_t i = 0; i < so.count; ++i) {
      Rng rng = master.fork();
      seqs.push_back(synthetic_sequence(rng, p, fmt));
    }
    return seqs;
  }
  if (input.empty()) throw InvalidArgument("an input path or --synthetic N is required");
  for (const auto& f : list_inputs(input)) seqs.push_back(unstack_sequence(read_qt(f)));
  return seqs;
}

std::vector<QTensor> load_maps(const NetworkDesc& net, const std::string& input, const SynthOptions& so,
                               std::uint64_t seed) {
  std::vector<QTensor> maps;
  if (so.count > 0) {
    if (net.input_shape.size() != 3) throw InvalidArgument("--synthetic needs input_shape: [C, H, W] in the network file");
    Rng master(seed);
    for (std::size_t i = 0; i < so.count; ++i) {
      Rng rng = master.fork();
      maps.push_back(random_feature_map(rng, net.input_shape[0], net.input_shape[1], net.input_shape[2], so.zero_prob,
                                        net.conv.front().in_fmt));
    }
    return maps;
  }
  if (input.empty()) throw InvalidArgument("an input path or --synthetic N is required");
  for (const auto& f : list_inputs(input)) maps.push_back(read_qt(f));
  return maps;
}

std::string hex(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string report_text(const RunReport& r, const std::string& path, const std::string& format) {
  const bool csv = format == "csv" || (!path.empty() && fs::path(path).extension() == ".csv");
  return csv ? to_csv(r) : to_json(r).dump(2) + "\n";
}

// ---- subcommands -----------------------------------------------------------

int cmd_encode(const std::string& in, const std::string& out, const Globals& g) {
  const QTensor t = read_qt(in);
  const SparseFeatureMap s = encode_sm(t);
  write_smfm(out, s);
  std::cout << stats_text(measure_sparsity(s), g.format, &s);
  return 0;
}

int cmd_decode(const std::string& in, const std::string& out, const Globals& g) {
  const SparseFeatureMap s = read_smfm(in);
  write_qt(out, decode_sm(s));
  std::cout << stats_text(measure_sparsity(s), g.format, &s);
  return 0;
}

int cmd_stats(const std::string& in, const Globals& g) {
  const auto bytes = read_file(in);
  if (has_magic(bytes, "SMFM")) {
    const SparseFeatureMap s = deserialize_smfm(bytes);
    std::cout << stats_text(measure_sparsity(s), g.format, &s);
  } else {
    const QTensor t = deserialize_qt(bytes);
    if (t.rank() == 3) {
      const SparseFeatureMap s = encode_sm(t);
      std::cout << stats_text(measure_sparsity(t), g.format, &s);
    } else {
      std::cout << stats_text(measure_sparsity(t), g.format);
    }
  }
  return 0;
}

struct RunArgs {
  std::string net;
  std::string input;
  std::string mode = "sparse";
  std::optional<double> theta;
  std::string mem;
  std::string report;
  std::string output;
  std::string trace;
  unsigned jobs = 1;
  bool unfused = false;
  SynthOptions synth;
};

int run_cnn(const NetworkDesc& net, const RunArgs& a, const RunConfig& rc, const Globals& g) {
  const std::vector<QTensor> maps = load_maps(net, a.input, a.synth, g.seed);
  RunOptions opts;
  opts.mode = parse_run_mode(a.mode);
  opts.mem = rc.mem;
  opts.conv.fuse_relu_pool = rc.fuse_relu_pool && !a.unfused;
  opts.name = net.name;
  RunOptions other = opts;
  other.mode = opts.mode == RunMode::Sparse ? RunMode::Dense : RunMode::Sparse;

  std::vector<RunReport> reports(maps.size());
  std::vector<std::string> mismatch(maps.size());
  NetworkRun first;
  parallel_for(maps.size(), a.jobs, [&](std::size_t i) {
    RunOptions o = opts;
    o.keep_trace = i == 0 && !a.trace.empty();
    NetworkRun run = run_network(net.conv, maps[i], o);
    // Cross-check every input against the other engine.
    const NetworkRun check = run_network(net.conv, maps[i], other);
    if (check.report.output_hash != run.report.output_hash || !(check.output == run.output)) {
      mismatch[i] = "input " + std::to_string(i) + ": " + to_string(opts.mode) + " hash " + hex(run.report.output_hash) +
                    " != " + to_string(other.mode) + " hash " + hex(check.report.output_hash);
    }
    reports[i] = run.report;
    if (i == 0) first = std::move(run);
  });
  for (const auto& m : mismatch) {
    if (!m.empty()) throw Divergence("dense/sparse output mismatch: " + m);
  }
  const RunReport agg = aggregate_reports(reports);
  emit(a.report, report_text(agg, a.report, g.format));
  if (!a.output.empty()) write_qt(a.output, first.output);
  if (!a.trace.empty()) write_file_atomic(a.trace, first.trace.to_csv());
  std::cerr << "output hash " << hex(agg.output_hash) << " (dense and sparse agree on " << maps.size()
            << " input(s))\n";
  return 0;
}

int run_rnn(NetworkDesc net, const RunArgs& a, const RunConfig& rc, const Globals& g) {
  if (a.theta) {
    for (auto& l : net.gru) l.theta = quantize(*a.theta, l.act_fmt);
  }
  const auto seqs = load_sequences(net, a.input, a.synth, g.seed);
  RunOptions opts;
  opts.mode = parse_run_mode(a.mode);
  opts.mem = rc.mem;
  opts.name = net.name;
  const bool exact = std::all_of(net.gru.begin(), net.gru.end(), [](const GruLayerSpec& l) { return l.theta.raw == 0; });

  std::vector<RunReport> reports(seqs.size());
  std::vector<std::string> mismatch(seqs.size());
  SequenceRun first;
  parallel_for(seqs.size(), a.jobs, [&](std::size_t i) {
    RunOptions o = opts;
    o.keep_trace = i == 0 && !a.trace.empty();
    SequenceRun run = run_sequence(net.gru, seqs[i], o);
    // With theta > 0 the delta network is an approximation by design; the
    // equality contract only binds at theta == 0.
    if (exact) {
      RunOptions d = opts;
      d.mode = opts.mode == RunMode::Sparse ? RunMode::Dense : RunMode::Sparse;
      const SequenceRun check = run_sequence(net.gru, seqs[i], d);
      if (check.report.output_hash != run.report.output_hash) {
        mismatch[i] = "sequence " + std::to_string(i) + ": hash " + hex(run.report.output_hash) + " != " +
                      hex(check.report.output_hash);
      }
    }
    reports[i] = run.report;
    if (i == 0) first = std::move(run);
  });
  for (const auto& m : mismatch) {
    if (!m.empty()) throw Divergence("dense/sparse output mismatch at theta=0: " + m);
  }
  const RunReport agg = aggregate_reports(reports);
  emit(a.report, report_text(agg, a.report, g.format));
  if (!a.output.empty() && !first.outputs.empty()) write_qt(a.output, stack_sequence(first.outputs));
  if (!a.trace.empty()) write_file_atomic(a.trace, first.trace.to_csv());
  std::cerr << "output hash " << hex(agg.output_hash)
            << (exact ? " (dense and sparse agree)" : " (theta > 0: dense cross-check skipped)") << '\n';
  return 0;
}

int cmd_run(const RunArgs& a, const Globals& g) {
  const NetworkDesc net = load_network(a.net, g.seed);
  const RunConfig rc = run_config(g, a.mem, &net);
  if (net.kind == NetworkKind::Gru) return run_rnn(net, a, rc, g);
  if (a.theta) throw InvalidArgument("--theta applies to recurrent networks only");
  return run_cnn(net, a, rc, g);
}

struct SweepArgs {
  std::string net;
  std::string input;
  std::vector<double> thetas{0.0};
  std::string mem;
  std::string out;
  unsigned jobs = 1;
  SynthOptions synth;
};

int cmd_sweep(const SweepArgs& a, const Globals& g) {
  NetworkDesc net = load_network(a.net, g.seed);
  if (net.kind != NetworkKind::Gru) throw InvalidArgument("sweep-theta needs a recurrent network");
  const RunConfig rc = run_config(g, a.mem, &net);
  const auto seqs = load_sequences(net, a.input, a.synth, g.seed);
  RunOptions opts;
  opts.mode = RunMode::Sparse;
  opts.mem = rc.mem;
  opts.name = net.name;

  std::vector<double> thetas = a.thetas;
  for (double t : thetas) {
    if (!(t >= 0)) throw InvalidArgument("theta values must be >= 0");
  }

  auto run_all = [&](double theta) {
    std::vector<GruLayerSpec> layers = net.gru;
    for (auto& l : layers) l.theta = quantize(theta, l.act_fmt);
    std::vector<SequenceRun> runs(seqs.size());
    parallel_for(seqs.size(), a.jobs, [&](std::size_t i) { runs[i] = run_sequence(layers, seqs[i], opts); });
    return runs;
  };
  const auto base = run_all(0.0);
  double base_ss = 0.0;
  std::uint64_t count = 0;
  for (const auto& r : base) {
    for (const auto& h : r.outputs) {
      for (double v : h.to_real()) base_ss += v * v;
      count += h.size();
    }
  }
  const double base_rms = count ? std::sqrt(base_ss / static_cast<double>(count)) : 0.0;

  std::ostringstream out;
  out << "# theta sweep over " << seqs.size() << " sequence(s); deviations are vs the theta=0 run in real units\n"
      << "# caveat: theta changes the hidden trajectory, so the event rate need not fall monotonically step by step\n"
      << "# published range for delta-threshold memory access reduction: 5x-100x, depending on input statistics\n"
      << "theta,max_abs_dev,rms_dev,rel_rms_dev,reduction,total_reduction,event_rate\n";
  for (double theta : thetas) {
    const auto runs = theta == 0.0 ? base : run_all(theta);
    double max_abs = 0.0, ss = 0.0;
    std::vector<RunReport> reps;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      reps.push_back(runs[i].report);
      for (std::size_t t = 0; t < runs[i].outputs.size(); ++t) {
        const auto a_ = runs[i].outputs[t].to_real();
        const auto b_ = base[i].outputs[t].to_real();
        for (std::size_t k = 0; k < a_.size(); ++k) {
          const double d = a_[k] - b_[k];
          max_abs = std::max(max_abs, std::abs(d));
          ss += d * d;
        }
      }
    }
    const RunReport agg = aggregate_reports(reps);
    const double rms = count ? std::sqrt(ss / static_cast<double>(count)) : 0.0;
    const auto wr = agg.recurrent->weight_reduction();
    const auto tr = agg.recurrent->total_reduction();
    out << format_double(theta) << ',' << format_double(max_abs) << ',' << format_double(rms) << ','
        << (base_rms > 0 ? format_double(rms / base_rms) : "n/a") << ',' << (wr ? format_double(*wr) : "n/a") << ','
        << (tr ? format_double(*tr) : "n/a") << ',' << format_double(agg.recurrent->mean_event_rate()) << '\n';
  }
  emit(a.out, out.str());
  return 0;
}

struct MemSimArgs {
  std::string trace;
  std::string mem;
  std::uint64_t ratio_words = 0;
  std::vector<std::uint64_t> dense_stream;
};

int cmd_mem_sim(const MemSimArgs& a, const Globals& g) {
  const MemConfig cfg = run_config(g, a.mem).mem;
  ojson j;
  j["config"] = config_provenance(cfg);
  auto cost_json = [&](const MemCostReport& m) {
    return ojson{{"cycles", m.cycles},        {"row_activations", m.row_activations},
                 {"dram_words", m.dram_words}, {"sram_words", m.sram_words},
                 {"dram_bursts", m.dram_bursts}, {"energy_pj", m.energy_pj}};
  };
  if (!a.trace.empty()) {
    const auto bytes = read_file(a.trace);
    const AccessTrace t = AccessTrace::from_csv(std::string(bytes.begin(), bytes.end()));
    const MemCostReport m = cost_trace(t, cfg);
    ojson c = cost_json(m);
    ojson tags = ojson::object();
    for (std::size_t i = 0; i < kTagCount; ++i) {
      const auto& tc = m.per_tag[i];
      tags[to_string(static_cast<Tag>(i))] = ojson{{"dram_words", tc.dram_words},
                                                   {"sram_words", tc.sram_words},
                                                   {"row_activations", tc.row_activations},
                                                   {"cycles", tc.cycles},
                                                   {"energy_pj", tc.energy_pj}};
    }
    c["by_tag"] = tags;
    j["trace"] = c;
  }
  if (a.dense_stream.size() == 2) {
    j["dense_stream"] = cost_json(cost_trace(schedule_dense_weight_stream(a.dense_stream[0], a.dense_stream[1], cfg), cfg));
  }
  if (a.ratio_words > 0) {
    j["random_vs_burst"] = ojson{{"words", a.ratio_words}, {"ratio", random_vs_burst_ratio(a.ratio_words, cfg)}};
  }
  if (g.format == "csv") {
    std::cout << "quantity,value\n";
    for (const auto& [section, body] : j.items()) {
      if (section == "config") continue;
      for (const auto& [k, v] : body.items()) {
        if (v.is_number()) std::cout << section << '.' << k << ',' << v.dump() << '\n';
      }
    }
  } else {
    std::cout << j.dump(2) << '\n';
  }
  return 0;
}

struct ReportArgs {
  std::vector<std::string> reports;
  std::vector<std::string> points;
  std::string csv;
  std::string svg;
  std::string title = "Throughput vs power";
};

int cmd_report(const ReportArgs& a) {
  std::vector<ScatterPoint> pts;
  for (const auto& path : a.reports) {
    const auto bytes = read_file(path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
      throw MalformedStream(path + ": not a JSON report (" + e.what() + ")");
    }
    pts.push_back(scatter_point_from_report(j));
  }
  for (const auto& p : a.points) {
    // name:gops:watts
    const auto c1 = p.find(':'), c2 = p.rfind(':');
    if (c1 == std::string::npos || c1 == c2) throw InvalidArgument("--point expects name:gops:watts");
    try {
      pts.push_back(make_point(p.substr(0, c1), std::stod(p.substr(c1 + 1, c2 - c1 - 1)), std::stod(p.substr(c2 + 1))));
    } catch (const std::logic_error&) {
      throw InvalidArgument("--point expects name:gops:watts");
    }
  }
  if (pts.empty()) throw InvalidArgument("report needs at least one report file or --point");
  emit(a.csv, scatter_csv(pts));
  if (!a.svg.empty()) write_file_atomic(a.svg, scatter_svg(pts, a.title));
  return 0;
}

struct BrainArgs {
  std::string rate, fanout, neurons, esyn, power;
};

std::optional<double> factor(const std::string& s, const char* name) {
  if (s.empty() || s == "?") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw InvalidArgument(std::string("--") + name + ": not a number: '" + s + "'");
  }
}

// Shortest text with at least two significant digits: 1 -> "1.0", 10 -> "10".
std::string human(double v) {
  for (int prec = 2; prec <= 17; ++prec) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v || prec == 17) {
      std::string s = buf;
      if (s.find_first_of(".e") == std::string::npos && std::abs(v) < 10) s += ".0";
      return s;
    }
  }
  return format_double(v);
}

int cmd_brain(const BrainArgs& a, const Globals& g) {
  BrainBudget known;
  known.rate_hz = factor(a.rate, "rate");
  known.fanout = factor(a.fanout, "fanout");
  known.neurons = factor(a.neurons, "neurons");
  known.energy_per_syn_j = factor(a.esyn, "esyn");
  known.power_w = factor(a.power, "power");
  const BrainBudget s = solve_for(known);
  const char* name = "";
  std::string unit;
  double v = 0;
  if (!known.rate_hz) name = "rate", v = *s.rate_hz, unit = "Hz";
  else if (!known.fanout) name = "fanout", v = *s.fanout, unit = "synapses/neuron";
  else if (!known.neurons) name = "neurons", v = *s.neurons, unit = "neurons";
  else if (!known.energy_per_syn_j) name = "esyn", v = *s.energy_per_syn_j, unit = "J";
  else name = "power", v = *s.power_w, unit = "W";
  if (g.format == "json") {
    std::cout << ojson{{"solved", name}, {"value", v}, {"unit", unit},
                       {"rate_hz", *s.rate_hz}, {"fanout", *s.fanout}, {"neurons", *s.neurons},
                       {"energy_per_syn_j", *s.energy_per_syn_j}, {"power_w", *s.power_w}}
                     .dump(2)
              << '\n';
  }
  std::cout << name << " = " << human(v) << ' ' << unit;
  if (unit == "J") std::cout << " (" << human(v * 1e15) << " fJ)";
  std::cout << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparq: sparse fixed-point DNN inference with a DRAM/SRAM cost model"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Run config (YAML): mem block, fuse_relu_pool");
  app.add_option("--seed", g.seed, "Seed for every random draw");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}));

  std::string in, out;
  auto* enc = app.add_subcommand("encode", "Dense .qt -> compressed .smfm");
  enc->add_option("input", in)->required();
  enc->add_option("output", out)->required();
  auto* dec = app.add_subcommand("decode", "Compressed .smfm -> dense .qt");
  dec->add_option("input", in)->required();
  dec->add_option("output", out)->required();
  auto* st = app.add_subcommand("stats", "Sparsity statistics of a .qt or .smfm file");
  st->add_option("input", in)->required();

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Run a network on one input, a directory, or synthetic inputs");
  run->add_option("net", ra.net)->required();
  run->add_option("input", ra.input);
  run->add_option("--mode", ra.mode)->check(CLI::IsMember({"dense", "sparse"}));
  run->add_option("--theta", ra.theta, "Override every recurrent layer's threshold (real units)");
  run->add_option("--mem", ra.mem, "Memory config (YAML)");
  run->add_option("--report", ra.report, "Write the report here (.json or .csv); default stdout");
  run->add_option("--output", ra.output, "Write the first input's network output (.qt)");
  run->add_option("--trace", ra.trace, "Write the first input's access trace (CSV)");
  run->add_option("--jobs", ra.jobs, "Worker threads for independent inputs");
  run->add_flag("--unfused", ra.unfused, "Write the full-resolution ReLU map before pooling");
  add_synth_flags(run, ra.synth);

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep-theta", "Deviation and traffic reduction across thresholds");
  sweep->add_option("net", sa.net)->required();
  sweep->add_option("input", sa.input);
  sweep->add_option("--thetas", sa.thetas, "Comma-separated threshold list")->delimiter(',');
  sweep->add_option("--mem", sa.mem, "Memory config (YAML)");
  sweep->add_option("--out", sa.out, "CSV destination; default stdout");
  sweep->add_option("--jobs", sa.jobs, "Worker threads");
  add_synth_flags(sweep, sa.synth);

  MemSimArgs ma;
  auto* mem = app.add_subcommand("mem-sim", "Cost an access trace or a synthetic pattern");
  mem->add_option("trace", ma.trace, "Trace CSV (region,address,kind,tag[,words])");
  mem->add_option("--mem", ma.mem, "Memory config (YAML)");
  mem->add_option("--ratio", ma.ratio_words, "Scattered vs sequential cycle ratio for N words");
  mem->add_option("--dense-stream", ma.dense_stream, "ROWS COLS of a sequential weight stream")->expected(2);

  ReportArgs rpa;
  auto* rep = app.add_subcommand("report", "Throughput vs power scatter from run reports");
  rep->add_option("reports", rpa.reports, "Report JSON files");
  rep->add_option("--point", rpa.points, "Extra point name:gops:watts");
  rep->add_option("--csv", rpa.csv, "CSV destination; default stdout");
  rep->add_option("--svg", rpa.svg, "SVG destination");
  rep->add_option("--title", rpa.title);

  BrainArgs ba;
  auto* brain = app.add_subcommand("brain-budget", "power = rate x fanout x neurons x energy; solve for one '?'");
  brain->add_option("--rate", ba.rate, "Mean spike rate (Hz)");
  brain->add_option("--fanout", ba.fanout, "Synapses per neuron");
  brain->add_option("--neurons", ba.neurons, "Neuron count");
  brain->add_option("--esyn", ba.esyn, "Energy per synaptic event (J)");
  brain->add_option("--power", ba.power, "Power (W)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*enc) return cmd_encode(in, out, g);
    if (*dec) return cmd_decode(in, out, g);
    if (*st) return cmd_stats(in, g);
    if (*run) return cmd_run(ra, g);
    if (*sweep) return cmd_sweep(sa, g);
    if (*mem) return cmd_mem_sim(ma, g);
    if (*rep) return cmd_report(rpa);
    if (*brain) return cmd_brain(ba, g);
  } catch (const Divergence& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
