#include "sparq/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sparq/error.hpp"

namespace sparq {

using ojson = nlohmann::ordered_json;

std::string format_double(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

ojson optional_number(const std::optional<double>& v) {
  if (!v) return "n/a";
  return *v;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ojson ops_json(const OpCounter& o) {
  return ojson{{"macs_executed", o.macs_executed},
               {"macs_dense_equivalent", o.macs_dense_equivalent},
               {"adds", o.adds},
               {"comparisons", o.comparisons},
               {"executed_ops", o.total_ops()},
               {"dense_equivalent_ops", o.dense_equivalent_ops()}};
}

ojson traffic_json(const MemCostReport& m, std::uint32_t word_bytes) {
  ojson by_tag = ojson::object();
  for (std::size_t i = 0; i < kTagCount; ++i) {
    const auto& t = m.per_tag[i];
    by_tag[to_string(static_cast<Tag>(i))] = ojson{{"dram_bytes", t.dram_words * word_bytes},
                                                   {"sram_bytes", t.sram_words * word_bytes},
                                                   {"row_activations", t.row_activations},
                                                   {"cycles", t.cycles},
                                                   {"energy_pj", t.energy_pj}};
  }
  return ojson{{"dram_bytes", m.dram_words * word_bytes},
               {"sram_bytes", m.sram_words * word_bytes},
               {"dram_bursts", m.dram_bursts},
               {"row_activations", m.row_activations},
               {"memory_cycles", m.cycles},
               {"by_tag", by_tag}};
}

ojson energy_json(const EnergyBreakdown& e) {
  return ojson{{"mac", e.mac_pj}, {"dram", e.dram_pj}, {"sram", e.sram_pj}, {"total", e.total_pj}};
}

}  // namespace

ojson to_json(const MemConfig& c) {
  return ojson{{"words_per_row", c.words_per_row},     {"burst_len", c.burst_len},
               {"cycles_seq_word", c.cycles_seq_word}, {"row_change_factor", c.row_change_factor},
               {"e_dram_word_pj", c.e_dram_word_pj},   {"e_sram_word_pj", c.e_sram_word_pj},
               {"e_mac_pj", c.e_mac_pj},               {"clock_hz", c.clock_hz},
               {"mac_units", c.mac_units},             {"word_bytes", c.word_bytes}};
}

MemConfig mem_config_from_json(const nlohmann::json& j, MemConfig c) {
  if (!j.is_object()) throw InvalidArgument("memory config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "words_per_row") c.words_per_row = value.get<std::uint64_t>();
      else if (key == "burst_len") c.burst_len = value.get<std::uint64_t>();
      else if (key == "cycles_seq_word") c.cycles_seq_word = value.get<double>();
      else if (key == "row_change_factor") c.row_change_factor = value.get<double>();
      else if (key == "e_dram_word_pj") c.e_dram_word_pj = value.get<double>();
      else if (key == "e_sram_word_pj") c.e_sram_word_pj = value.get<double>();
      else if (key == "e_mac_pj") c.e_mac_pj = value.get<double>();
      else if (key == "clock_hz") c.clock_hz = value.get<double>();
      else if (key == "mac_units") c.mac_units = value.get<std::uint64_t>();
      else if (key == "word_bytes") c.word_bytes = value.get<std::uint32_t>();
      else throw InvalidArgument("unknown memory config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("memory config: ") + e.what());
  }
  c.validate();
  return c;
}

ojson config_provenance(const MemConfig& cfg) {
  const ojson values = to_json(cfg);
  const ojson defaults = to_json(MemConfig{});
  ojson out = ojson::object();
  for (const auto& [key, value] : values.items()) {
    std::string prov = value == defaults[key] ? "default-config" : "user-config";
    // The 50x row-switch penalty is the one default taken from published DRAM data.
    if (key == "row_change_factor" && value == defaults[key]) prov = "paper-derived";
    out[key] = ojson{{"value", value}, {"provenance", prov}};
  }
  return out;
}

ojson to_json(const RunReport& r) {
  const std::uint32_t wb = r.config.word_bytes;
  ojson layers = ojson::array();
  for (const auto& l : r.layers) {
    ojson lj{{"index", l.index},
             {"kind", l.kind},
             {"ops", ops_json(l.ops)},
             {"efficiency_pct", optional_number(l.efficiency_pct())},
             {"input_sparsity", l.input_sparsity},
             {"output_sparsity", l.output_sparsity},
             {"traffic", traffic_json(l.mem, wb)},
             {"cycles", l.cycles},
             {"energy_pj", energy_json(l.energy)},
             {"live_bytes", l.live_bytes}};
    if (l.kind == "gru") {
      lj["input_events"] = l.input_events;
      lj["hidden_events"] = l.hidden_events;
      lj["weight_bytes_fetched"] = l.weight_words_fetched * wb;
      lj["weight_bytes_dense"] = l.weight_words_dense * wb;
    }
    layers.push_back(std::move(lj));
  }
  ojson table = ojson::array();
  for (const auto& s : r.sparsity_table) {
    table.push_back(ojson{{"layer", s.layer}, {"mean", s.mean}, {"stderr", s.stderr_}, {"samples", s.samples}});
  }
  ojson j{{"name", r.name},
          {"mode", to_string(r.mode)},
          {"inputs", r.inputs},
          {"ops", ops_json(r.ops)},
          {"efficiency_pct", optional_number(r.efficiency_pct())},
          {"layers", layers},
          {"sparsity_table", table},
          {"traffic", traffic_json(r.mem, wb)},
          {"cycles", r.cycles},
          {"energy_pj", energy_json(r.energy)},
          {"fom", ojson{{"seconds", r.fom.seconds},
                        {"effective_gops", r.fom.effective_gops},
                        {"watts", r.fom.watts},
                        {"gops_per_watt", r.fom.gops_per_watt},
                        {"throughput_convention", "dense-equivalent Op per simulated second"}}},
          {"peak_live_bytes", r.peak_live_bytes}};
  if (r.recurrent) {
    const auto& t = *r.recurrent;
    j["recurrent"] = ojson{{"steps", t.steps},
                           {"weight_bytes_fetched", t.weight_bytes_fetched},
                           {"weight_bytes_dense", t.weight_bytes_dense},
                           {"weight_reduction", optional_number(t.weight_reduction())},
                           {"input_side_weight_bytes_fetched", t.input_side_weight_bytes_fetched},
                           {"input_side_weight_bytes_dense", t.input_side_weight_bytes_dense},
                           {"hidden_side_weight_bytes_fetched", t.hidden_side_weight_bytes_fetched},
                           {"hidden_side_weight_bytes_dense", t.hidden_side_weight_bytes_dense},
                           {"total_dram_bytes", t.total_dram_bytes},
                           {"total_dram_bytes_dense", t.total_dram_bytes_dense},
                           {"total_reduction", optional_number(t.total_reduction())},
                           {"mean_event_rate", t.mean_event_rate()},
                           {"event_rate", t.event_rate}};
  }
  j["output_hash"] = hex64(r.output_hash);
  j["config"] = config_provenance(r.config);
  return j;
}

std::string to_csv(const RunReport& r) {
  std::ostringstream out;
  const std::uint32_t wb = r.config.word_bytes;
  out << "# name=" << r.name << " mode=" << to_string(r.mode) << " inputs=" << r.inputs
      << " output_hash=" << hex64(r.output_hash) << '\n';
  const ojson prov = config_provenance(r.config);
  out << "# config:";
  for (const auto& [key, v] : prov.items()) {
    const auto& val = v["value"];
    out << ' ' << key << '=' << (val.is_number_float() ? format_double(val.get<double>()) : val.dump()) << '('
        << v["provenance"].get<std::string>() << ')';
  }
  out << '\n';
  out << "layer,kind,dense_equivalent_ops,executed_ops,efficiency_pct,input_sparsity,output_sparsity,"
         "sparsity_stderr,dram_weight_bytes,dram_activation_bytes,dram_state_bytes,sram_bytes,cycles,energy_pj\n";
  auto row = [&](const std::string& label, const std::string& kind, const OpCounter& ops,
                 const std::optional<double>& eff, double in_s, double out_s, double se, const MemCostReport& m,
                 double cycles, double energy) {
    out << label << ',' << kind << ',' << ops.dense_equivalent_ops() << ',' << ops.total_ops() << ','
        << (eff ? format_double(*eff) : "n/a") << ',' << format_double(in_s) << ',' << format_double(out_s) << ','
        << format_double(se) << ',' << m.tag(Tag::Weights).dram_words * wb << ','
        << m.tag(Tag::Activations).dram_words * wb << ',' << m.tag(Tag::State).dram_words * wb << ','
        << m.sram_words * wb << ',' << format_double(cycles) << ',' << format_double(energy) << '\n';
  };
  for (std::size_t i = 0; i < r.layers.size(); ++i) {
    const auto& l = r.layers[i];
    const double se = i < r.sparsity_table.size() ? r.sparsity_table[i].stderr_ : 0.0;
    row(std::to_string(l.index), l.kind, l.ops, l.efficiency_pct(), l.input_sparsity, l.output_sparsity, se, l.mem,
        l.cycles, l.energy.total_pj);
  }
  row("total", "-", r.ops, r.efficiency_pct(), r.layers.empty() ? 0.0 : r.layers.front().input_sparsity,
      r.layers.empty() ? 0.0 : r.layers.back().output_sparsity, 0.0, r.mem, r.cycles, r.energy.total_pj);
  out << "# fom: seconds=" << format_double(r.fom.seconds) << " effective_gops=" << format_double(r.fom.effective_gops)
      << " watts=" << format_double(r.fom.watts) << " gops_per_watt=" << format_double(r.fom.gops_per_watt) << '\n';
  if (r.recurrent) {
    const auto& t = *r.recurrent;
    const auto wr = t.weight_reduction();
    const auto tr = t.total_reduction();
    out << "# recurrent: weight_bytes_fetched=" << t.weight_bytes_fetched
        << " weight_bytes_dense=" << t.weight_bytes_dense
        << " weight_reduction=" << (wr ? format_double(*wr) : "n/a") << " total_dram_bytes=" << t.total_dram_bytes
        << " total_dram_bytes_dense=" << t.total_dram_bytes_dense
        << " total_reduction=" << (tr ? format_double(*tr) : "n/a")
        << " mean_event_rate=" << format_double(t.mean_event_rate()) << '\n';
  }
  return out.str();
}

ScatterPoint make_point(std::string name, double gops, double watts) {
  return {std::move(name), gops, watts, watts > 0 ? gops / watts : 0.0};
}

ScatterPoint scatter_point_from_report(const nlohmann::json& report) {
  try {
    const auto& fom = report.at("fom");
    return make_point(report.at("name").get<std::string>(), fom.at("effective_gops").get<double>(),
                      fom.at("watts").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw MalformedStream(std::string("report is missing fields: ") + e.what());
  }
}

double iso_efficiency_gops(double tops_per_watt, double watts) noexcept { return tops_per_watt * 1000.0 * watts; }

bool on_iso_line(const ScatterPoint& p, double tops_per_watt, double rel_tol) noexcept {
  const double expect = iso_efficiency_gops(tops_per_watt, p.watts);
  return std::abs(p.gops - expect) <= rel_tol * std::abs(expect);
}

std::string scatter_csv(const std::vector<ScatterPoint>& points) {
  std::ostringstream out;
  out << "name,gops,watts,gops_per_watt\n";
  for (const auto& p : points) {
    out << p.name << ',' << format_double(p.gops) << ',' << format_double(p.watts) << ','
        << format_double(p.gops_per_watt) << '\n';
  }
  return out.str();
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string scatter_svg(const std::vector<ScatterPoint>& points, const std::string& title) {
  constexpr double kW = 640, kH = 480, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
  double x_lo = 1e-3, x_hi = 1e2, y_lo = 1e-1, y_hi = 1e4;
  bool first = true;
  for (const auto& p : points) {
    if (!(p.watts > 0) || !(p.gops > 0)) continue;
    const double lx = std::log10(p.watts), ly = std::log10(p.gops);
    if (first) {
      x_lo = std::floor(lx) - 1;
      x_hi = std::ceil(lx) + 1;
      y_lo = std::floor(ly) - 1;
      y_hi = std::ceil(ly) + 1;
      first = false;
    } else {
      x_lo = std::min(x_lo, std::floor(lx) - 1);
      x_hi = std::max(x_hi, std::ceil(lx) + 1);
      y_lo = std::min(y_lo, std::floor(ly) - 1);
      y_hi = std::max(y_hi, std::ceil(ly) + 1);
    }
  }
  if (first) {
    x_lo = std::log10(x_lo);
    x_hi = std::log10(x_hi);
    y_lo = std::log10(y_lo);
    y_hi = std::log10(y_hi);
  }
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto sx = [&](double lx) { return kLeft + (lx - x_lo) / (x_hi - x_lo) * pw; };
  auto sy = [&](double ly) { return kTop + ph - (ly - y_lo) / (y_hi - y_lo) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
      << "</text>\n";
  out << "<clipPath id=\"plot\"><rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\""
      << ph << "\"/></clipPath>\n";
  for (double d = x_lo; d <= x_hi + 1e-9; d += 1) {
    out << "<line x1=\"" << num(sx(d)) << "\" y1=\"" << kTop << "\" x2=\"" << num(sx(d)) << "\" y2=\"" << kTop + ph
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << num(sx(d)) << "\" y=\"" << kTop + ph + 15 << "\" text-anchor=\"middle\">1e"
        << static_cast<int>(d) << "</text>\n";
  }
  for (double d = y_lo; d <= y_hi + 1e-9; d += 1) {
    out << "<line x1=\"" << kLeft << "\" y1=\"" << num(sy(d)) << "\" x2=\"" << kLeft + pw << "\" y2=\"" << num(sy(d))
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << kLeft - 5 << "\" y=\"" << num(sy(d) + 4) << "\" text-anchor=\"end\">1e"
        << static_cast<int>(d) << "</text>\n";
  }
  // Iso-efficiency diagonals: log(GOp/s) = log(W) + log(1000 * TOp/s/W).
  for (int e = -4; e <= 4; ++e) {
    const double offset = 3.0 + e;  // log10(GOp/s/W)
    const double a = std::max(x_lo, y_lo - offset), b = std::min(x_hi, y_hi - offset);
    if (a >= b) continue;
    out << "<line class=\"iso\" data-tops-per-watt=\"1e" << e << "\" x1=\"" << num(sx(a)) << "\" y1=\""
        << num(sy(a + offset)) << "\" x2=\"" << num(sx(b)) << "\" y2=\"" << num(sy(b + offset))
        << "\" stroke=\"#88a\" stroke-dasharray=\"4 3\" clip-path=\"url(#plot)\"/>\n";
    out << "<text x=\"" << num(sx(b) - 4) << "\" y=\"" << num(sy(b + offset) + 12)
        << "\" text-anchor=\"end\" fill=\"#88a\">" << (e >= 0 ? "1e" + std::to_string(e) : "1e" + std::to_string(e))
        << " TOp/s/W</text>\n";
  }
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">Power (W)</text>\n";
  out << "<text transform=\"translate(15," << kTop + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">Throughput (GOp/s)</text>\n";
  for (const auto& p : points) {
    if (!(p.watts > 0) || !(p.gops > 0)) continue;
    const double cx = sx(std::log10(p.watts)), cy = sy(std::log10(p.gops));
    out << "<circle class=\"point\" cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"4\" fill=\"#c33\"/>\n";
    out << "<text x=\"" << num(cx + 6) << "\" y=\"" << num(cy - 6) << "\">" << xml_escape(p.name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace sparq
