#include "sparq/mem_model.hpp"

#include <cmath>
#include <sstream>

#include "sparq/error.hpp"

namespace sparq {

const char* to_string(Region r) noexcept { return r == Region::Dram ? "dram" : "sram"; }
const char* to_string(AccessKind k) noexcept { return k == AccessKind::Read ? "read" : "write"; }
const char* to_string(Tag t) noexcept {
  switch (t) {
    case Tag::Weights: return "weights";
    case Tag::Activations: return "activations";
    case Tag::State: return "state";
  }
  return "?";
}

Region parse_region(const std::string& s) {
  if (s == "dram" || s == "DRAM") return Region::Dram;
  if (s == "sram" || s == "SRAM") return Region::Sram;
  throw InvalidArgument("unknown region '" + s + "'");
}

AccessKind parse_access_kind(const std::string& s) {
  if (s == "read") return AccessKind::Read;
  if (s == "write") return AccessKind::Write;
  throw InvalidArgument("unknown access kind '" + s + "'");
}

Tag parse_tag(const std::string& s) {
  if (s == "weights") return Tag::Weights;
  if (s == "activations") return Tag::Activations;
  if (s == "state") return Tag::State;
  throw InvalidArgument("unknown tag '" + s + "'");
}

void AccessTrace::add(const Access& a) {
  if (a.words == 0) return;
  if (!records_.empty()) {
    Access& last = records_.back();
    if (last.region == a.region && last.kind == a.kind && last.tag == a.tag &&
        last.address + last.words == a.address) {
      last.words += a.words;
      return;
    }
  }
  records_.push_back(a);
}

void AccessTrace::append(const AccessTrace& other) {
  for (const auto& a : other.records_) add(a);
}

std::uint64_t AccessTrace::words(Region region) const noexcept {
  std::uint64_t n = 0;
  for (const auto& a : records_) n += a.region == region ? a.words : 0;
  return n;
}

std::uint64_t AccessTrace::words(Region region, Tag tag) const noexcept {
  std::uint64_t n = 0;
  for (const auto& a : records_) n += (a.region == region && a.tag == tag) ? a.words : 0;
  return n;
}

std::uint64_t AccessTrace::words(Region region, Tag tag, AccessKind kind) const noexcept {
  std::uint64_t n = 0;
  for (const auto& a : records_) n += (a.region == region && a.tag == tag && a.kind == kind) ? a.words : 0;
  return n;
}

std::string AccessTrace::to_csv() const {
  std::ostringstream out;
  out << "region,address,kind,tag,words\n";
  for (const auto& a : records_) {
    out << to_string(a.region) << ',' << a.address << ',' << to_string(a.kind) << ',' << to_string(a.tag) << ','
        << a.words << '\n';
  }
  return out.str();
}

AccessTrace AccessTrace::from_csv(const std::string& text) {
  AccessTrace trace;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line.rfind("region", 0) == 0) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 4 && f.size() != 5) {
      throw MalformedStream("trace line " + std::to_string(line_no) + ": expected 4 or 5 columns");
    }
    try {
      Access a;
      a.region = parse_region(f[0]);
      if (f[1].empty() || f[1][0] == '-') throw InvalidArgument("negative address");
      a.address = std::stoull(f[1]);
      a.kind = parse_access_kind(f[2]);
      a.tag = parse_tag(f[3]);
      a.words = f.size() == 5 ? std::stoull(f[4]) : 1;
      trace.add(a);
    } catch (const std::exception& e) {
      throw MalformedStream("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return trace;
}

void MemConfig::validate() const {
  if (words_per_row == 0 || burst_len == 0 || mac_units == 0 || word_bytes == 0) {
    throw InvalidArgument("memory config: counts must be positive");
  }
  if (!(cycles_seq_word > 0) || !(row_change_factor >= 1) || !(e_dram_word_pj > 0) || !(e_sram_word_pj > 0) ||
      !(e_mac_pj > 0) || !(clock_hz > 0)) {
    throw InvalidArgument("memory config: costs must be positive and row_change_factor >= 1");
  }
}

MemCostReport& MemCostReport::operator+=(const MemCostReport& o) noexcept {
  cycles += o.cycles;
  row_activations += o.row_activations;
  dram_words += o.dram_words;
  sram_words += o.sram_words;
  dram_bursts += o.dram_bursts;
  energy_pj += o.energy_pj;
  for (std::size_t i = 0; i < kTagCount; ++i) {
    per_tag[i].dram_words += o.per_tag[i].dram_words;
    per_tag[i].sram_words += o.per_tag[i].sram_words;
    per_tag[i].row_activations += o.per_tag[i].row_activations;
    per_tag[i].cycles += o.per_tag[i].cycles;
    per_tag[i].energy_pj += o.per_tag[i].energy_pj;
  }
  return *this;
}

MemCostReport cost_trace(const AccessTrace& trace, const MemConfig& cfg) {
  cfg.validate();
  MemCostReport rep;
  std::optional<std::uint64_t> open_row;
  const double activation_cycles = cfg.row_change_factor * cfg.cycles_seq_word;
  for (const auto& a : trace.records()) {
    TagCost& tc = rep.per_tag[static_cast<std::size_t>(a.tag)];
    if (a.region == Region::Sram) {
      rep.sram_words += a.words;
      tc.sram_words += a.words;
      continue;
    }
    const std::uint64_t first_row = a.address / cfg.words_per_row;
    const std::uint64_t last_row = (a.address + a.words - 1) / cfg.words_per_row;
    std::uint64_t activations = last_row - first_row;
    if (!open_row || *open_row != first_row) ++activations;
    open_row = last_row;

    rep.dram_words += a.words;
    rep.row_activations += activations;
    rep.dram_bursts += (a.words + cfg.burst_len - 1) / cfg.burst_len;
    tc.dram_words += a.words;
    tc.row_activations += activations;
    tc.cycles += static_cast<double>(a.words) * cfg.cycles_seq_word + static_cast<double>(activations) * activation_cycles;
  }
  rep.cycles = static_cast<double>(rep.dram_words) * cfg.cycles_seq_word +
               static_cast<double>(rep.row_activations) * activation_cycles;
  for (auto& tc : rep.per_tag) {
    tc.energy_pj = static_cast<double>(tc.dram_words) * cfg.e_dram_word_pj +
                   static_cast<double>(tc.sram_words) * cfg.e_sram_word_pj;
  }
  rep.energy_pj = static_cast<double>(rep.dram_words) * cfg.e_dram_word_pj +
                  static_cast<double>(rep.sram_words) * cfg.e_sram_word_pj;
  return rep;
}

AccessTrace schedule_dense_weight_stream(std::uint64_t rows, std::uint64_t cols, const MemConfig& cfg,
                                         std::uint64_t base, Tag tag) {
  (void)cfg;
  AccessTrace t;
  t.add(Region::Dram, AccessKind::Read, tag, base, rows * cols);
  return t;
}

AccessTrace scattered_trace(std::uint64_t n_words, const MemConfig& cfg) {
  AccessTrace t;
  for (std::uint64_t i = 0; i < n_words; ++i) {
    t.add(Region::Dram, AccessKind::Read, Tag::Weights, i * cfg.words_per_row, 1);
  }
  return t;
}

double random_vs_burst_ratio(std::uint64_t n_words, const MemConfig& cfg) {
  if (n_words == 0) throw InvalidArgument("random_vs_burst_ratio: n_words must be > 0");
  const double scattered = cost_trace(scattered_trace(n_words, cfg), cfg).cycles;
  const double sequential = cost_trace(schedule_dense_weight_stream(1, n_words, cfg), cfg).cycles;
  return scattered / sequential;
}

EnergyBreakdown energy_breakdown(std::uint64_t macs, const MemCostReport& mem, const MemConfig& cfg) {
  EnergyBreakdown e;
  e.mac_pj = static_cast<double>(macs) * cfg.e_mac_pj;
  e.dram_pj = static_cast<double>(mem.dram_words) * cfg.e_dram_word_pj;
  e.sram_pj = static_cast<double>(mem.sram_words) * cfg.e_sram_word_pj;
  e.total_pj = e.mac_pj + e.dram_pj + e.sram_pj;
  for (std::size_t i = 0; i < kTagCount; ++i) e.per_tag_pj[i] = mem.per_tag[i].energy_pj;
  return e;
}

double layer_cycles(double mem_cycles, std::uint64_t macs_executed, const MemConfig& cfg) {
  const auto compute = static_cast<double>((macs_executed + cfg.mac_units - 1) / cfg.mac_units);
  return std::max(mem_cycles, compute);
}

FiguresOfMerit figures_of_merit(std::uint64_t dense_equivalent_ops, double cycles, double energy_pj,
                                const MemConfig& cfg) {
  FiguresOfMerit f;
  f.seconds = cycles / cfg.clock_hz;
  if (f.seconds <= 0) return f;
  f.effective_gops = static_cast<double>(dense_equivalent_ops) / f.seconds / 1e9;
  f.watts = energy_pj * 1e-12 / f.seconds;
  f.gops_per_watt = f.watts > 0 ? f.effective_gops / f.watts : 0.0;
  return f;
}

double brain_budget(double rate_hz, double fanout, double neurons, double energy_per_syn_j) {
  for (double v : {rate_hz, fanout, neurons, energy_per_syn_j}) {
    if (!(v > 0) || !std::isfinite(v)) throw InvalidArgument("brain budget factors must be positive and finite");
  }
  return rate_hz * fanout * neurons * energy_per_syn_j;
}

BrainBudget solve_for(const BrainBudget& known) {
  std::array<std::optional<double>, 5> v{known.rate_hz, known.fanout, known.neurons, known.energy_per_syn_j,
                                         known.power_w};
  int missing = -1;
  int unknowns = 0;
  for (int i = 0; i < 5; ++i) {
    if (!v[i]) {
      missing = i;
      ++unknowns;
    } else if (!(*v[i] > 0) || !std::isfinite(*v[i])) {
      throw InvalidArgument("brain budget factors must be positive and finite");
    }
  }
  if (unknowns != 1) {
    throw Underdetermined("brain budget needs exactly one unknown, got " + std::to_string(unknowns));
  }
  BrainBudget out = known;
  if (missing == 4) {
    out.power_w = brain_budget(*v[0], *v[1], *v[2], *v[3]);
    return out;
  }
  double others = 1.0;
  for (int i = 0; i < 4; ++i) {
    if (i != missing) others *= *v[i];
  }
  const double solved = *v[4] / others;
  switch (missing) {
    case 0: out.rate_hz = solved; break;
    case 1: out.fanout = solved; break;
    case 2: out.neurons = solved; break;
    default: out.energy_per_syn_j = solved; break;
  }
  return out;
}

}  // namespace sparq
