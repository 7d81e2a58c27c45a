#pragma once

// DRAM/SRAM access-cost model. DRAM keeps a single open row: words inside the
// open row stream at cycles_seq_word each, and every row switch adds
// row_change_factor * cycles_seq_word. SRAM is zero-cycle but costs energy.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sparq {

enum class Region : std::uint8_t { Dram, Sram };
enum class AccessKind : std::uint8_t { Read, Write };
enum class Tag : std::uint8_t { Weights, Activations, State };

inline constexpr std::size_t kTagCount = 3;

const char* to_string(Region r) noexcept;
const char* to_string(AccessKind k) noexcept;
const char* to_string(Tag t) noexcept;
Region parse_region(const std::string& s);
AccessKind parse_access_kind(const std::string& s);
Tag parse_tag(const std::string& s);

// One record covers `words` consecutive word addresses starting at `address`.
struct Access {
  Region region = Region::Dram;
  AccessKind kind = AccessKind::Read;
  Tag tag = Tag::Weights;
  std::uint64_t address = 0;
  std::uint64_t words = 1;

  friend bool operator==(const Access&, const Access&) = default;
};

class AccessTrace {
 public:
  // Appends, merging with the previous record when it continues it exactly.
  void add(const Access& a);
  void add(Region region, AccessKind kind, Tag tag, std::uint64_t address, std::uint64_t words = 1) {
    add(Access{region, kind, tag, address, words});
  }
  void append(const AccessTrace& other);

  const std::vector<Access>& records() const noexcept { return records_; }
  bool empty() const noexcept { return records_.empty(); }
  std::uint64_t words(Region region) const noexcept;
  std::uint64_t words(Region region, Tag tag) const noexcept;
  std::uint64_t words(Region region, Tag tag, AccessKind kind) const noexcept;

  // CSV columns: region,address,kind,tag,words
  std::string to_csv() const;
  static AccessTrace from_csv(const std::string& text);

 private:
  std::vector<Access> records_;
};

struct MemConfig {
  std::uint64_t words_per_row = 1024;
  std::uint64_t burst_len = 8;
  double cycles_seq_word = 1.0;
  double row_change_factor = 50.0;
  double e_dram_word_pj = 100.0;
  double e_sram_word_pj = 5.0;
  double e_mac_pj = 1.0;
  double clock_hz = 500e6;
  std::uint64_t mac_units = 128;
  std::uint32_t word_bytes = 2;

  void validate() const;
  friend bool operator==(const MemConfig&, const MemConfig&) = default;
};

struct TagCost {
  std::uint64_t dram_words = 0;
  std::uint64_t sram_words = 0;
  std::uint64_t row_activations = 0;
  double cycles = 0.0;
  double energy_pj = 0.0;
};

struct MemCostReport {
  double cycles = 0.0;
  std::uint64_t row_activations = 0;
  std::uint64_t dram_words = 0;
  std::uint64_t sram_words = 0;
  std::uint64_t dram_bursts = 0;
  double energy_pj = 0.0;
  std::array<TagCost, kTagCount> per_tag{};

  const TagCost& tag(Tag t) const noexcept { return per_tag[static_cast<std::size_t>(t)]; }
  MemCostReport& operator+=(const MemCostReport& o) noexcept;
};

MemCostReport cost_trace(const AccessTrace& trace, const MemConfig& cfg);

// Fully sequential read of a contiguous rows x cols region starting at base.
AccessTrace schedule_dense_weight_stream(std::uint64_t rows, std::uint64_t cols, const MemConfig& cfg,
                                         std::uint64_t base = 0, Tag tag = Tag::Weights);

// Worst-case scattered trace: n words, each in its own row.
AccessTrace scattered_trace(std::uint64_t n_words, const MemConfig& cfg);

// cycles(scattered) / cycles(sequential) for n_words.
double random_vs_burst_ratio(std::uint64_t n_words, const MemConfig& cfg);

struct EnergyBreakdown {
  double mac_pj = 0.0;
  double dram_pj = 0.0;
  double sram_pj = 0.0;
  double total_pj = 0.0;
  std::array<double, kTagCount> per_tag_pj{};
};

EnergyBreakdown energy_breakdown(std::uint64_t macs, const MemCostReport& mem, const MemConfig& cfg);

// Figures of merit from dense-equivalent Op, simulated cycles and energy.
struct FiguresOfMerit {
  double seconds = 0.0;
  double effective_gops = 0.0;
  double watts = 0.0;
  double gops_per_watt = 0.0;
};

FiguresOfMerit figures_of_merit(std::uint64_t dense_equivalent_ops, double cycles, double energy_pj,
                                const MemConfig& cfg);

// Simulated cycles for a layer: memory and MAC array overlap, the slower wins.
double layer_cycles(double mem_cycles, std::uint64_t macs_executed, const MemConfig& cfg);

// power = rate * fanout * neurons * energy_per_synaptic_event.
struct BrainBudget {
  std::optional<double> rate_hz;
  std::optional<double> fanout;
  std::optional<double> neurons;
  std::optional<double> energy_per_syn_j;
  std::optional<double> power_w;
};

double brain_budget(double rate_hz, double fanout, double neurons, double energy_per_syn_j);

// Fills in the single missing factor. Throws Underdetermined unless exactly
// one is missing and InvalidArgument for non-positive given values.
BrainBudget solve_for(const BrainBudget& known);

}  // namespace sparq
