#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "catchnas/common.hpp"

namespace catchnas {

class InvalidArchitecture : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by valid_action_mask for a prefix no valid architecture extends.
class UnreachablePrefix : public InvalidArchitecture {
 public:
  using InvalidArchitecture::InvalidArchitecture;
};

enum class SpaceKind { cell, macro, product };

/// One decision slot. `values` carries the numeric meaning of each option when
/// the space needs it (macro sizes); otherwise it is the option index.
struct Slot {
  std::string label;
  std::vector<std::string> options;
  std::vector<int> values;
};

/// Ordered decision slots plus the kind-specific validity rules.
class ActionSchema {
 public:
  ActionSchema() = default;
  ActionSchema(SpaceKind kind, std::vector<Slot> slots);

  SpaceKind kind() const { return kind_; }
  const std::vector<Slot>& slots() const { return slots_; }
  const Slot& slot(std::size_t l) const { return slots_.at(l); }
  std::size_t size() const { return slots_.size(); }
  std::size_t option_count(std::size_t l) const { return slots_.at(l).options.size(); }
  std::size_t offset(std::size_t l) const { return offsets_.at(l); }
  std::size_t onehot_width() const { return width_; }
  std::size_t max_options() const;

  /// Stable description of the action layout; checkpoints record it.
  std::string fingerprint() const;

  // Macro geometry (valid only for SpaceKind::macro).
  std::size_t max_stages() const { return (slots_.size() - 3) / 2; }
  int max_block() const;

 private:
  SpaceKind kind_ = SpaceKind::product;
  std::vector<Slot> slots_;
  std::vector<std::size_t> offsets_;
  std::size_t width_ = 0;
};

inline constexpr std::size_t kCellEdges = 6;
inline constexpr std::size_t kCellOps = 5;
inline constexpr int kCellCount = 15625;

struct CellArch {
  std::array<int, kCellEdges> edge_ops{};
  friend bool operator==(const CellArch&, const CellArch&) = default;
};

struct MacroArch {
  int base_channel = 0;
  int depth = 0;
  int num_stages = 0;
  std::vector<int> blocks_per_stage;
  std::vector<int> channel_distribution;
  friend bool operator==(const MacroArch&, const MacroArch&) = default;
};

struct ProductArch {
  Actions choices;
  friend bool operator==(const ProductArch&, const ProductArch&) = default;
};

using Architecture = std::variant<CellArch, MacroArch, ProductArch>;

/// Default cell op vocabulary, in benchmark file order.
std::vector<std::string> default_cell_ops();

ActionSchema cell_schema(std::vector<std::string> ops = default_cell_ops());
ActionSchema macro_schema(std::vector<int> base_channels = {48, 56, 64, 72},
                          std::vector<int> depths = {15, 20, 25, 30},
                          std::vector<int> stage_counts = {4, 5});
/// Unconstrained product of the given slots.
ActionSchema product_schema(std::vector<Slot> slots);

ActionSchema schema_from_json(const nlohmann::json& j);
nlohmann::json schema_to_json(const ActionSchema& schema);

Architecture actions_to_arch(const ActionSchema& schema, std::span<const int> actions);
Actions arch_to_actions(const ActionSchema& schema, const Architecture& arch);
bool is_valid(const ActionSchema& schema, std::span<const int> actions);

/// Base-5 positional index sum(op_i * 5^i).
int cell_index(const CellArch& arch);
CellArch cell_from_index(int index);

/// Allowed options for slot prefix.size(): an option is allowed iff some
/// completion of prefix + option is a valid architecture.
ActionMask valid_action_mask(const ActionSchema& schema, std::span<const int> prefix);

/// One-hot encoding of a possibly partial action sequence; untaken slots are zero blocks.
std::vector<double> arch_onehot(const ActionSchema& schema, std::span<const int> actions);
/// Writes the encoding into `out` (length onehot_width()); `out` is zeroed first.
void write_onehot(const ActionSchema& schema, std::span<const int> actions, std::span<double> out);

/// Slot-by-slot uniform sample over the options allowed by the mask.
Actions sample_valid_actions(const ActionSchema& schema, Rng& rng);

/// Short identifier used in traces: the cell index for cell spaces, dotted actions otherwise.
std::string arch_key(const ActionSchema& schema, std::span<const int> actions);

}  // namespace catchnas
