#include "catchnas/spaces.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <numeric>

namespace catchnas {

namespace {

constexpr std::size_t kMacroHead = 3;  // base channel, depth, stage count

Slot numeric_slot(std::string label, const std::vector<int>& values) {
  Slot s{std::move(label), {}, values};
  for (int v : values) s.options.push_back(std::to_string(v));
  return s;
}

bool feasible_split(int remaining, int slots, int max_block) {
  if (slots == 0) return remaining == 0;
  return slots <= remaining && remaining <= slots * max_block;
}

void check_range(const ActionSchema& schema, std::span<const int> actions) {
  if (actions.size() > schema.size())
    throw InvalidArchitecture(fmt::format("{} actions for a {}-slot schema", actions.size(), schema.size()));
  for (std::size_t l = 0; l < actions.size(); ++l)
    if (actions[l] < 0 || static_cast<std::size_t>(actions[l]) >= schema.option_count(l))
      throw InvalidArchitecture(fmt::format("action {} out of range for slot {} ('{}', {} options)", actions[l],
                                            l, schema.slot(l).label, schema.option_count(l)));
}

// Macro mask assuming the prefix itself is consistent.
ActionMask macro_mask(const ActionSchema& schema, std::span<const int> prefix) {
  const std::size_t l = prefix.size();
  const std::size_t n = schema.option_count(l);
  const int maxb = schema.max_block();
  const auto& depths = schema.slot(1).values;
  const auto& stages = schema.slot(2).values;
  ActionMask mask(n, 0);
  auto any_stage_fits = [&](int d) {
    return std::any_of(stages.begin(), stages.end(), [&](int s) { return feasible_split(d, s, maxb); });
  };
  if (l == 0) {
    const bool ok = std::any_of(depths.begin(), depths.end(), any_stage_fits);
    std::fill(mask.begin(), mask.end(), ok ? 1 : 0);
    return mask;
  }
  const int depth = l > 1 ? depths[prefix[1]] : 0;
  if (l == 1) {
    for (std::size_t k = 0; k < n; ++k) mask[k] = any_stage_fits(depths[k]);
    return mask;
  }
  if (l == 2) {
    for (std::size_t k = 0; k < n; ++k) mask[k] = feasible_split(depth, stages[k], maxb);
    return mask;
  }
  const int active = stages[prefix[2]];
  const std::size_t smax = schema.max_stages();
  const std::size_t group_start = l < kMacroHead + smax ? kMacroHead : kMacroHead + smax;
  const auto index = static_cast<int>(l - group_start);
  int used = 0;
  for (std::size_t i = group_start; i < l; ++i) used += schema.slot(i).values[prefix[i]];
  if (index >= active) {
    mask[0] = 1;
    return mask;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const int v = schema.slot(l).values[k];
    mask[k] = v >= 1 && feasible_split(depth - used - v, active - index - 1, maxb);
  }
  return mask;
}

ActionMask mask_unchecked(const ActionSchema& schema, std::span<const int> prefix) {
  if (schema.kind() == SpaceKind::macro) return macro_mask(schema, prefix);
  return ActionMask(schema.option_count(prefix.size()), 1);
}

void validate_macro(const MacroArch& a, int max_block) {
  auto fail = [](std::string msg) { throw InvalidArchitecture("invalid macro architecture: " + msg); };
  if (a.num_stages < 1) fail("stage count must be positive");
  if (a.blocks_per_stage.size() != static_cast<std::size_t>(a.num_stages))
    fail(fmt::format("{} stage block counts for {} stages", a.blocks_per_stage.size(), a.num_stages));
  if (a.channel_distribution.size() != static_cast<std::size_t>(a.num_stages))
    fail(fmt::format("{} channel levels for {} stages", a.channel_distribution.size(), a.num_stages));
  for (int b : a.blocks_per_stage)
    if (b < 1 || b > max_block) fail(fmt::format("stage block count {} outside [1, {}]", b, max_block));
  for (int c : a.channel_distribution)
    if (c < 1 || c > max_block) fail(fmt::format("channel level count {} outside [1, {}]", c, max_block));
  const int blocks = std::accumulate(a.blocks_per_stage.begin(), a.blocks_per_stage.end(), 0);
  const int channels = std::accumulate(a.channel_distribution.begin(), a.channel_distribution.end(), 0);
  if (blocks != a.depth) fail(fmt::format("stage blocks sum to {} but depth is {}", blocks, a.depth));
  if (channels != a.depth) fail(fmt::format("channel distribution sums to {} but depth is {}", channels, a.depth));
}

int find_value(const Slot& slot, int value) {
  auto it = std::find(slot.values.begin(), slot.values.end(), value);
  if (it == slot.values.end())
    throw InvalidArchitecture(fmt::format("value {} is not an option of slot '{}'", value, slot.label));
  return static_cast<int>(it - slot.values.begin());
}

}  // namespace

ActionSchema::ActionSchema(SpaceKind kind, std::vector<Slot> slots) : kind_(kind), slots_(std::move(slots)) {
  if (slots_.empty()) throw std::invalid_argument("schema needs at least one slot");
  for (auto& s : slots_) {
    if (s.options.size() < 2)
      throw std::invalid_argument(fmt::format("slot '{}' needs at least two options", s.label));
    if (s.values.empty()) {
      s.values.resize(s.options.size());
      std::iota(s.values.begin(), s.values.end(), 0);
    }
    if (s.values.size() != s.options.size())
      throw std::invalid_argument(fmt::format("slot '{}' has mismatched option values", s.label));
    offsets_.push_back(width_);
    width_ += s.options.size();
  }
  if (kind_ == SpaceKind::cell && slots_.size() != kCellEdges)
    throw std::invalid_argument("cell schema must have exactly 6 edge slots");
  if (kind_ == SpaceKind::cell)
    for (auto& s : slots_)
      if (s.options.size() != kCellOps) throw std::invalid_argument("cell edges take exactly 5 ops");
  if (kind_ == SpaceKind::macro && (slots_.size() < kMacroHead + 2 || (slots_.size() - kMacroHead) % 2 != 0))
    throw std::invalid_argument("macro schema must be head slots plus paired block/channel slots");
}

std::size_t ActionSchema::max_options() const {
  std::size_t m = 0;
  for (auto& s : slots_) m = std::max(m, s.options.size());
  return m;
}

int ActionSchema::max_block() const { return slots_.at(kMacroHead).values.back(); }

std::string ActionSchema::fingerprint() const {
  static constexpr const char* kinds[] = {"cell", "macro", "product"};
  std::string out = kinds[static_cast<int>(kind_)];
  for (auto& s : slots_) out += fmt::format("|{}:{}", s.label, fmt::join(s.values, ","));
  return out;
}

std::vector<std::string> default_cell_ops() {
  return {"none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3"};
}

ActionSchema cell_schema(std::vector<std::string> ops) {
  std::vector<Slot> slots;
  // Edge order: 1<-0, 2<-0, 2<-1, 3<-0, 3<-1, 3<-2.
  static constexpr const char* edges[] = {"edge_1_0", "edge_2_0", "edge_2_1", "edge_3_0", "edge_3_1", "edge_3_2"};
  for (auto* e : edges) slots.push_back(Slot{e, ops, {}});
  return ActionSchema(SpaceKind::cell, std::move(slots));
}

ActionSchema macro_schema(std::vector<int> base_channels, std::vector<int> depths, std::vector<int> stage_counts) {
  if (base_channels.size() < 2 || depths.size() < 2 || stage_counts.size() < 2)
    throw std::invalid_argument("macro schema option lists need at least two entries");
  std::sort(depths.begin(), depths.end());
  std::sort(stage_counts.begin(), stage_counts.end());
  const int max_stages = stage_counts.back();
  const int max_block = depths.back() - (stage_counts.front() - 1);
  std::vector<int> counts(static_cast<std::size_t>(max_block) + 1);
  std::iota(counts.begin(), counts.end(), 0);

  std::vector<Slot> slots;
  slots.push_back(numeric_slot("base_channel", base_channels));
  slots.push_back(numeric_slot("depth", depths));
  slots.push_back(numeric_slot("num_stages", stage_counts));
  for (int i = 0; i < max_stages; ++i) slots.push_back(numeric_slot(fmt::format("stage_blocks_{}", i), counts));
  for (int i = 0; i < max_stages; ++i) slots.push_back(numeric_slot(fmt::format("channel_blocks_{}", i), counts));
  return ActionSchema(SpaceKind::macro, std::move(slots));
}

ActionSchema product_schema(std::vector<Slot> slots) { return ActionSchema(SpaceKind::product, std::move(slots)); }

ActionSchema schema_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "cell") return cell_schema(j.value("ops", default_cell_ops()));
  if (kind == "macro")
    return macro_schema(j.value("base_channels", std::vector<int>{48, 56, 64, 72}),
                        j.value("depths", std::vector<int>{15, 20, 25, 30}),
                        j.value("stage_counts", std::vector<int>{4, 5}));
  if (kind == "product") {
    std::vector<Slot> slots;
    for (auto& s : j.at("slots"))
      slots.push_back(Slot{s.at("label").get<std::string>(), s.at("options").get<std::vector<std::string>>(), {}});
    return product_schema(std::move(slots));
  }
  throw std::invalid_argument(fmt::format("unknown search space kind '{}'", kind));
}

nlohmann::json schema_to_json(const ActionSchema& schema) {
  switch (schema.kind()) {
    case SpaceKind::cell: return {{"kind", "cell"}, {"ops", schema.slot(0).options}};
    case SpaceKind::macro: {
      std::vector<int> stages = schema.slot(2).values;
      return {{"kind", "macro"},
              {"base_channels", schema.slot(0).values},
              {"depths", schema.slot(1).values},
              {"stage_counts", stages}};
    }
    case SpaceKind::product: {
      nlohmann::json slots = nlohmann::json::array();
      for (auto& s : schema.slots()) slots.push_back({{"label", s.label}, {"options", s.options}});
      return {{"kind", "product"}, {"slots", slots}};
    }
  }
  return {};
}

Architecture actions_to_arch(const ActionSchema& schema, std::span<const int> actions) {
  if (actions.size() != schema.size())
    throw InvalidArchitecture(fmt::format("{} actions for a {}-slot schema", actions.size(), schema.size()));
  check_range(schema, actions);
  switch (schema.kind()) {
    case SpaceKind::cell: {
      CellArch a;
      std::copy(actions.begin(), actions.end(), a.edge_ops.begin());
      return a;
    }
    case SpaceKind::macro: {
      MacroArch a;
      a.base_channel = schema.slot(0).values[actions[0]];
      a.depth = schema.slot(1).values[actions[1]];
      a.num_stages = schema.slot(2).values[actions[2]];
      const std::size_t smax = schema.max_stages();
      for (std::size_t i = 0; i < smax; ++i) {
        const int b = schema.slot(kMacroHead + i).values[actions[kMacroHead + i]];
        const int c = schema.slot(kMacroHead + smax + i).values[actions[kMacroHead + smax + i]];
        if (static_cast<int>(i) < a.num_stages) {
          a.blocks_per_stage.push_back(b);
          a.channel_distribution.push_back(c);
        } else if (b != 0 || c != 0) {
          throw InvalidArchitecture(fmt::format("slot {} is beyond {} stages and must be empty", i, a.num_stages));
        }
      }
      validate_macro(a, schema.max_block());
      return a;
    }
    case SpaceKind::product: return ProductArch{Actions(actions.begin(), actions.end())};
  }
  throw InvalidArchitecture("unknown schema kind");
}

Actions arch_to_actions(const ActionSchema& schema, const Architecture& arch) {
  Actions actions;
  if (const auto* cell = std::get_if<CellArch>(&arch)) {
    if (schema.kind() != SpaceKind::cell) throw InvalidArchitecture("cell architecture for a non-cell schema");
    actions.assign(cell->edge_ops.begin(), cell->edge_ops.end());
  } else if (const auto* macro = std::get_if<MacroArch>(&arch)) {
    if (schema.kind() != SpaceKind::macro) throw InvalidArchitecture("macro architecture for a non-macro schema");
    validate_macro(*macro, schema.max_block());
    actions.push_back(find_value(schema.slot(0), macro->base_channel));
    actions.push_back(find_value(schema.slot(1), macro->depth));
    actions.push_back(find_value(schema.slot(2), macro->num_stages));
    const std::size_t smax = schema.max_stages();
    if (static_cast<std::size_t>(macro->num_stages) > smax) throw InvalidArchitecture("too many stages");
    for (std::size_t i = 0; i < smax; ++i)
      actions.push_back(i < macro->blocks_per_stage.size() ? macro->blocks_per_stage[i] : 0);
    for (std::size_t i = 0; i < smax; ++i)
      actions.push_back(i < macro->channel_distribution.size() ? macro->channel_distribution[i] : 0);
  } else {
    actions = std::get<ProductArch>(arch).choices;
  }
  actions_to_arch(schema, actions);
  return actions;
}

bool is_valid(const ActionSchema& schema, std::span<const int> actions) {
  try {
    actions_to_arch(schema, actions);
    return true;
  } catch (const InvalidArchitecture&) {
    return false;
  }
}

int cell_index(const CellArch& arch) {
  int index = 0;
  int scale = 1;
  for (int op : arch.edge_ops) {
    if (op < 0 || op >= static_cast<int>(kCellOps)) throw InvalidArchitecture(fmt::format("cell op {} out of range", op));
    index += op * scale;
    scale *= static_cast<int>(kCellOps);
  }
  return index;
}

CellArch cell_from_index(int index) {
  if (index < 0 || index >= kCellCount) throw InvalidArchitecture(fmt::format("cell index {} out of range", index));
  CellArch a;
  for (auto& op : a.edge_ops) {
    op = index % static_cast<int>(kCellOps);
    index /= static_cast<int>(kCellOps);
  }
  return a;
}

ActionMask valid_action_mask(const ActionSchema& schema, std::span<const int> prefix) {
  if (prefix.size() >= schema.size())
    throw UnreachablePrefix(fmt::format("prefix of length {} leaves no slot to decide", prefix.size()));
  check_range(schema, prefix);
  if (schema.kind() == SpaceKind::macro) {
    for (std::size_t i = 0; i < prefix.size(); ++i)
      if (!macro_mask(schema, prefix.first(i))[prefix[i]])
        throw UnreachablePrefix(fmt::format("no valid architecture extends this prefix (slot {})", i));
  }
  ActionMask mask = mask_unchecked(schema, prefix);
  if (std::none_of(mask.begin(), mask.end(), [](auto m) { return m != 0; }))
    throw UnreachablePrefix("no valid architecture extends this prefix");
  return mask;
}

void write_onehot(const ActionSchema& schema, std::span<const int> actions, std::span<double> out) {
  if (out.size() != schema.onehot_width())
    throw ShapeError(fmt::format("one-hot buffer has {} entries, expected {}", out.size(), schema.onehot_width()));
  check_range(schema, actions);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t l = 0; l < actions.size(); ++l) out[schema.offset(l) + static_cast<std::size_t>(actions[l])] = 1.0;
}

std::vector<double> arch_onehot(const ActionSchema& schema, std::span<const int> actions) {
  std::vector<double> out(schema.onehot_width());
  write_onehot(schema, actions, out);
  return out;
}

Actions sample_valid_actions(const ActionSchema& schema, Rng& rng) {
  Actions actions;
  actions.reserve(schema.size());
  std::vector<int> allowed;
  for (std::size_t l = 0; l < schema.size(); ++l) {
    const ActionMask mask = mask_unchecked(schema, actions);
    allowed.clear();
    for (std::size_t k = 0; k < mask.size(); ++k)
      if (mask[k]) allowed.push_back(static_cast<int>(k));
    if (allowed.empty()) throw UnreachablePrefix("sampling reached a dead end");
    std::uniform_int_distribution<std::size_t> pick(0, allowed.size() - 1);
    actions.push_back(allowed[pick(rng)]);
  }
  return actions;
}

std::string arch_key(const ActionSchema& schema, std::span<const int> actions) {
  if (schema.kind() == SpaceKind::cell && actions.size() == kCellEdges) {
    CellArch a;
    std::copy(actions.begin(), actions.end(), a.edge_ops.begin());
    return std::to_string(cell_index(a));
  }
  return fmt::format("{}", fmt::join(actions, "."));
}

}  // namespace catchnas
