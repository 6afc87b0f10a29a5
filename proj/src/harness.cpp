#include "catchnas/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <mutex>
#include <json.hpp>
#include <set>
#include <sstream>
#include <thread>

namespace catchnas {

namespace fs = std::filesystem;

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::catch_agent: return "catch";
    case Algorithm::random: return "random";
    case Algorithm::rea: return "rea";
    case Algorithm::reinforce: return "reinforce";
  }
  return "catch";
}

Algorithm parse_algorithm(const std::string& name) {
  for (auto a : {Algorithm::catch_agent, Algorithm::random, Algorithm::rea, Algorithm::reinforce})
    if (to_string(a) == name) return a;
  throw std::invalid_argument(fmt::format("unknown algorithm '{}'", name));
}

TrialOutput run_trial(const AlgorithmSpec& spec, const TaskOracle& oracle, const AgentBundle* checkpoint,
                      std::size_t task, std::size_t budget, std::uint64_t seed) {
  TrialOutput out;
  if (spec.algorithm == Algorithm::catch_agent) {
    RunConfig cfg = spec.run;
    cfg.seed = seed;
    cfg.target_task = task;
    cfg.adapt_search_epochs = budget;
    std::optional<AgentBundle> fresh;
    if (!checkpoint) {
      if (cfg.mode != AblationMode::sfs) throw std::invalid_argument("CATCH adaptation needs a checkpoint");
      fresh = AgentBundle::init(oracle.schema(), cfg.agent, mix64(seed ^ 0x5F5));
      checkpoint = &*fresh;
    }
    auto r = adapt(*checkpoint, oracle, cfg);
    out.trace = std::move(r.trace);
    out.latents = std::move(r.latents);
    return out;
  }
  const BaselineTask bt{&oracle, task, spec.run.search_reward, spec.run.report_reward};
  Rng rng(mix64(seed ^ 0xBA5E));
  switch (spec.algorithm) {
    case Algorithm::random: out.trace = run_random(bt, budget, rng).trace; break;
    case Algorithm::rea: out.trace = run_rea(bt, budget, spec.rea, rng).trace; break;
    case Algorithm::reinforce: out.trace = run_reinforce(bt, budget, spec.reinforce, rng).trace; break;
    case Algorithm::catch_agent: break;
  }
  return out;
}

std::vector<std::uint64_t> Campaign::resolved_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> s(trials);
  for (std::size_t i = 0; i < trials; ++i) s[i] = base_seed + i;
  return s;
}

void Campaign::validate() const {
  if (trials == 0) throw std::invalid_argument("campaign needs at least one trial");
  if (!seeds.empty() && seeds.size() != trials) throw std::invalid_argument("seed list length differs from trial count");
  const auto s = resolved_seeds();
  if (std::set<std::uint64_t>(s.begin(), s.end()).size() != s.size())
    throw std::invalid_argument("campaign seeds must be distinct");
  if (budget == 0) throw std::invalid_argument("campaign budget must be at least 1");
}

namespace {

void mean_std(std::span<const double> v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Aggregate aggregate_trials(std::span<const std::uint64_t> seeds, std::span<const std::vector<TraceRow>> traces) {
  if (seeds.size() != traces.size()) throw std::invalid_argument("seed and trace counts differ");
  Aggregate agg;
  std::size_t longest = 0;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (traces[i].empty()) continue;
    longest = std::max(longest, traces[i].size());
    agg.sorted_final.push_back({seeds[i], traces[i].back().best_report, traces[i].back().best_reward});
  }
  std::sort(agg.sorted_final.begin(), agg.sorted_final.end(), [](const FinalEntry& a, const FinalEntry& b) {
    return a.best_report != b.best_report ? a.best_report < b.best_report : a.seed < b.seed;
  });
  for (std::size_t e = 0; e < longest; ++e) {
    std::vector<double> rew, rep;
    for (const auto& t : traces) {
      if (t.empty()) continue;
      const auto& row = t[std::min(e, t.size() - 1)];
      rew.push_back(row.best_reward);
      rep.push_back(row.best_report);
    }
    CurvePoint p;
    p.epoch = e + 1;
    p.n = rew.size();
    mean_std(rew, p.mean_reward, p.std_reward);
    mean_std(rep, p.mean_report, p.std_report);
    agg.curve.push_back(p);
  }
  return agg;
}

void write_aggregate(const fs::path& dir, const Aggregate& aggregate) {
  std::ofstream sf(dir / "sorted_final.csv", std::ios::trunc);
  sf << "rank,seed,final_best_report,final_best_reward\n";
  for (std::size_t i = 0; i < aggregate.sorted_final.size(); ++i) {
    const auto& f = aggregate.sorted_final[i];
    sf << fmt::format("{},{},{},{}\n", i + 1, f.seed, f.best_report, f.best_reward);
  }
  std::ofstream cv(dir / "curve.csv", std::ios::trunc);
  cv << "epoch,n,mean_best_reward,std_best_reward,mean_best_report,std_best_report\n";
  for (const auto& p : aggregate.curve)
    cv << fmt::format("{},{},{},{},{},{}\n", p.epoch, p.n, p.mean_reward, p.std_reward, p.mean_report, p.std_report);
  if (!sf || !cv) throw std::runtime_error(fmt::format("failed writing aggregates under '{}'", dir.string()));
}

CampaignSummary run_campaign(const Campaign& campaign, const TaskOracle& oracle, const AgentBundle* checkpoint) {
  campaign.validate();
  const auto seeds = campaign.resolved_seeds();
  const std::size_t n = seeds.size();
  std::vector<std::optional<std::vector<TraceRow>>> results(n);
  std::vector<std::string> errors(n);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = run_trial(campaign.spec, oracle, checkpoint, campaign.task, campaign.budget, seeds[i]).trace;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t width = std::clamp<std::size_t>(campaign.workers, 1, n);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < width; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  CampaignSummary summary;
  summary.trials = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) {
      summary.seeds.push_back(seeds[i]);
      summary.traces.push_back(std::move(*results[i]));
    } else {
      summary.failures.push_back({seeds[i], errors[i]});
    }
  }
  summary.aggregate = aggregate_trials(summary.seeds, summary.traces);

  if (!campaign.out_dir.empty()) {
    fs::create_directories(campaign.out_dir / "trials");
    nlohmann::json manifest;
    manifest["label"] = campaign.label.empty() ? to_string(campaign.spec.algorithm) : campaign.label;
    manifest["algorithm"] = to_string(campaign.spec.algorithm);
    manifest["mode"] = to_string(campaign.spec.run.mode);
    manifest["task"] = oracle.tasks().at(campaign.task);
    manifest["budget"] = campaign.budget;
    manifest["trials"] = n;
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t i = 0; i < summary.seeds.size(); ++i) {
      const std::string name = fmt::format("trials/seed_{}.csv", summary.seeds[i]);
      write_trace_csv(campaign.out_dir / name, summary.traces[i]);
      files.push_back({{"seed", summary.seeds[i]}, {"trace", name}});
    }
    manifest["completed"] = files;
    nlohmann::json failed = nlohmann::json::array();
    for (const auto& f : summary.failures) failed.push_back({{"seed", f.seed}, {"error", f.error}});
    manifest["failures"] = failed;
    std::ofstream(campaign.out_dir / "campaign.json", std::ios::trunc) << manifest.dump(2) << '\n';
    write_aggregate(campaign.out_dir, summary.aggregate);
  }
  return summary;
}

LoadedCampaign load_campaign(const fs::path& dir) {
  std::ifstream in(dir / "campaign.json");
  if (!in) throw std::runtime_error(fmt::format("no campaign.json under '{}'", dir.string()));
  const auto manifest = nlohmann::json::parse(in);
  LoadedCampaign c;
  c.label = manifest.at("label").get<std::string>();
  c.task = manifest.at("task").get<std::string>();
  for (const auto& f : manifest.at("completed")) {
    c.seeds.push_back(f.at("seed").get<std::uint64_t>());
    c.traces.push_back(read_trace_csv(dir / f.at("trace").get<std::string>()));
  }
  return c;
}

CompareTable compare(std::span<const LoadedCampaign> campaigns, std::span<const std::size_t> ks,
                     std::optional<double> global_max) {
  if (campaigns.empty()) throw std::invalid_argument("nothing to compare");
  CompareTable table;
  table.task = campaigns.front().task;
  table.ks.assign(ks.begin(), ks.end());
  for (const auto& c : campaigns) {
    if (c.task != table.task)
      throw std::invalid_argument(fmt::format("campaign '{}' ran on '{}', expected '{}'", c.label, c.task, table.task));
    CompareRow row;
    row.label = c.label;
    std::vector<double> finals;
    for (const auto& t : c.traces)
      if (!t.empty()) finals.push_back(t.back().best_report);
    row.trials = finals.size();
    if (!finals.empty()) {
      mean_std(finals, row.mean, row.std);
      row.median = median(finals);
    }
    for (std::size_t k : ks) {
      std::vector<double> at;
      for (const auto& t : c.traces)
        if (!t.empty()) at.push_back(t[std::min(std::max<std::size_t>(k, 1), t.size()) - 1].best_report);
      double m = 0.0, s = 0.0;
      if (!at.empty()) mean_std(at, m, s);
      row.best_at.push_back(m);
    }
    table.rows.push_back(std::move(row));
  }
  if (global_max) {
    CompareRow row;
    row.label = "max";
    row.mean = row.median = *global_max;
    row.best_at.assign(ks.size(), *global_max);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string to_csv(const CompareTable& table) {
  std::string out = "label,task,trials,mean,std,median";
  for (auto k : table.ks) out += fmt::format(",best@{}", k);
  out += '\n';
  for (const auto& r : table.rows) {
    out += fmt::format("{},{},{},{},{},{}", r.label, table.task, r.trials, r.mean, r.std, r.median);
    for (double v : r.best_at) out += fmt::format(",{}", v);
    out += '\n';
  }
  return out;
}

std::string to_text(const CompareTable& table) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head{"algorithm", "trials", "mean ± std", "median"};
  for (auto k : table.ks) head.push_back(fmt::format("best@{}", k));
  cells.push_back(head);
  for (const auto& r : table.rows) {
    std::vector<std::string> line{r.label, r.label == "max" ? "-" : std::to_string(r.trials),
                                  r.label == "max" ? fmt::format("{:.4f}", r.mean)
                                                   : fmt::format("{:.4f} ± {:.4f}", r.mean, r.std),
                                  fmt::format("{:.4f}", r.median)};
    for (double v : r.best_at) line.push_back(fmt::format("{:.4f}", v));
    cells.push_back(std::move(line));
  }
  // Column widths in code points so the ± sign aligns.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(head.size(), 0);
  for (const auto& line : cells)
    for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], width(line[i]));
  std::ostringstream os;
  os << "task: " << table.task << '\n';
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      os << line[i] << std::string(widths[i] - width(line[i]) + (i + 1 < line.size() ? 2 : 0), ' ');
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace catchnas
