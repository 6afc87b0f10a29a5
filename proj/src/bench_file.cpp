// Portable benchmark container:
//
//   offset 0   8 bytes   magic "CNASBNCH"
//              u32       container version (1)
//              u64       header length H
//              H bytes   UTF-8 JSON header
//              u64       payload length P (bytes)
//              P bytes   float32 payload, dataset-major, then cell index, then
//                        metric [val_acc_epoch_1 .. val_acc_epoch_E, final_val_acc, final_test_acc]
//              u32       CRC-32 (zlib) over header bytes followed by payload bytes
//
// All integers and floats are little-endian.
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <zlib.h>

#include "catchnas/oracles.hpp"

namespace catchnas {

namespace {

constexpr char kBenchMagic[8] = {'C', 'N', 'A', 'S', 'B', 'N', 'C', 'H'};
constexpr std::uint32_t kBenchVersion = 1;

std::uint32_t crc_of(const std::string& header, std::span<const float> payload) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(header.data()), static_cast<uInt>(header.size()));
  const auto* bytes = reinterpret_cast<const Bytef*>(payload.data());
  std::size_t left = payload.size() * sizeof(float);
  while (left > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = crc32(crc, bytes, chunk);
    bytes += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

struct RawBench {
  BenchHeader header;
  std::vector<float> payload;
  bool checksum_ok = false;
};

RawBench read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open benchmark file '{}'", path.string()));
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kBenchMagic, sizeof magic) != 0)
    throw FormatError(fmt::format("'{}' is not a portable benchmark file", path.string()));
  const auto version = binio::read<std::uint32_t>(in);
  if (version != kBenchVersion) throw FormatError(fmt::format("unsupported benchmark container version {}", version));
  const auto header_len = binio::read<std::uint64_t>(in);
  if (header_len > (1u << 24)) throw FormatError("benchmark header is implausibly large");
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw FormatError("truncated benchmark header");
  const auto payload_len = binio::read<std::uint64_t>(in);
  if (payload_len % sizeof(float) != 0) throw FormatError("payload length is not a whole number of float32 values");

  RawBench raw;
  const auto j = nlohmann::json::parse(header_text);
  if (j.value("format", "") != "catchnas-bench") throw FormatError("header format tag is not 'catchnas-bench'");
  raw.header.datasets = j.at("datasets").get<std::vector<std::string>>();
  raw.header.ops = j.at("ops").get<std::vector<std::string>>();
  raw.header.arch_count = j.at("arch_count").get<std::size_t>();
  raw.header.epochs = j.at("epochs").get<std::size_t>();
  raw.header.source = j.value("source", "");
  const std::size_t expected = raw.header.datasets.size() * raw.header.arch_count * (raw.header.epochs + 2);
  if (payload_len / sizeof(float) != expected)
    throw FormatError(fmt::format("payload holds {} values, header implies {}", payload_len / sizeof(float), expected));
  raw.payload = binio::read_array<float>(in, expected);
  const auto stored = binio::read<std::uint32_t>(in);
  raw.checksum_ok = stored == crc_of(header_text, raw.payload);
  return raw;
}

std::string header_json(const BenchHeader& h) {
  nlohmann::ordered_json j;
  j["format"] = "catchnas-bench";
  j["version"] = kBenchVersion;
  j["datasets"] = h.datasets;
  j["ops"] = h.ops;
  j["arch_count"] = h.arch_count;
  j["epochs"] = h.epochs;
  j["metrics"] = "val_acc_epoch_1..E, final_val_acc, final_test_acc";
  j["arch_order"] = "base-5 cell index sum(op_i * 5^i), edges 1<-0, 2<-0, 2<-1, 3<-0, 3<-1, 3<-2";
  if (!h.source.empty()) j["source"] = h.source;
  return j.dump();
}

}  // namespace

TabularBenchmark TabularBenchmark::load(const std::filesystem::path& path) {
  RawBench raw = read_raw(path);
  if (!raw.checksum_ok) throw FormatError(fmt::format("checksum mismatch in '{}'", path.string()));
  return TabularBenchmark(std::move(raw.header), std::move(raw.payload));
}

void TabularBenchmark::save(const std::filesystem::path& path) const {
  const std::string header = header_json(header_);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(fmt::format("cannot write benchmark file '{}'", path.string()));
  out.write(kBenchMagic, sizeof kBenchMagic);
  binio::write<std::uint32_t>(out, kBenchVersion);
  binio::write<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  binio::write<std::uint64_t>(out, payload_.size() * sizeof(float));
  binio::write_array(out, payload_);
  binio::write<std::uint32_t>(out, crc_of(header, payload_));
  if (!out) throw FormatError(fmt::format("failed writing '{}'", path.string()));
}

BenchCheck check_bench_file(const std::filesystem::path& path) {
  BenchCheck report;
  RawBench raw;
  try {
    raw = read_raw(path);
  } catch (const std::exception& e) {
    report.problems.push_back(e.what());
    return report;
  }
  if (!raw.checksum_ok) report.problems.push_back("checksum mismatch");
  if (raw.header.arch_count != static_cast<std::size_t>(kCellCount))
    report.problems.push_back(fmt::format("arch count {} != {}", raw.header.arch_count, kCellCount));
  if (raw.header.epochs < 12) report.problems.push_back(fmt::format("epoch curve length {} < 12", raw.header.epochs));
  std::size_t out_of_range = 0;
  for (float v : raw.payload)
    if (!(v >= 0.0f && v <= 100.0f)) ++out_of_range;
  if (out_of_range > 0) report.problems.push_back(fmt::format("{} values outside [0, 100]", out_of_range));
  report.datasets = raw.header.datasets;

  if (report.problems.empty()) {
    TabularBenchmark bench(raw.header, std::move(raw.payload));
    std::vector<std::vector<double>> finals(bench.tasks().size());
    for (std::size_t d = 0; d < finals.size(); ++d) {
      finals[d].reserve(kCellCount);
      for (int i = 0; i < kCellCount; ++i) finals[d].push_back(bench.final_val_acc(d, i));
      report.max_final_val.push_back(*std::max_element(finals[d].begin(), finals[d].end()));
    }
    for (std::size_t a = 0; a < finals.size(); ++a)
      for (std::size_t b = a + 1; b < finals.size(); ++b)
        report.correlations.emplace_back(a, b, spearman(finals[a], finals[b]));
  }
  report.ok = report.problems.empty();
  return report;
}

}  // namespace catchnas

namespace catchnas {

TabularBenchmark synthetic_tabular_bench(const SyntheticConfig& family, std::vector<std::string> datasets,
                                         std::vector<double> ceilings, std::size_t epochs, double floor) {
  if (datasets.size() != ceilings.size()) throw std::invalid_argument("one ceiling per dataset required");
  SyntheticConfig cfg = family;
  cfg.task_count = datasets.size();
  cfg.max_epoch = static_cast<int>(epochs);
  const SyntheticOracle oracle(cell_schema(), cfg);
  BenchHeader header;
  header.datasets = std::move(datasets);
  header.ops = default_cell_ops();
  header.epochs = epochs;
  header.source = fmt::format("synthetic family seed {}", cfg.family_seed);
  const std::size_t m = epochs + 2;
  std::vector<float> payload(header.datasets.size() * kCellCount * m);
  for (std::size_t d = 0; d < header.datasets.size(); ++d) {
    const double hi = ceilings[d];
    // hi - span * (1 - r) is exactly hi at r == 1.
    auto scale = [&](double r) { return static_cast<float>(hi - (hi - floor) * (1.0 - r)); };
    for (int i = 0; i < kCellCount; ++i) {
      const CellArch arch = cell_from_index(i);
      const Actions a(arch.edge_ops.begin(), arch.edge_ops.end());
      float* row = &payload[(d * kCellCount + static_cast<std::size_t>(i)) * m];
      for (std::size_t e = 1; e <= epochs; ++e) {
        RewardSpec spec;
        spec.fidelity_epoch = static_cast<int>(e);
        row[e - 1] = scale(oracle.query(a, d, spec).performance);
      }
      const double r = oracle.final_reward(a, d);
      row[epochs] = scale(r);
      row[epochs + 1] = std::max(static_cast<float>(floor), scale(r) - 0.3f);
    }
  }
  return TabularBenchmark(std::move(header), std::move(payload));
}

}  // namespace catchnas
