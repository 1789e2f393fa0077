#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "qgraph/errors.hpp"
#include "qgraph/spectrum.hpp"

namespace qg {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitInternal = 1, kExitInput = 2, kExitHypothesis = 3, kExitDiverged = 4 };

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Hash of the canonical (key-sorted, compact) dump of a config.
inline std::string config_hash(const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
  return buf;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunRecord {
  std::string command;
  nlohmann::json config;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;
  int exit_code = 0;
};

inline nlohmann::json to_json(const RunRecord& r) {
  return {{"command", r.command},         {"config_hash", config_hash(r.config)}, {"config", r.config},
          {"started", r.started},         {"finished", r.finished},               {"outputs", r.outputs},
          {"exit_code", r.exit_code},     {"version", kToolVersion}};
}

/// One JSON object per line, append only.
inline void append_run_record(const std::filesystem::path& dir, const RunRecord& r) {
  std::ofstream out(dir / "runs.jsonl", std::ios::app);
  if (!out) throw InputError("cannot append to " + (dir / "runs.jsonl").string());
  out << to_json(r).dump() << '\n';
}

inline std::vector<nlohmann::json> read_run_records(const std::filesystem::path& dir) {
  std::vector<nlohmann::json> out;
  std::ifstream in(dir / "runs.jsonl");
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

/// k, lambda, multiplicity with full precision.
inline void write_spectrum_csv(const SpectralBasis& b, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw InputError("cannot write " + path.string());
  std::fprintf(f, "k,lambda,multiplicity\n");
  for (const auto& p : b.pairs) std::fprintf(f, "%d,%.17g,%d\n", p.index, p.lambda, p.multiplicity);
  std::fclose(f);
}

inline nlohmann::json to_json(const WeylBounds& w) {
  return {{"C1", w.C1}, {"C2", w.C2}, {"observed_min", w.observed_min}, {"observed_max", w.observed_max},
          {"k_from", w.k_from}, {"k_to", w.k_to}};
}

}  // namespace qg
