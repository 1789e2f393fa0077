#include <gtest/gtest.h>

#include <filesystem>

#include "qgraph/report.hpp"

using namespace qg;

TEST(Report, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a(""), 14695981039346656037ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Report, ConfigHashIgnoresKeyOrder) {
  const auto a = nlohmann::json::parse(R"({"K": 30, "epsilon": 0.001})");
  const auto b = nlohmann::json::parse(R"({"epsilon": 0.001, "K": 30})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  EXPECT_NE(config_hash(a), config_hash(nlohmann::json::parse(R"({"K": 31, "epsilon": 0.001})")));
}

TEST(Report, RunRecordsAppend) {
  const auto dir = std::filesystem::temp_directory_path() / "qg_report_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  RunRecord r{"spectrum", {{"K", 10}}, utc_timestamp(), utc_timestamp(), {"spectrum.csv"}, 0};
  append_run_record(dir, r);
  r.command = "gaps";
  r.exit_code = 3;
  append_run_record(dir, r);
  const auto recs = read_run_records(dir);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0]["command"], "spectrum");
  EXPECT_EQ(recs[1]["exit_code"], 3);
  EXPECT_EQ(recs[1]["config_hash"], config_hash(r.config));
  EXPECT_EQ(recs[0]["version"], kToolVersion);
  std::filesystem::remove_all(dir);
}

TEST(Report, TimestampFormat) {
  const auto t = utc_timestamp();
  ASSERT_EQ(t.size(), 20u);
  EXPECT_EQ(t[10], 'T');
  EXPECT_EQ(t.back(), 'Z');
}
