#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support/oracles.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kDemo = std::string(TNC_SAMPLES_DIR) + "/demo3.circuit";
const std::string kGrid = std::string(TNC_SAMPLES_DIR) + "/grid12.circuit";

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "tnc_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(TNC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string read_text(const std::string& path) { return slurp(path); }

}  // namespace

TEST(Cli, DemoAmplitudeMatchesStateVector) {
  const auto circ = tnc::parse_circuit(read_text(kDemo));
  for (const std::string bits : {"000", "011", "110", "111"}) {
    const auto out = scratch("demo_" + bits + ".json");
    ASSERT_EQ(cli("run --circuit " + kDemo + " --bitstring " + bits + " --precision double --out " + out.string()), 0);
    const auto j = nlohmann::json::parse(slurp(out));
    const std::complex<double> got(j["amplitude"]["re"].get<double>(), j["amplitude"]["im"].get<double>());
    EXPECT_LT(oracle::rel_err(got, oracle::statevector_amplitude(circ, bits), std::pow(2.0, -1.5)), 1e-10) << bits;
    EXPECT_TRUE(j["verify"]["ok"].get<bool>());
    EXPECT_TRUE(j["counters_match"].get<bool>());
  }
}

TEST(Cli, SlicedGridMatchesStateVector) {
  const auto circ = tnc::parse_circuit(read_text(kGrid));
  const std::string bits = "010011010110";
  const auto out = scratch("grid.json");
  ASSERT_EQ(cli("run --circuit " + kGrid + " --bitstring " + bits + " --precision double --max-rank 8 --workers 2 --out " +
                out.string()),
            0);
  const auto j = nlohmann::json::parse(slurp(out));
  const std::complex<double> got(j["amplitude"]["re"].get<double>(), j["amplitude"]["im"].get<double>());
  EXPECT_LT(oracle::rel_err(got, oracle::statevector_amplitude(circ, bits), std::pow(2.0, -6.0)), 1e-10);
  EXPECT_FALSE(j["plan"]["slices"].empty());
  EXPECT_TRUE(j["counters_match"].get<bool>());
}

TEST(Cli, RepeatRunsAreByteIdentical) {
  const auto a = scratch("rep_a.json"), b = scratch("rep_b.json");
  const std::string args = "run --circuit " + kGrid + " --max-rank 8 --seed 3 --workers 3 --out ";
  ASSERT_EQ(cli(args + a.string()), 0);
  ASSERT_EQ(cli(args + b.string()), 0);
  EXPECT_EQ(slurp(a), slurp(b));
}

TEST(Cli, ReuseToggleKeepsAmplitude) {
  const auto a = scratch("with.json"), b = scratch("without.json");
  const std::string args = "run --circuit " + kGrid + " --max-rank 8 --precision double --out ";
  ASSERT_EQ(cli(args + a.string()), 0);
  ASSERT_EQ(cli(args + b.string() + " --no-reuse"), 0);
  const auto ja = nlohmann::json::parse(slurp(a)), jb = nlohmann::json::parse(slurp(b));
  const std::complex<double> x(ja["amplitude"]["re"].get<double>(), ja["amplitude"]["im"].get<double>());
  const std::complex<double> y(jb["amplitude"]["re"].get<double>(), jb["amplitude"]["im"].get<double>());
  EXPECT_LT(oracle::rel_err(x, y, std::pow(2.0, -6.0)), 1e-10);
  EXPECT_LE(ja["stats"]["multiplies"].get<std::uint64_t>(), jb["stats"]["multiplies"].get<std::uint64_t>());
  EXPECT_TRUE(jb["plan"]["nested"].empty());
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("run --circuit " + kDemo + " --no-such-flag"), 2);
  EXPECT_EQ(cli("run --circuit /nonexistent/file.circuit"), 2);
  EXPECT_EQ(cli("run --circuit " + kDemo + " --precision quad"), 2);
  EXPECT_EQ(cli("run --circuit " + kDemo + " --max-rank 1"), 3);
  EXPECT_EQ(cli("verify --circuit " + kGrid + " --max-rank 8 --replay-samples 100000 --inject-fault 0"), 4);
  EXPECT_EQ(cli("verify --circuit " + kGrid + " --max-rank 8 --replay-samples 3"), 0);
}

TEST(Cli, EverySubcommandRuns) {
  for (const std::string sub : {"run", "verify", "plan", "slice", "reuse-plan", "cost", "perm-stats"}) {
    const bool planned = sub != "plan" && sub != "cost" && sub != "perm-stats";
    const std::string args = sub + " --circuit " + kGrid + (planned ? " --max-rank 9" : "");
    EXPECT_EQ(cli(args), 0) << sub;
    const auto out = scratch(sub + ".csv");
    EXPECT_EQ(cli(args + " --format csv --out " + out.string()), 0) << sub;
    const auto text = slurp(out);
    EXPECT_FALSE(text.empty()) << sub;
    EXPECT_EQ(text.find('{'), std::string::npos) << sub;
  }
}

TEST(Cli, CsvRunHeader) {
  const auto out = scratch("run.csv");
  ASSERT_EQ(cli("run --circuit " + kDemo + " --format csv --out " + out.string()), 0);
  EXPECT_EQ(slurp(out).rfind("field,value\n", 0), 0u);
}

TEST(Cli, SpillPartialsMatchMemory) {
  const auto a = scratch("mem.json"), b = scratch("spill.json");
  const std::string args = "run --circuit " + kGrid + " --max-rank 8 --workers 2 --out ";
  ASSERT_EQ(cli(args + a.string()), 0);
  ASSERT_EQ(cli(args + b.string() + " --partials spill --spill-path " + scratch("p.bin").string()), 0);
  const auto ja = nlohmann::json::parse(slurp(a)), jb = nlohmann::json::parse(slurp(b));
  EXPECT_EQ(ja["amplitude"], jb["amplitude"]);
}
