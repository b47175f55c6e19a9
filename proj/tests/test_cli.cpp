#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hemo1d/network.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace hemo1d;

namespace {

struct Outcome {
  int code = 0;
  std::string output;
};

Outcome cli(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "hemo1d_cli_test.log";
  const std::string command = std::string("\"") + HEMO1D_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(command.c_str());
  std::ifstream in(log);
  std::stringstream text;
  text << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, text.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream text;
  text << in.rdbuf();
  return text.str();
}

const std::string kData = HEMO1D_DATA_DIR;

// A three-vessel network written next to the test outputs.
fs::path small_network() {
  const fs::path dir = fs::temp_directory_path() / "hemo1d_cli";
  fs::create_directories(dir);
  const fs::path path = dir / "y.json";
  std::ofstream(path) << serialize_network(testing::y_network());
  return path;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(cli("").code == 1);
  CHECK(cli("frobnicate").code == 1);
  CHECK(cli("run --posture sideways --config " + kData + "/dorv_rest.json").code == 1);
  const Outcome missing = cli("run --network " + kData + "/dorv_network.json --inflow /nonexistent/inflow.csv");
  CHECK(missing.code == 1);
  CHECK(missing.output.find("inflow") != std::string::npos);
  CHECK(cli("run --network " + kData + "/dorv_network.json").code == 1);
  CHECK(cli("check --config " + kData + "/missing.json").code == 1);
}

TEST_CASE("check and scale-flows") {
  const Outcome ok = cli("check --config " + kData + "/dorv_rest.json");
  CHECK(ok.code == 0);
  CHECK(ok.output.find("OK") != std::string::npos);
  const Outcome scaled = cli("scale-flows " + kData + "/dorv_flows.json");
  CHECK(scaled.code == 0);
  CHECK(scaled.output.find("Brachiocephalic") != std::string::npos);
}

TEST_CASE("expanding taper is reported") {
  const fs::path dir = fs::temp_directory_path() / "hemo1d_cli";
  fs::create_directories(dir);
  auto j = nlohmann::json::parse(serialize_network(testing::y_network()));
  j["vessels"][2]["r_out_cm"] = 0.7;
  j["vessels"][2].erase("taper");
  std::ofstream(dir / "expanding.json") << j.dump();
  const Outcome o = cli("check --network " + (dir / "expanding.json").string() + " --inflow " + kData +
                        "/dorv_rest_inflow.csv");
  CHECK(o.code == 0);
  CHECK(o.output.find("expand") != std::string::npos);
}

TEST_CASE("run, rerun and analyze a small network") {
  const fs::path net = small_network();
  const fs::path dir = net.parent_path();
  const std::string base = "run --network " + net.string() + " --inflow " + kData + "/dorv_rest_inflow.csv --cycles 3";
  REQUIRE(cli(base + " --out " + (dir / "a").string()).code == 0);
  REQUIRE(cli(base + " --workers 2 --out " + (dir / "b").string()).code == 0);
  for (const char* file : {"report.json", "manifest.json", "run_summary.json", "inflow.csv", "vessels/vessel_01.csv"}) {
    CHECK(fs::exists(dir / "a" / file));
  }
  CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
  CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
  CHECK(slurp(dir / "a" / "vessels" / "vessel_02.csv") == slurp(dir / "b" / "vessels" / "vessel_02.csv"));
  const std::string header = slurp(dir / "a" / "vessels" / "vessel_03.csv").substr(0, 30);
  CHECK(header.rfind("t_s,x_cm,p_mmHg,q_mls,A_cm2", 0) == 0);

  REQUIRE(cli(base + " --exercise --out " + (dir / "ex").string()).code == 0);
  const auto rest = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  const auto ex = nlohmann::json::parse(slurp(dir / "ex" / "report.json"));
  CHECK(ex["mean_inflow_mls"].get<double>() == doctest::Approx(2.0 * rest["mean_inflow_mls"].get<double>()).epsilon(1e-9));
  CHECK(ex["period_s"].get<double>() == doctest::Approx(0.6 * rest["period_s"].get<double>()).epsilon(1e-12));

  const Outcome analyzed = cli("analyze --run " + (dir / "a").string() + " --network " + net.string() + " --inflow " +
                               kData + "/dorv_rest_inflow.csv --out " + (dir / "re").string());
  CHECK(analyzed.code == 0);
  const auto again = nlohmann::json::parse(slurp(dir / "re" / "report.json"));
  CHECK(again["aortic_pressure_mmhg"]["systolic"].get<double>() ==
        doctest::Approx(rest["aortic_pressure_mmhg"]["systolic"].get<double>()).epsilon(1e-6));
}
