#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace {

int run_cli(const std::string& args) {
  std::string cmd = std::string(LSMD_CLI_PATH) + " " + args +
                    " > /tmp/lsmd_cli_out.txt 2> /tmp/lsmd_cli_err.txt";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string cols() { return " --x-cols price --z-cols price_sq"; }

std::string example_data() {
  return std::string(LSMD_SOURCE_DIR) + "/data/example_panel.csv";
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("estimate runs end to end on the bundled panel") {
  int rc = run_cli("estimate --data " + example_data() + cols() +
                   " --factors 1 --alpha-bounds 0,5 --out /tmp/lsmd_cli_est");
  CHECK(rc == 0);
  nlohmann::json j;
  std::ifstream in("/tmp/lsmd_cli_est/estimate.json");
  REQUIRE(in.good());
  in >> j;
  REQUIRE(j.contains("alpha"));
  REQUIRE(j.contains("inference"));
  CHECK(j["settings"]["factors"] == 1);
  CHECK(j["inference"]["se"].size() == 2);
  CHECK(j["residual_factor_spectrum"].size() > 2);

  // frozen goldens for the bundled panel (seeded draw of the price design)
  double alpha = j["alpha"][0];
  double beta = j["beta"][0];
  CHECK(alpha == doctest::Approx(1.0519264786613733).epsilon(1e-6));
  CHECK(beta == doctest::Approx(-3.131653634874009).epsilon(1e-6));
}

TEST_CASE("schema violations exit with an error") {
  int rc = run_cli("estimate --data " + example_data() + cols() +
                   " --share-col nosuch --factors 1 --alpha-bounds 0,5 "
                   "--out /tmp/lsmd_cli_bad");
  CHECK(rc == 1);
}

TEST_CASE("factor count beyond the panel dimensions exits with an error") {
  int rc = run_cli("estimate --data " + example_data() + cols() +
                   " --factors 99 --alpha-bounds 0,5 --out /tmp/lsmd_cli_bad2");
  CHECK(rc == 1);
}

TEST_CASE("simulate smoke run writes reproducible artifacts") {
  std::string flags =
      " -J 8 -T 8 --reps 2 --seed 11 --nodes 32 --no-bias-correction";
  CHECK(run_cli("simulate" + flags + " --out /tmp/lsmd_cli_sim1") == 0);
  CHECK(run_cli("simulate" + flags + " --out /tmp/lsmd_cli_sim2") == 0);
  std::string a = slurp("/tmp/lsmd_cli_sim1/mc_report.csv");
  std::string b = slurp("/tmp/lsmd_cli_sim2/mc_report.csv");
  REQUIRE(!a.empty());
  CHECK(a == b);
}

TEST_CASE("single-replication smoke leaves one entry in the log") {
  CHECK(run_cli("simulate -J 8 -T 8 --reps 1 --seed 3 --nodes 32 "
                "--no-bias-correction --out /tmp/lsmd_cli_sim3") == 0);
  nlohmann::json j;
  std::ifstream in("/tmp/lsmd_cli_sim3/mc_reps.json");
  REQUIRE(in.good());
  in >> j;
  CHECK(j["replications"].size() == 1);
  CHECK(j["replications"][0]["ok"] == true);
}

TEST_CASE("diagnose writes the relevance surface and profile") {
  int rc = run_cli("diagnose --data " + example_data() + cols() +
                   " --factors 1 --alpha-bounds 0,5 --alpha-ref 1 "
                   "--beta-ref -3 --alpha-grid 0.6,1.4,3 "
                   "--beta-grid -3.6,-2.4,3 --out /tmp/lsmd_cli_diag");
  CHECK(rc == 0);
  std::string surface = slurp("/tmp/lsmd_cli_diag/relevance.csv");
  CHECK(surface.find("alpha,beta,rho_iv,rho_f,delta_rho") == 0);
  CHECK(!slurp("/tmp/lsmd_cli_diag/objective_profile.csv").empty());
}

TEST_CASE("elasticity emits a labeled matrix") {
  int rc = run_cli("elasticity --data " + example_data() + cols() +
                   " --factors 1 --alpha-bounds 0,5 --out /tmp/lsmd_cli_el");
  CHECK(rc == 0);
  std::string out = slurp("/tmp/lsmd_cli_out.txt");
  CHECK(out.find("elasticity: market") != std::string::npos);
}
