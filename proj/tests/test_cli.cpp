#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "elicit/offline_mmu.hpp"
#include "elicit/service.hpp"
#include "elicit/simulate.hpp"

using namespace elicit;

namespace {

const std::string kBank = std::string(ELICIT_TEST_DATA) + "/e1.csv";

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("solve-offline on e1") {
  const auto r = run({"solve-offline", "--bank", kBank, "--criterion", "mmu", "--k", "1", "--gamma", "0"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("plan        1:2\n") != std::string::npos);
  CHECK(r.out.find("value       0.5\n") != std::string::npos);
  CHECK(r.out.find("normalized  1\n") != std::string::npos);

  for (const char* method : {"milp", "greedy"}) {
    const auto j = run({"solve-offline", "--bank", kBank, "--k", "1", "--gamma", "0", "--method", method, "--json"});
    REQUIRE(j.code == 0);
    const auto doc = Json::parse(j.out);
    CHECK(doc["plan"] == "1:2");
    CHECK(doc["value"].get<double>() == doctest::Approx(0.5));
  }
  const auto mmr = run({"solve-offline", "--bank", kBank, "--criterion", "mmr", "--k", "1", "--json"});
  REQUIRE(mmr.code == 0);
  CHECK(Json::parse(mmr.out)["value"].get<double>() == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("cli values equal library values exactly") {
  const auto j = run({"solve-offline", "--bank", kBank, "--k", "2", "--gamma", "0.05", "--json"});
  REQUIRE(j.code == 0);
  const auto bank = load_item_bank_file(kBank);
  const auto lib = ccg_mmu(bank, 2, UncertaintyModel(PreferencePolyhedron::simplex(2), 0.05), {});
  CHECK(Json::parse(j.out)["value"].get<double>() == lib.value);
}

TEST_CASE("evaluate on e1") {
  const auto r = run({"evaluate", "--bank", kBank, "--criterion", "mmr", "--plan", "1:3", "--gamma", "0"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("value           0.2\n") != std::string::npos);
  const auto j = run({"evaluate", "--bank", kBank, "--plan", "3:1", "--json"});
  REQUIRE(j.code == 0);
  CHECK(Json::parse(j.out)["plan"] == "1:3");
  CHECK(Json::parse(j.out)["value"].get<double>() == doctest::Approx(0.4));
}

TEST_CASE("validation errors exit 2") {
  CHECK(run({"solve-offline", "--bank", kBank, "--k", "0"}).code == 2);
  CHECK(run({"solve-offline", "--bank", kBank, "--k", "1", "--bogus"}).code == 2);
  CHECK(run({"solve-offline", "--bank", "/nonexistent.csv", "--k", "1"}).code == 2);
  CHECK(run({"solve-offline", "--bank", kBank, "--k", "4"}).code == 2);
  CHECK(run({"evaluate", "--bank", kBank, "--plan", "1-2"}).code == 2);
  CHECK(run({"evaluate", "--bank", kBank, "--plan", "1:9"}).code == 2);
  CHECK(run({"evaluate", "--bank", kBank, "--plan", "1:2", "--criterion", "best"}).code == 2);
  CHECK(run({"evaluate", "--bank", kBank, "--plan", "1:2", "--prior", "nope"}).code == 2);
  CHECK(run({}).code == 2);
  const auto help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("solve-offline") != std::string::npos);
}

TEST_CASE("simulate subcommands write the shared CSV") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto csv = (dir / "elicit-cli-offline.csv").string();
  const auto r = run({"simulate-offline", "--bank", kBank, "--ks", "0,1", "--gamma", "0", "--draws", "5", "--seed",
                      "3", "--out", csv});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("budget escalations: 0") != std::string::npos);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "method,criterion,K,sigma_true,sigma_assumed,agent_seed,guarantee,normalized,true_rank,true_regret,wall_ms");
  int rows = 0;
  for (std::string l; std::getline(in, l);) ++rows;
  CHECK(rows == 2 * (1 + 5));
  std::filesystem::remove(csv);

  const auto on = run({"simulate-online", "--items", "5", "--dim", "2", "--prior", "box", "--agents", "2",
                       "--k-max", "2", "--sigma", "0.2", "--sigma-assumed", "0.1", "--seed", "4", "--json"});
  REQUIRE(on.code == 0);
  const auto doc = Json::parse(on.out);
  CHECK(doc["failures"].empty());
  CHECK(doc["summary"].size() == 2 * 3);
  CHECK(doc.contains("outside_final_set"));
  CHECK(doc.contains("escalations"));
}
