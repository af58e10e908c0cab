#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "handover_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(HANDOVER_CLI_PATH) + " " + args + " > " +
                          (kWork / "stdout.txt").string() + " 2> " + (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::string path(const char* name) { return (kWork / name).string(); }

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    std::ofstream(kWork / "small.json") << R"({"train.hidden_dim": 16, "stomp.iterations": 20})";
  }
  ~Workspace() { fs::remove_all(kWork); }
};

}  // namespace

TEST_CASE("exit codes") {
  Workspace ws;
  CHECK(run("--help") == 0);
  CHECK(run("frobnicate") == 1);
  CHECK(run("") == 1);
  CHECK(run("gen-data --count notanumber") == 1);
  CHECK(run("train") == 1);  // --data is required
  CHECK(run("train --data " + path("missing.jsonl")) == 2);
  CHECK(slurp(kWork / "stderr.txt").find("IoFailure") != std::string::npos);
  CHECK(run("gen-data --count 0 --out " + path("none.jsonl")) == 2);
  CHECK(run("gen-data --grid 5by10 --out " + path("none.jsonl")) == 2);
  CHECK(run("study --mode preemptive --cells 1 --trials 1") == 2);  // no model
}

TEST_CASE("outputs are byte-identical on repeat") {
  Workspace ws;
  const std::string common = " --seed 4 --config " + path("small.json");
  REQUIRE(run("gen-data --count 12" + common + " --out " + path("a.jsonl")) == 0);
  REQUIRE(run("gen-data --count 12" + common + " --out " + path("b.jsonl")) == 0);
  CHECK(slurp(kWork / "a.jsonl") == slurp(kWork / "b.jsonl"));
  CHECK(slurp(kWork / "stdout.txt").rfind("# gen-data seed=4", 0) == 0);

  REQUIRE(run("train --epochs 2 --data " + path("a.jsonl") + common + " --out " + path("m1.bin")) == 0);
  REQUIRE(run("train --epochs 2 --data " + path("a.jsonl") + common + " --out " + path("m2.bin")) == 0);
  CHECK(slurp(kWork / "m1.bin") == slurp(kWork / "m2.bin"));
  CHECK(slurp(kWork / "stdout.txt").find("held-out decision error") != std::string::npos);

  REQUIRE(run("eval --data " + path("a.jsonl") + " --model " + path("m1.bin") + common + " --out " + path("e.json")) == 0);
  CHECK(slurp(kWork / "e.json").find("mean_decision_euclid") != std::string::npos);

  const std::string study = "study --cells 2 --trials 2 --model " + path("m1.bin") + common;
  REQUIRE(run(study + " --out " + path("s1.csv")) == 0);
  REQUIRE(run(study + " --out " + path("s2.csv")) == 0);
  CHECK(slurp(kWork / "s1.csv") == slurp(kWork / "s2.csv"));
  CHECK(slurp(kWork / "s1.csv").rfind("section,cell_x", 0) == 0);
  REQUIRE(run(study + " --out " + path("s1.json")) == 0);
  REQUIRE(run(study + " --out " + path("s2.json")) == 0);
  CHECK(slurp(kWork / "s1.json") == slurp(kWork / "s2.json"));

  REQUIRE(run("study --oracle --cells 1:1,2:3 --trials 2" + common + " --out " + path("o.csv")) == 0);
  CHECK(slurp(kWork / "o.csv").find("\ncell,1,1,") != std::string::npos);

  // a model trained on one grid refuses another
  CHECK(run(study + " --grid 4x10 --out " + path("bad.csv")) == 2);
}
