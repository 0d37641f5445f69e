#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string output;
};

Run gmgraph(const std::string& args) {
  const std::string cmd = std::string(GMGRAPH_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gmgraph_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kMicro = R"([model]
widths = [8, 8, 16, 16]
num_classes = 3
au_vocab = 4
[train]
epochs = 150
)";

}  // namespace

TEST_CASE("count-params reports the SS-GN total") {
  const Run r = gmgraph("count-params --verbose");
  CHECK(r.code == 0);
  std::smatch m;
  REQUIRE(std::regex_search(r.output, m, std::regex("total parameters: (\\d+)")));
  const long total = std::stol(m[1]);
  CHECK(total >= 155000);
  CHECK(total <= 172000);
  CHECK(r.output.find("trunk.layer1.gcn.theta") != std::string::npos);
}

TEST_CASE("config errors surface before any work") {
  const Run r = gmgraph("count-params --mode gtsgn --fusion-layer 4 --loss aau");
  CHECK(r.code != 0);
  CHECK(r.output.find("degenerates") != std::string::npos);

  const fs::path dir = scratch("badcfg");
  std::ofstream(dir / "bad.toml") << "widths = [8, 8]\nnot a setting\n";
  const Run bad = gmgraph("count-params --config " + (dir / "bad.toml").string());
  CHECK(bad.code != 0);
  CHECK(bad.output.find("bad.toml:2") != std::string::npos);
}

TEST_CASE("malformed data files report the line") {
  const fs::path dir = scratch("baddata");
  REQUIRE(gmgraph("synth-data --out " + (dir / "d.jsonl").string()).code == 0);
  std::ofstream(dir / "d.jsonl", std::ios::app) << "{\"subject_id\": 3}\n";
  const Run r = gmgraph("train --data " + (dir / "d.jsonl").string() + " --out " + (dir / "run").string());
  CHECK(r.code != 0);
  CHECK(r.output.find("d.jsonl:41") != std::string::npos);
}

TEST_CASE("gradcheck on the micro config exits 0") {
  const Run r = gmgraph("gradcheck --mode gtsgn --fusion-layer 2");
  CHECK(r.code == 0);
  CHECK(r.output.find("PASSED") != std::string::npos);
}

TEST_CASE("synth, train, predict and holdout evaluation") {
  const fs::path dir = scratch("pipeline");
  std::ofstream(dir / "micro.toml") << kMicro;
  const std::string cfg = " --config " + (dir / "micro.toml").string();
  const std::string data = (dir / "data.jsonl").string();
  REQUIRE(gmgraph("synth-data --noise 0.3 --seed 4 --out " + data).code == 0);

  const Run t1 = gmgraph("train" + cfg + " --seed 3 --data " + data + " --out " + (dir / "a").string());
  REQUIRE(t1.code == 0);
  CHECK(fs::exists(dir / "a" / "checkpoint.json"));
  CHECK(fs::exists(dir / "a" / "loss_trace.csv"));
  CHECK(fs::exists(dir / "a" / "resolved-config.toml"));

  // Same seed, same artifacts.
  REQUIRE(gmgraph("train" + cfg + " --seed 3 --data " + data + " --out " + (dir / "b").string()).code == 0);
  CHECK(slurp(dir / "a" / "checkpoint.json") == slurp(dir / "b" / "checkpoint.json"));
  CHECK(slurp(dir / "a" / "loss_trace.csv") == slurp(dir / "b" / "loss_trace.csv"));

  // The resolved config reproduces the run.
  REQUIRE(gmgraph("train --config " + (dir / "a" / "resolved-config.toml").string() + " --data " + data + " --out " +
                  (dir / "c").string())
              .code == 0);
  CHECK(slurp(dir / "a" / "checkpoint.json") == slurp(dir / "c" / "checkpoint.json"));

  const std::string ckpt = (dir / "a" / "checkpoint.json").string();
  REQUIRE(gmgraph("predict --checkpoint " + ckpt + " --data " + data + " --out " + (dir / "p1.csv").string()).code == 0);
  REQUIRE(gmgraph("predict --checkpoint " + ckpt + " --data " + data + " --out " + (dir / "p2.csv").string()).code == 0);
  CHECK(slurp(dir / "p1.csv") == slurp(dir / "p2.csv"));
  CHECK(slurp(dir / "p1.csv").starts_with("id,subject_id,true,predicted,p0,p1,p2\n"));

  const Run h = gmgraph("evaluate --holdout" + cfg + " --data " + data + " --out " + (dir / "h").string());
  REQUIRE(h.code == 0);
  std::smatch m;
  REQUIRE(std::regex_search(h.output, m, std::regex("holdout: n=\\d+ accuracy=([0-9.]+)")));
  CHECK(std::stod(m[1]) >= 0.9);
  for (const char* f : {"metrics.json", "predictions.csv", "aau_weights.csv", "lam_layer1.csv", "hidden_layer4.csv",
                        "loss_trace.csv", "resolved-config.toml"})
    CHECK_MESSAGE(fs::exists(dir / "h" / f), f);
}

TEST_CASE("inspect-lam writes one matrix per layer") {
  const fs::path dir = scratch("lam");
  std::ofstream(dir / "micro.toml") << "widths = [8, 8, 16, 16]\nnum_classes = 3\nau_vocab = 4\nepochs = 5\n";
  const std::string data = (dir / "data.jsonl").string();
  REQUIRE(gmgraph("synth-data --out " + data).code == 0);
  REQUIRE(gmgraph("train --config " + (dir / "micro.toml").string() + " --data " + data + " --out " +
                  (dir / "run").string())
              .code == 0);
  const Run r = gmgraph("inspect-lam --top-k 10 --checkpoint " + (dir / "run" / "checkpoint.json").string() +
                        " --out " + (dir / "lam").string());
  CHECK(r.code == 0);
  for (int l = 1; l <= 4; ++l) CHECK(fs::exists(dir / "lam" / ("lam_layer" + std::to_string(l) + ".csv")));
}
