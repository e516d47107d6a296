#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cleartrade/data.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using testing::ScratchDir;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Run run(const ScratchDir& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.path().string() + "' && '" CLEARTRADE_CLI "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

int lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("--help on every subcommand exits 0 and lists every flag") {
  ScratchDir dir("cli-help");
  const std::vector<std::string> common = {"--config", "--out", "--seed", "--set", "--help"};
  const std::vector<std::pair<std::string, std::vector<std::string>>> cases = {
      {"train", {"--csv"}},
      {"eval", {"--checkpoint", "--csv"}},
      {"explain", {"--checkpoint", "--csv", "--date"}},
      {"synth", {}},
  };
  for (const auto& [sub, extra] : cases) {
    const Run r = run(dir, sub + " --help");
    CHECK_MESSAGE(r.code == 0, sub);
    for (const auto& flag : common) CHECK_MESSAGE(r.out.find(flag) != std::string::npos, sub << " " << flag);
    for (const auto& flag : extra) CHECK_MESSAGE(r.out.find(flag) != std::string::npos, sub << " " << flag);
  }
  const Run top = run(dir, "--help");
  CHECK(top.code == 0);
  for (const char* sub : {"train", "eval", "explain", "synth"}) CHECK(top.out.find(sub) != std::string::npos);
}

TEST_CASE("exit codes and single-line diagnostics") {
  ScratchDir dir("cli-errors");

  Run r = run(dir, "train --csv nowhere.csv");
  CHECK(r.code == 2);
  CHECK(lines(r.err) == 1);
  CHECK(r.err.find("nowhere.csv") != std::string::npos);

  std::ofstream(dir / "bad.cfg") << "epochs = 3\nlearning_rat = 0.1\n";
  r = run(dir, "train --config bad.cfg");
  CHECK(r.code == 2);
  CHECK(r.err.find("learning_rat") != std::string::npos);

  r = run(dir, "frobnicate");
  CHECK(r.code == 2);

  r = run(dir, "synth --out data --seed 7 --set synth.rows=400");
  REQUIRE(r.code == 0);
  r = run(dir, "train --csv data/synthetic.csv --out run --set epochs=1");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "run" / "model.ctck"));

  r = run(dir, "explain --csv data/synthetic.csv --out run --date 1999-01-01");
  CHECK(r.code == 3);
  CHECK(lines(r.err) == 1);
  CHECK(r.err.find("nearest available date") != std::string::npos);

  const auto rows = cleartrade::parse_ohlcv_csv(dir / "data" / "synthetic.csv");
  r = run(dir, "explain --csv data/synthetic.csv --out run --date " + cleartrade::format_date(rows[100].date));
  CHECK(r.code == 0);
  CHECK(r.out.find("predicted state") != std::string::npos);

  std::string bytes = slurp(dir / "run" / "model.ctck");
  bytes[bytes.size() / 2] ^= 0x01;
  std::ofstream(dir / "run" / "broken.ctck", std::ios::binary) << bytes;
  r = run(dir, "eval --csv data/synthetic.csv --out run --checkpoint run/broken.ctck");
  CHECK(r.code == 3);
  CHECK(r.err.find("checksum") != std::string::npos);

  r = run(dir, "synth --out data --set synth.signal_start=40");
  CHECK(r.code == 2);
}

TEST_CASE("synth twice with the same seed writes identical files") {
  ScratchDir dir("cli-synth");
  REQUIRE(run(dir, "synth --out a --seed 7").code == 0);
  REQUIRE(run(dir, "synth --out b --seed 7").code == 0);
  CHECK(slurp(dir / "a" / "synthetic.csv") == slurp(dir / "b" / "synthetic.csv"));
  REQUIRE(run(dir, "synth --out c --seed 8").code == 0);
  CHECK(slurp(dir / "a" / "synthetic.csv") != slurp(dir / "c" / "synthetic.csv"));
}
