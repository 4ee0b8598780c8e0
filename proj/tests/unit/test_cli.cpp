#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "fshe_cli_tests";

struct Result {
  int code = -1;
  std::string err;
};

Result run(const std::string& args) {
  fs::create_directories(kWork);
  const fs::path err = kWork / "stderr.txt";
  const std::string cmd = std::string(FSHE_CLI_PATH) + " " + args + " > " + (kWork / "stdout.txt").string() +
                          " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  std::ifstream in(err);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1,
          {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()}};
}

fs::path write_config(const std::string& name, const std::string& text) {
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const std::string kSim =
    "alpha = 1.5\nsigma_form = pure_power\ngamma = 1\nkappa = 1\nL = 4\nn = 128\nt_end = 0.05\npaths = 100\n";

}  // namespace

TEST_CASE("verify-kernel writes the kernel CSV and a manifest") {
  const fs::path out = kWork / "vk";
  fs::remove_all(out);
  const auto r = run("verify-kernel --alpha 1.5 --resolution 12 --out " + out.string());
  CHECK(r.code == 0);
  CHECK(fs::exists(out / "kernel.csv"));
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(slurp(out / "kernel.csv").rfind("t,x,p,bound_lo,bound_hi,ratio\n", 0) == 0);
}

TEST_CASE("renewal") {
  const fs::path out = kWork / "ren";
  const auto r = run("renewal --A 1 --B 1 --gamma 0.5 --alpha 2 --form power --trajectory --out " + out.string());
  CHECK(r.code == 0);
  const std::string json = slurp(out / "renewal.json");
  CHECK(json.find("\"t_star_analytic\": 5.0625") != std::string::npos);
  CHECK(fs::exists(out / "renewal_trajectory.csv"));
}

TEST_CASE("reruns are byte-identical") {
  const auto cfg = write_config("sim.cfg", kSim);
  for (const char* cmd : {"simulate", "moments"}) {
    CAPTURE(cmd);
    const fs::path a = kWork / (std::string(cmd) + "_a");
    const fs::path b = kWork / (std::string(cmd) + "_b");
    REQUIRE(run(std::string(cmd) + " --config " + cfg.string() + " --seed 5 --out " + a.string()).code == 0);
    REQUIRE(run(std::string(cmd) + " --config " + cfg.string() + " --seed 5 --threads 1 --out " + b.string()).code == 0);
    int csvs = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      if (e.path().extension() != ".csv") continue;
      ++csvs;
      CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    }
    CHECK(csvs >= 2);
  }
}

TEST_CASE("configuration errors exit 1 and list every violation") {
  const auto cfg = write_config("bad.cfg", "kernel = white\ndim = 2\nbogus = 3\n");
  const auto r = run("simulate --config " + cfg.string() + " --out " + (kWork / "bad").string());
  CHECK(r.code == 1);
  CHECK(r.err.find("white noise requires d=1, 1<alpha<2") != std::string::npos);
  CHECK(r.err.find("unknown key 'bogus'") != std::string::npos);
  CHECK_FALSE(fs::exists(kWork / "bad" / "manifest.json"));

  const auto riesz = run("verify-correlation --kernel riesz --beta 1.5 --dim 1 --out " + (kWork / "rz").string());
  CHECK(riesz.code == 1);
  CHECK(riesz.err.find("beta < d required") != std::string::npos);
}

TEST_CASE("unmet hypothesis exits 2") {
  const auto cfg = write_config("hyp.cfg", kSim + "kernel = riesz\nbeta = 0.5\nexperiment = horizon_sweep\n"
                                                  "horizons = 0.02,0.05\ndiagnostic_times = 0.02,0.05\n"
                                                  "pairs = 0|3\n");
  const auto r = run("moments --config " + cfg.string() + " --out " + (kWork / "hyp").string());
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(kWork / "hyp" / "manifest.json"));
}

TEST_CASE("unwritable output exits 1") {
  const fs::path blocker = write_config("blocker", "not a directory\n");
  const auto r = run("verify-correlation --kernel poisson --out " + (blocker / "sub").string());
  CHECK(r.code == 1);
  CHECK(r.err.find("removed") != std::string::npos);
}
