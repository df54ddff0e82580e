#include "doctest.h"

#include "lyapexp/cli.hpp"
#include "lyapexp/errors.hpp"
#include "lyapexp/io.hpp"
#include "lyapexp/parallel.hpp"

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace lyapexp;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "lyapexp_unit" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_spec(const fs::path& dir, const std::string& name, const std::string& body) {
  io::write_file(dir / name, body);
  return dir / name;
}

const std::string kAlpha2 = R"({"family":"two_point","low":"1/2","high":"2","p_high":"1/5"})";

}  // namespace

TEST_CASE("grid and list parsing") {
  CHECK(io::parse_grid("2^-2..2^-4") == std::vector<double>{0.25, 0.125, 0.0625});
  CHECK(io::parse_grid("0.5") == std::vector<double>{0.5});
  CHECK(io::parse_list("1/4,2^-3,0.5") == std::vector<double>{0.25, 0.125, 0.5});
  CHECK(io::parse_count("1e7") == 10000000);
  CHECK(io::parse_count("250000") == 250000);
  CHECK_THROWS_AS(io::parse_grid("2^-4..2^-2"), InvalidArgument);
  CHECK_THROWS_AS(io::parse_count("1.5"), InvalidArgument);
  CHECK_THROWS_AS(io::parse_list("x"), InvalidArgument);
}

TEST_CASE("distribution JSON round trip") {
  const auto spec = io::parse_distribution(io::json::parse(kAlpha2));
  CHECK(spec.family() == Family::two_point);
  CHECK(*exact_moment(spec, 2) == 1);
  const auto again = io::parse_distribution(io::to_json(spec));
  CHECK(io::to_json(again) == io::to_json(spec));
  const auto u = io::parse_distribution(io::json::parse(R"({"family":"uniform_interval","a":0.1,"b":0.9})"));
  CHECK(u.family() == Family::uniform_interval);
  CHECK_THROWS_AS(io::parse_distribution(io::json::parse(R"({"family":"cauchy"})")), InvalidSpec);
}

TEST_CASE("formatting and checksums") {
  CHECK(io::format_double(0.1) == "0.10000000000000001");
  CHECK(io::format_double(3.0) == "3");
  CHECK(io::fnv1a64("") == "cbf29ce484222325");
  CHECK(io::fnv1a64("a") == "af63dc4c8601ec8c");
}

TEST_CASE("thread count falls back to LYAPEXP_THREADS") {
  setenv("LYAPEXP_THREADS", "3", 1);
  CHECK(default_threads() == 3);
  setenv("LYAPEXP_THREADS", "zero", 1);
  CHECK(default_threads() == 1);
  unsetenv("LYAPEXP_THREADS");
  CHECK(default_threads() == 1);
}

TEST_CASE("coeffs and alpha subcommands") {
  const auto dir = scratch("coeffs");
  const auto spec = write_spec(dir, "a2.json", kAlpha2);
  const auto r = run({"coeffs", "--moments", "3/4,3/4", "--order", "2", "--exact"});
  CHECK(r.code == cli::ok);
  CHECK(r.out.find(",3,3\n") != std::string::npos);
  CHECK(r.out.find("165/2") != std::string::npos);

  const auto degenerate = run({"coeffs", "--spec", spec.string(), "--order", "2"});
  CHECK(degenerate.code == cli::numerical);
  CHECK(degenerate.err.find("DegenerateMoment") != std::string::npos);

  const auto a = run({"alpha", "--spec", spec.string()});
  CHECK(a.code == cli::ok);
  CHECK(a.out.find("\"alpha\": 2.0") != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(run({}).code == cli::usage);
  CHECK(run({"frobnicate"}).code == cli::usage);
  CHECK(run({"alpha"}).code == cli::usage);
  CHECK(run({"coeffs", "--order", "two"}).code == cli::usage);
  CHECK(run({"--help"}).code == cli::ok);
  const auto dir = scratch("exit");
  const auto bad = write_spec(dir, "bad.json", R"({"family":"two_point","low":"-1","high":"2","p_high":"1/2"})");
  CHECK(run({"alpha", "--spec", bad.string()}).code == cli::validation);
  CHECK(run({"alpha", "--spec", (dir / "missing.json").string()}).code == cli::validation);
  CHECK(run({"lyap", "--spec", bad.string()}).code == cli::validation);
  const auto a2 = write_spec(dir, "a2.json", kAlpha2);
  CHECK(run({"lyap", "--spec", a2.string(), "--method", "magic", "--steps", "1000"}).code == cli::validation);
  CHECK(run({"fit", "--spec", a2.string(), "--K", "2", "--steps", "1000"}).code == cli::numerical);
  CHECK(run({"selftest"}).code == cli::ok);
}

TEST_CASE("manifest and replay at different thread counts") {
  const auto dir = scratch("replay");
  const auto spec = write_spec(dir, "a2.json", kAlpha2);
  const auto out = dir / "run";
  const auto r = run({"fit", "--spec", spec.string(), "--K", "1", "--eps-grid", "2^-2..2^-7", "--steps", "2e5",
                      "--threads", "1", "--out", out.string(), "--emit-plot", "plot.csv"});
  REQUIRE(r.code == cli::ok);
  CHECK(fs::exists(out / "fit.json"));
  CHECK(fs::exists(out / "residuals.csv"));
  CHECK(io::read_file(out / "plot.csv").rfind("eps,residual\n", 0) == 0);
  const auto manifest = io::read_json(out / "manifest.json");
  CHECK(manifest["subcommand"] == "fit");
  CHECK(manifest["seed"] == 7);
  CHECK(manifest["outputs"].size() == 3);
  for (const auto& a : manifest["argv"]) {
    CHECK(a != "--out");
    CHECK(a != "--threads");
  }

  const auto replayed = cli::replay(out / "manifest.json", dir / "again", 8);
  CHECK(replayed.identical);
  CHECK(replayed.exit_code == cli::ok);
  CHECK(run({"replay", "--manifest", (out / "manifest.json").string(), "--out", (dir / "third").string()}).code ==
        cli::ok);

  io::write_file(out / "fit.json", "tampered");
  auto tampered = io::read_json(out / "manifest.json");
  tampered["outputs"][0]["fnv1a64"] = io::fnv1a64("tampered");
  io::write_file(dir / "bad_manifest.json", tampered.dump());
  const auto mismatch = cli::replay(dir / "bad_manifest.json", dir / "fourth", 1);
  CHECK_FALSE(mismatch.identical);
  CHECK(mismatch.exit_code == cli::numerical);
}

TEST_CASE("chain, lyap, highdim and ising subcommands") {
  const auto dir = scratch("subcommands");
  const auto spec = write_spec(dir, "a2.json", kAlpha2);
  const auto chain = run({"chain", "--spec", spec.string(), "--eps", "0.25,0.125", "--gammas", "1,2", "--steps", "1e4"});
  CHECK(chain.code == cli::ok);
  CHECK(chain.out.rfind("eps,gamma,moment,trunc_moment,stderr,max_x,trunc_stderr\n", 0) == 0);
  CHECK(std::count(chain.out.begin(), chain.out.end(), '\n') == 5);

  const auto lyap = run({"lyap", "--spec", spec.string(), "--eps", "1", "--steps", "1e4", "--method", "both"});
  CHECK(lyap.code == cli::ok);
  CHECK(lyap.out.find("direct_product") != std::string::npos);
  CHECK(lyap.out.find("invariant_formula") != std::string::npos);

  const auto blocks = write_spec(dir, "blocks.json",
                                 R"({"d":2,"atoms":[{"weight":"1/2","L":["1","0"],"C":["1/3","1/4"],"N":[["1/2","0"],["0","1/3"]]},)"
                                 R"({"weight":"1/2","L":["1","1/2"],"C":["1","1/2"],"N":[["1","1/4"],["1/5","1/2"]]}]})");
  const auto hd = run({"highdim", "--blocks", blocks.string(), "--K", "1", "--eps", "0.25", "--steps", "1e4", "--json"});
  REQUIRE(hd.code == cli::ok);
  const auto j = io::json::parse(hd.out);
  CHECK(j["g_matrices"][0]["entries"][0][0] == "3/4");
  CHECK(j["g_matrices"][0]["entries"][1][0] == "1/10");

  const auto field = write_spec(dir, "field.json", R"({"family":"finite","atoms":[{"value":0.5,"weight":"1/2"},{"value":-0.5,"weight":"1/2"}]})");
  const auto is = run({"ising", "--range", "2", "--couplings", "2.0,3.5", "--field-law", field.string(), "--T", "0.5",
                       "--steps", "1e4", "--seed", "7"});
  REQUIRE(is.code == cli::ok);
  const auto ij = io::json::parse(is.out);
  CHECK(ij.contains("f"));
  CHECK(ij.contains("stderr"));
  CHECK(ij["eps_l"].size() == 2);
  CHECK(ij.contains("z_law"));
  CHECK(run({"ising", "--range", "3", "--couplings", "1,1", "--field-law", field.string()}).code == cli::validation);
}
