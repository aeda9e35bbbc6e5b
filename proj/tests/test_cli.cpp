#include "cbma/io.hpp"
#include "cbma/summaries.hpp"
#include "cbma/volume_io.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace cbma;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

// Runs the CLI with stdout captured and stderr sent to a file.
Run cli(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(CBMA_CLI_PATH) + " " + args + " 2>" + err.string();
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("cbma_cli_" + std::to_string(::getpid()));
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("simulate, split, fit, summarize, predict, evaluate, baseline") {
    TempDir dir;
    {
      std::ofstream(dir / "scenario.json") << R"({"dims": [20, 24, 1], "voxel_size": [8, 8, 1], "n_studies": 30, "type_shift": 2.0})";
    }
    Run r = cli("simulate --scenario " + dir / "scenario.json" + " --out " + dir / "sim", dir.path);
    REQUIRE_MESSAGE(r.status == 0, r.err);
    CHECK(fs::exists(dir / "sim/foci.csv"));
    CHECK(fs::exists(dir / "sim/truths.json"));
    CHECK(Json::parse(std::ifstream(dir / "sim/scenario.json"))["n_studies"] == 30);

    r = cli("split --foci " + dir / "sim/foci.csv" + " --train " + dir / "train.csv" + " --test " + dir / "test.csv" +
                " --test-labels " + dir / "test_labels.csv" + " --seed 2",
            dir.path);
    REQUIRE_MESSAGE(r.status == 0, r.err);
    const Dataset test = load_foci_csv(dir / "test.csv");
    for (const Study& s : test.studies) CHECK_FALSE(s.label.has_value());

    r = cli("fit --foci " + dir / "train.csv" + " --mask " + dir / "sim/mask.json" + " --out " + dir / "fit" +
                " --nx 3 --ny 4 --bandwidth 0.002 --n-iter 120 --burn-in 60 --thin 6 --seed 3",
            dir.path);
    REQUIRE_MESSAGE(r.status == 0, r.err);
    CHECK(fs::exists(dir / "fit/manifest.json"));
    const ChainOutput chain = load_chain(dir / "fit/chain");
    CHECK(chain.draws.size() == 10);

    r = cli("summarize --chain " + dir / "fit/chain" + " --out " + dir / "summary" + " --png-slices 0", dir.path);
    REQUIRE_MESSAGE(r.status == 0, r.err);
    for (const char* name : {"group_all", "group_type1", "group_type0", "difference_mean", "difference_standardized",
                             "dictionary", "study_intensity"}) {
      CHECK_MESSAGE(fs::exists(dir / (std::string("summary/") + name + ".json")), name);
    }
    CHECK(fs::exists(dir / "summary/diagnostics.json"));
    CHECK(Json::parse(r.out).contains("scalars"));

    r = cli("predict --chain " + dir / "fit/chain" + " --foci " + dir / "test.csv" + " --out " + dir / "pred.csv" +
                " --sweeps 10 --inner-burn-in 4 --max-draws 5",
            dir.path);
    REQUIRE_MESSAGE(r.status == 0, r.err);
    const auto preds = load_predictions_csv(dir / "pred.csv");
    CHECK(preds.size() == test.studies.size());
    for (const Prediction& p : preds) {
      CHECK(p.mean >= 0.0);
      CHECK(p.mean <= 1.0);
    }

    r = cli("evaluate --predictions " + dir / "pred.csv" + " --labels " + dir / "test_labels.csv" + " --roc-out " +
                dir / "roc.csv",
            dir.path);
    REQUIRE_MESSAGE(r.status == 0, r.err);
    const Json ev = Json::parse(r.out);
    CHECK(ev["auc"].get<double>() >= 0.0);
    CHECK(ev["auc"].get<double>() <= 1.0);
    CHECK(fs::exists(dir / "roc.csv"));

    r = cli("evaluate --truths " + dir / "sim/truths.json" + " --estimates " + dir / "sim/truths.json" + " --mask " +
                dir / "sim/mask.json",
            dir.path);
    REQUIRE_MESSAGE(r.status == 0, r.err);
    CHECK(Json::parse(r.out)["imse"].get<double>() == 0.0);

    r = cli("baseline-nbc --train " + dir / "train.csv" + " --test " + dir / "test_labels.csv" + " --mask " +
                dir / "sim/mask.json" + " --out " + dir / "nbc.csv" + " --flat-prior --prob-maps " + dir / "nbc_maps",
            dir.path);
    REQUIRE_MESSAGE(r.status == 0, r.err);
    CHECK(load_predictions_csv(dir / "nbc.csv").size() == test.studies.size());
    CHECK(Json::parse(r.out).contains("auc"));
    CHECK(fs::exists(dir / "nbc_maps.json"));
  }

  TEST_CASE("summarize on a one-draw chain matches direct evaluation") {
    TempDir dir;
    {
      std::ofstream(dir / "scenario.json") << R"({"dims": [12, 12, 1], "voxel_size": [8, 8, 1], "n_studies": 6})";
    }
    REQUIRE(cli("simulate --scenario " + dir / "scenario.json" + " --out " + dir / "sim", dir.path).status == 0);
    Run r = cli("fit --foci " + dir / "sim/foci.csv" + " --mask " + dir / "sim/mask" + " --out " + dir / "fit" +
                    " --nx 2 --ny 2 --n-iter 3 --burn-in 2 --thin 1",
                dir.path);
    REQUIRE_MESSAGE(r.status == 0, r.err);
    r = cli("summarize --chain " + dir / "fit/chain" + " --out " + dir / "summary", dir.path);
    REQUIRE_MESSAGE(r.status == 0, r.err);

    const ChainOutput chain = load_chain(dir / "fit/chain");
    REQUIRE(chain.draws.size() == 1);
    const VolumeGrid grid = load_mask(dir / "fit/chain/mask");
    const BasisSet basis = build_basis(grid, load_kernel_layout_csv(dir / "fit/chain/kernels.csv"), 0.002);
    const MatrixXd direct = (basis.voxel_design * chain.draws[0].theta).array().exp().matrix();
    const MatrixXd written = masked_values(grid, load_volumes(dir / "summary/study_intensity"));
    REQUIRE(written.cols() == direct.cols());
    CHECK(((written - direct).array().abs() / direct.array()).maxCoeff() < 1e-6);
  }

  TEST_CASE("predict on an empty foci file") {
    TempDir dir;
    {
      std::ofstream(dir / "scenario.json") << R"({"dims": [12, 12, 1], "voxel_size": [8, 8, 1], "n_studies": 6})";
      std::ofstream(dir / "empty.csv") << "study_id,x_mm,y_mm,z_mm\n";
    }
    REQUIRE(cli("simulate --scenario " + dir / "scenario.json" + " --out " + dir / "sim", dir.path).status == 0);
    REQUIRE(cli("fit --foci " + dir / "sim/foci.csv" + " --mask " + dir / "sim/mask" + " --out " + dir / "fit" +
                    " --nx 2 --ny 2 --n-iter 4 --burn-in 2 --thin 1",
                dir.path)
                .status == 0);
    const Run r = cli("predict --chain " + dir / "fit/chain" + " --foci " + dir / "empty.csv" + " --out " + dir / "p.csv",
                      dir.path);
    CHECK_MESSAGE(r.status == 0, r.err);
    CHECK(load_predictions_csv(dir / "p.csv").empty());
  }

  TEST_CASE("errors are reported as JSON with a nonzero exit") {
    TempDir dir;
    {
      std::ofstream(dir / "bad.csv") << "study_id,x_mm,y_mm,z_mm\ns1,1,oops,3\n";
      std::ofstream(dir / "scenario.json") << R"({"n_studyz": 3})";
    }
    Run r = cli("split --foci " + dir / "bad.csv" + " --train " + dir / "a.csv" + " --test " + dir / "b.csv", dir.path);
    CHECK(r.status != 0);
    const Json err = Json::parse(r.err);
    CHECK(err["code"] == "parse_error");
    CHECK(err["error"].is_string());

    r = cli("simulate --scenario " + dir / "scenario.json" + " --out " + dir / "x", dir.path);
    CHECK(r.status != 0);
    CHECK(Json::parse(r.err)["code"] == "invalid_config");

    r = cli("fit --foci " + dir / "missing.csv", dir.path);
    CHECK(r.status != 0);
    CHECK(Json::parse(r.err)["code"] == "usage");
  }
}
