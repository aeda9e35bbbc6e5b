#include "cbma/io.hpp"
#include "cbma/volume_io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

using namespace cbma;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cbma_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

ChainOutput small_chain() {
  const VolumeGrid grid = box_grid({6, 6, 1}, Vec3(4, 4, 1), Vec3::Zero());
  PointsXd centers(1, 3);
  centers << 10, 10, 0;
  const BasisSet basis = build_basis(grid, centers, 0.01);
  std::vector<Study> studies;
  for (int i = 0; i < 3; ++i) {
    PointsXd f(2, 3);
    f << 4, 4, 0, 8, 12, 0;
    studies.push_back(make_study("s" + std::to_string(i), f, basis, i == 2 ? std::optional<int>() : std::optional<int>(i)));
  }
  SamplerConfig c;
  c.n_iter = 30;
  c.burn_in = 10;
  c.thin = 5;
  c.factor.k_init = 2;
  return run_chain(FitData(grid, basis, studies), c);
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("foci CSV examples") {
    TempDir dir;
    write(dir / "a.csv",
          "# format_version: 1\n"
          "study_id,x_mm,y_mm,z_mm,label,age\n"
          "s1,1.5,2,3,1,30\n"
          "\n"
          "s2,-4,5,6,,41\n"
          "# comment\n"
          "s1,7,8,9,1,30\n");
    const Dataset d = load_foci_csv(dir / "a.csv");
    REQUIRE(d.studies.size() == 2);
    CHECK(d.studies[0].id == "s1");
    CHECK(d.studies[0].foci.rows() == 2);
    CHECK(d.studies[0].foci(1, 2) == 9.0);
    CHECK(d.studies[0].label == 1);
    CHECK_FALSE(d.studies[1].label.has_value());
    CHECK(d.covariate_names == std::vector<std::string>{"age"});
    CHECK((*d.studies[1].covariates)(0) == 41.0);
    CHECK(d.weights.empty());
  }

  TEST_CASE("foci CSV errors carry the line number") {
    TempDir dir;
    write(dir / "bad.csv", "study_id,x_mm,y_mm,z_mm\ns1,1,2,3\ns1,1,abc,3\n");
    try {
      load_foci_csv(dir / "bad.csv");
      FAIL("expected parse_error");
    } catch (const Error& e) {
      CHECK(e.code() == "parse_error");
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    write(dir / "mixed.csv", "study_id,x_mm,y_mm,z_mm,label\ns1,1,2,3,1\ns1,1,2,3,\n");
    CHECK(error_code([&] { load_foci_csv(dir / "mixed.csv"); }) == "mixed_labels");
    write(dir / "conflict.csv", "study_id,x_mm,y_mm,z_mm,label\ns1,1,2,3,1\ns1,1,2,3,0\n");
    CHECK(error_code([&] { load_foci_csv(dir / "conflict.csv"); }) == "mixed_labels");
    write(dir / "header.csv", "id,x,y,z\n");
    CHECK(error_code([&] { load_foci_csv(dir / "header.csv"); }) == "parse_error");
    write(dir / "fields.csv", "study_id,x_mm,y_mm,z_mm\ns1,1,2\n");
    CHECK(error_code([&] { load_foci_csv(dir / "fields.csv"); }) == "parse_error");
    write(dir / "label.csv", "study_id,x_mm,y_mm,z_mm,label\ns1,1,2,3,2\n");
    CHECK(error_code([&] { load_foci_csv(dir / "label.csv"); }) == "parse_error");
    write(dir / "future.csv", "# format_version: 99\nstudy_id,x_mm,y_mm,z_mm\n");
    CHECK(error_code([&] { load_foci_csv(dir / "future.csv"); }) == "unsupported_format");
    CHECK(error_code([&] { load_foci_csv(dir / "missing.csv"); }) == "io_error");
  }

  TEST_CASE("foci CSV round trip at corpus scale") {
    // 1199 studies and 10813 foci, the size of a real meta-analysis corpus.
    Rng rng(1);
    Dataset d;
    d.covariate_names = {"n_subjects"};
    long total = 0;
    for (int i = 0; i < 1199; ++i) {
      Study s;
      s.id = "study_" + std::to_string(i);
      const int n = i < 1198 ? 1 + (i * 7) % 17 : static_cast<int>(10813 - total);
      s.foci.resize(n, 3);
      for (int j = 0; j < n; ++j) s.foci.row(j) << 90 * rng.normal(), 1 / 3.0 + rng.normal(), -std::exp(rng.normal());
      total += n;
      if (i % 5) s.label = i % 2;
      s.covariates = VectorXd::Constant(1, std::round(100 * rng.uniform()));
      d.studies.push_back(s);
      d.weights.push_back(0.1 + rng.uniform());
    }
    REQUIRE(total == 10813);
    TempDir dir;
    save_foci_csv(dir / "big.csv", d);
    const Dataset back = load_foci_csv(dir / "big.csv");
    REQUIRE(back.studies.size() == 1199);
    for (std::size_t i = 0; i < 1199; ++i) {
      CHECK(back.studies[i].id == d.studies[i].id);
      CHECK(back.studies[i].foci == d.studies[i].foci);
      CHECK(back.studies[i].label == d.studies[i].label);
      CHECK(*back.studies[i].covariates == *d.studies[i].covariates);
      CHECK(back.weights[i] == d.weights[i]);
    }
  }

  TEST_CASE("train/test split") {
    Dataset d;
    for (int i = 0; i < 100; ++i) {
      Study s;
      s.id = "s" + std::to_string(i);
      s.foci = PointsXd::Zero(1, 3);
      if (i < 90) s.label = i < 60 ? 1 : 0;
      d.studies.push_back(s);
    }
    const auto [train, test] = split_train_test(d, 0.7, 3);
    CHECK(train.studies.size() + test.studies.size() == 100);
    auto count = [](const Dataset& x, std::optional<int> y) {
      return std::count_if(x.studies.begin(), x.studies.end(), [&](const Study& s) { return s.label == y; });
    };
    CHECK(count(train, 1) == 42);
    CHECK(count(train, 0) == 21);
    CHECK(count(train, std::nullopt) == 7);
    // Order is preserved inside each part, and the split is deterministic.
    for (std::size_t i = 1; i < train.studies.size(); ++i) {
      CHECK(std::stoi(train.studies[i - 1].id.substr(1)) < std::stoi(train.studies[i].id.substr(1)));
    }
    const auto again = split_train_test(d, 0.7, 3);
    for (std::size_t i = 0; i < train.studies.size(); ++i) CHECK(again.first.studies[i].id == train.studies[i].id);
    auto ids = [](const Dataset& x) {
      std::vector<std::string> out;
      for (const Study& s : x.studies) out.push_back(s.id);
      return out;
    };
    CHECK(ids(split_train_test(d, 0.7, 4).first) != ids(train));
    CHECK(split_train_test(d, 0.3, 3, false).first.studies.size() == 30);
    CHECK(error_code([&] { split_train_test(d, 1.5, 3); }) == "invalid_fraction");
  }

  TEST_CASE("snapping records warnings for off-mask foci") {
    const VolumeGrid grid = build_grid({3, 1, 1}, Vec3(2, 2, 2), Vec3::Zero(), {1, 1, 0});
    Dataset d;
    Study s;
    s.id = "a";
    s.foci.resize(2, 3);
    s.foci << 0.4, 0, 0, 3.9, 0, 0;
    d.studies.push_back(s);
    snap_dataset(d, grid);
    CHECK(d.studies[0].foci.row(0) == Vec3(0, 0, 0).transpose());
    CHECK(d.studies[0].foci.row(1) == Vec3(2, 0, 0).transpose());
    REQUIRE(d.warnings.size() == 1);
    CHECK(d.warnings[0].find("study a") != std::string::npos);
    d.studies[0].foci.row(0) << 50, 0, 0;
    CHECK(error_code([&] { snap_dataset(d, grid); }) == "focus_out_of_bounds");
  }

  TEST_CASE("volumes round trip") {
    TempDir dir;
    const VolumeGrid grid = ellipse_grid({7, 6, 2}, Vec3(2, 3, 4), Vec3(-6, -7.5, 1));
    Rng rng(2);
    const MatrixXd values = MatrixXd::NullaryExpr(grid.masked_count(), 2, [&] { return rng.normal(); });

    VolumeWriteOptions opt;
    opt.dtype = "float64";
    opt.volume_names = {"a", "b"};
    save_volumes(dir / "v64", grid, values, opt);
    const LoadedVolumes l64 = load_volumes(dir / "v64.json");
    CHECK(l64.dims == grid.dims());
    CHECK(l64.volume_names == opt.volume_names);
    CHECK(masked_values(grid, l64) == values);
    // Unmasked voxels are written as zero.
    for (Index v = 0; v < grid.total_voxels(); ++v) {
      if (!grid.mask()[static_cast<std::size_t>(v)]) CHECK(l64.values(v, 0) == 0.0);
    }

    save_volumes(dir / "v32", grid, values);
    const LoadedVolumes l32 = load_volumes(dir / "v32.raw");
    CHECK(l32.dtype == "float32");
    CHECK((masked_values(grid, l32) - values.cast<float>().cast<double>()).cwiseAbs().maxCoeff() == 0.0);

    CHECK(error_code([&] { save_volumes(dir / "bad", grid, values.topRows(3)); }) == "dimension_mismatch");
    const VolumeGrid other = box_grid({7, 6, 2}, Vec3(2, 3, 4), Vec3::Zero());
    CHECK(error_code([&] { masked_values(other, l64); }) == "grid_mismatch");

    // Truncated raw file.
    fs::resize_file(dir / "v64.raw", 10);
    CHECK(error_code([&] { load_volumes(dir / "v64"); }) == "corrupt_file");
  }

  TEST_CASE("mask round trip and PNG slices") {
    TempDir dir;
    const VolumeGrid grid = ellipse_grid({9, 8, 3}, Vec3(2, 2, 2), Vec3(1, 2, 3));
    save_mask(dir / "mask", grid);
    const VolumeGrid back = load_mask(dir / "mask.json");
    CHECK(back.mask() == grid.mask());
    CHECK(back.dims() == grid.dims());
    CHECK(back.origin() == grid.origin());
    CHECK(back.voxel_size() == grid.voxel_size());

    VolumeWriteOptions opt;
    opt.volume_names = {"map"};
    opt.png = PngSlices{{0, 2}, 0.0, 1.0};
    save_volumes(dir / "maps", grid, VectorXd::LinSpaced(grid.masked_count(), 0, 1), opt);
    CHECK(fs::exists(dir / "maps_map_z0.png"));
    CHECK(fs::exists(dir / "maps_map_z2.png"));
    std::ifstream png(dir / "maps_map_z2.png", std::ios::binary);
    char sig[8];
    png.read(sig, 8);
    CHECK(std::string(sig + 1, 3) == "PNG");
    CHECK(error_code([&] { write_png_slice(dir / "x.png", grid, VectorXd::Zero(grid.masked_count()), 5, 0, 1); }) ==
          "invalid_slice");
  }

  TEST_CASE("predictions and kernel layouts") {
    TempDir dir;
    std::vector<Prediction> p(2);
    p[0] = {"a", 0.123456789012345, 0.01, 0.9, 0, 10};
    p[1] = {"b", 1.0 / 3.0, 0.2, 0.5, 3, 7};
    save_predictions_csv(dir / "pred.csv", p);
    const auto back = load_predictions_csv(dir / "pred.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[1].study_id == "b");
    CHECK(back[1].mean == p[1].mean);
    CHECK(back[0].lo95 == p[0].lo95);
    CHECK(back[1].n_discarded == 3);

    PointsXd centers(3, 3);
    centers << 1.25, -2, 3, 0.1, 0.2, 0.3, -70, 80, 1e-3;
    save_kernel_layout_csv(dir / "k.csv", centers);
    CHECK(load_kernel_layout_csv(dir / "k.csv") == centers);
  }

  TEST_CASE("chain round trip") {
    const ChainOutput chain = small_chain();
    TempDir dir;
    save_chain(dir / "chain", chain, Json{{"note", "x"}});
    Json extra;
    const ChainOutput back = load_chain(dir / "chain", &extra);
    CHECK(extra["note"] == "x");
    REQUIRE(back.draws.size() == chain.draws.size());
    for (std::size_t s = 0; s < chain.draws.size(); ++s) {
      const Draw &a = chain.draws[s], &b = back.draws[s];
      CHECK(a.iteration == b.iteration);
      CHECK(a.theta == b.theta);
      CHECK(a.lambda == b.lambda);
      CHECK(a.sigma2 == b.sigma2);
      CHECK(a.eta == b.eta);
      CHECK(a.alpha == b.alpha);
      CHECK(a.gamma == b.gamma);
      CHECK(a.k == b.k);
    }
    CHECK(back.accept_rate == chain.accept_rate);
    CHECK(back.k_trace == chain.k_trace);
    CHECK(back.step_size_trace == chain.step_size_trace);
    CHECK(back.kernel_hash == chain.kernel_hash);
    CHECK(back.study_ids == chain.study_ids);
    CHECK(back.labels == chain.labels);
    CHECK(back.final_step_size == chain.final_step_size);
    CHECK(to_json(back.config) == to_json(chain.config));
  }

  TEST_CASE("checkpoints reject other data and corrupt files") {
    const VolumeGrid grid = box_grid({6, 6, 1}, Vec3(4, 4, 1), Vec3::Zero());
    PointsXd centers(1, 3);
    centers << 10, 10, 0;
    const BasisSet basis = build_basis(grid, centers, 0.01);
    PointsXd f(1, 3);
    f << 4, 4, 0;
    std::vector<Study> studies{make_study("a", f, basis, 1), make_study("b", f, basis, 0)};
    SamplerConfig c;
    c.n_iter = 20;
    c.burn_in = 10;
    c.thin = 2;
    ChainRunner runner(FitData(grid, basis, studies), c);
    runner.run_until(7);
    TempDir dir;
    runner.save_checkpoint(dir / "ck.bin");

    std::vector<Study> other = studies;
    other[1] = make_study("b", PointsXd::Zero(0, 3), basis, 0);
    CHECK(error_code([&] { ChainRunner::from_checkpoint(FitData(grid, basis, other), dir / "ck.bin"); }) ==
          "checkpoint_mismatch");
    write(dir / "junk.bin", "not a checkpoint at all");
    CHECK(error_code([&] { ChainRunner::from_checkpoint(FitData(grid, basis, studies), dir / "junk.bin"); }) ==
          "corrupt_file");
    const auto size = fs::file_size(dir / "ck.bin");
    fs::resize_file(dir / "ck.bin", size - 5);
    CHECK_THROWS_AS(ChainRunner::from_checkpoint(FitData(grid, basis, studies), dir / "ck.bin"), Error);
  }

  TEST_CASE("sampler config files reject unknown keys") {
    Json j = to_json(SamplerConfig{});
    CHECK_NOTHROW(sampler_config_from_json(j));
    j["burnin"] = 5;
    CHECK(error_code([&] { sampler_config_from_json(j); }) == "invalid_config");
    CHECK(error_code([&] { sampler_config_from_json(Json::array()); }) == "invalid_config");
  }
}
