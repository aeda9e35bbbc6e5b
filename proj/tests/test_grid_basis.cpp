#include "cbma/basis.hpp"
#include "cbma/random.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace cbma;

namespace {

template <typename Fn>
std::string error_code(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

// Kernel value written out term by term, no Eigen.
double kernel_by_hand(double b, double x, double y, double z, double cx, double cy, double cz) {
  const double dx = x - cx, dy = y - cy, dz = z - cz;
  return std::exp(-b * (dx * dx + dy * dy + dz * dz));
}

}  // namespace

TEST_SUITE("grid_basis") {
  TEST_CASE("build_grid sizes and domain measure") {
    const VolumeGrid brain = box_grid({91, 109, 91}, Vec3(2, 2, 2), Vec3(-90, -126, -72));
    CHECK(brain.masked_count() == 91 * 109 * 91);
    CHECK(brain.voxel_volume() == 8.0);

    const VolumeGrid one = box_grid({1, 1, 1}, Vec3::Ones(), Vec3::Zero());
    CHECK(one.domain_measure() == 1.0);

    const VolumeGrid slice = box_grid({20, 20, 1}, Vec3(2, 2, 2), Vec3::Zero());
    CHECK(slice.masked_count() == 400);
    CHECK(slice.domain_measure() == 3200.0);
  }

  TEST_CASE("build_grid rejects empty masks and bad shapes") {
    CHECK(error_code([] { build_grid({3, 3, 1}, Vec3::Ones(), Vec3::Zero(), std::vector<std::uint8_t>(9, 0)); }) ==
          "empty_domain");
    CHECK(error_code([] { build_grid({3, 3, 1}, Vec3::Ones(), Vec3::Zero(), std::vector<std::uint8_t>(8, 1)); }) ==
          "invalid_grid");
    CHECK(error_code([] { build_grid({0, 3, 1}, Vec3::Ones(), Vec3::Zero(), {}); }) == "invalid_grid");
    CHECK(error_code([] { build_grid({1, 1, 1}, Vec3(1, 0, 1), Vec3::Zero(), {1}); }) == "invalid_grid");
  }

  TEST_CASE("world and index mapping is a bijection on the lattice") {
    const VolumeGrid g = box_grid({7, 5, 3}, Vec3(2, 3, 4), Vec3(-5, 1, 10));
    for (int k = 0; k < 3; ++k) {
      for (int j = 0; j < 5; ++j) {
        for (int i = 0; i < 7; ++i) {
          const auto ijk = g.nearest_ijk(g.world(i, j, k));
          CHECK(ijk == std::array<int, 3>{i, j, k});
          CHECK(g.ijk(g.linear_index(i, j, k)) == std::array<int, 3>{i, j, k});
        }
      }
    }
  }

  TEST_CASE("masked centers follow ascending linear order") {
    const VolumeGrid g = ellipse_grid({9, 11, 2}, Vec3(1, 1, 1), Vec3::Zero());
    for (Index v = 0; v < g.masked_count(); ++v) {
      const Index lin = g.masked_linear()[static_cast<std::size_t>(v)];
      CHECK(g.masked_position(lin) == v);
      const auto ijk = g.ijk(lin);
      CHECK((g.masked_centers().row(v).transpose() - g.world(ijk[0], ijk[1], ijk[2])).norm() == 0.0);
    }
  }

  TEST_CASE("default_kernel_layout on simple slices") {
    const VolumeGrid g = box_grid({20, 20, 1}, Vec3(2, 2, 2), Vec3::Zero());
    const PointsXd one = default_kernel_layout(g, {0.0}, 1, 1);
    REQUIRE(one.rows() == 1);
    CHECK(one(0, 0) == doctest::Approx(19.0));
    CHECK(one(0, 1) == doctest::Approx(19.0));

    const PointsXd four = default_kernel_layout(g, {0.0}, 2, 2);
    REQUIRE(four.rows() == 4);
    std::vector<std::pair<double, double>> got;
    for (Index m = 0; m < 4; ++m) got.emplace_back(four(m, 0), four(m, 1));
    std::sort(got.begin(), got.end());
    CHECK(got == std::vector<std::pair<double, double>>{{0, 0}, {0, 38}, {38, 0}, {38, 38}});
  }

  TEST_CASE("default_kernel_layout drops unmasked centers") {
    const VolumeGrid g = ellipse_grid({40, 48, 1}, Vec3(4, 4, 1), Vec3(-78, -94, -20));
    const PointsXd c = default_kernel_layout(g, {-20.0}, 6, 8);
    CHECK(c.rows() < 48);
    CHECK(c.rows() > 20);
    for (Index m = 0; m < c.rows(); ++m) {
      const auto ijk = g.nearest_ijk(c.row(m).transpose());
      CHECK(g.masked_position(g.linear_index(ijk[0], ijk[1], ijk[2])) >= 0);
    }
    // Eight slices of a whole-brain shaped volume never exceed nx * ny each.
    const VolumeGrid brain = ellipse_grid({91, 109, 91}, Vec3(2, 2, 2), Vec3(-90, -126, -72));
    const PointsXd cb = default_kernel_layout(brain, {-38, -22, -14, -2, 6, 18, 28, 44}, 6, 8);
    CHECK(cb.rows() <= 384);
    CHECK(cb.rows() > 0);
  }

  TEST_CASE("build_basis values") {
    const VolumeGrid g = box_grid({10, 10, 1}, Vec3(2, 2, 2), Vec3::Zero());
    PointsXd centers(2, 3);
    centers << 4, 6, 0, 10, 6, 0;  // voxel centers
    const BasisSet basis = build_basis(g, centers, 0.002);
    CHECK(basis.p() == 3);
    const Index at = g.masked_position(g.linear_index(2, 3, 0));
    CHECK(basis.voxel_design(at, 1) == 1.0);
    // 10 mm away: exp(-0.2).
    CHECK(basis.voxel_design(g.masked_position(g.linear_index(7, 3, 0)), 1) == doctest::Approx(std::exp(-0.2)).epsilon(1e-14));
    CHECK(std::exp(-0.2) == doctest::Approx(0.8187).epsilon(1e-4));
    CHECK((basis.voxel_design.col(0).array() == 1.0).all());

    const BasisSet sharper = build_basis(g, centers, 0.004);
    for (Index v = 0; v < g.masked_count(); ++v) {
      for (Index m = 1; m < 3; ++m) {
        if (basis.voxel_design(v, m) < 1.0) CHECK(sharper.voxel_design(v, m) < basis.voxel_design(v, m));
      }
    }
  }

  TEST_CASE("build_basis errors") {
    const VolumeGrid g = box_grid({5, 5, 1}, Vec3::Ones(), Vec3::Zero());
    PointsXd far(1, 3);
    far << 1000, 1000, 0;
    CHECK(error_code([&] { build_basis(g, far, 0.01); }) == "kernel_outside_domain");
    PointsXd near(1, 3);
    near << 2, 2, 0;
    CHECK(error_code([&] { build_basis(g, near, 0.0); }) == "invalid_bandwidth");
    CHECK(error_code([&] { build_basis(g, near, -1.0); }) == "invalid_bandwidth");
  }

  TEST_CASE("eval_log_intensity examples") {
    const VolumeGrid g = box_grid({6, 6, 1}, Vec3(2, 2, 2), Vec3::Zero());
    PointsXd centers(4, 3);
    centers << 0, 0, 0, 4, 6, 0, 8, 2, 0, 10, 10, 0;
    const BasisSet basis = build_basis(g, centers, 0.01);
    PointsXd pts(3, 3);
    pts << 1, 2, 0, 7.5, 3, 0, 3, 9, 0;

    CHECK((eval_log_intensity(basis, VectorXd::Zero(5), pts).array() == 0.0).all());
    VectorXd c = VectorXd::Zero(5);
    c(0) = std::log(2.0);
    CHECK(eval_log_intensity(basis, c, pts).array().exp().isApprox(VectorXd::Constant(3, 2.0).array(), 1e-15));

    Rng rng(7);
    const VectorXd theta = rng.normal_vector(5);
    const VectorXd got = eval_log_intensity(basis, theta, pts);
    for (Index j = 0; j < 3; ++j) {
      double expect = theta(0);
      for (Index m = 0; m < 4; ++m) {
        expect += theta(m + 1) *
                  kernel_by_hand(0.01, pts(j, 0), pts(j, 1), pts(j, 2), centers(m, 0), centers(m, 1), centers(m, 2));
      }
      CHECK(got(j) == doctest::Approx(expect).epsilon(1e-13));
    }
    CHECK(error_code([&] { eval_log_intensity(basis, VectorXd::Zero(4), pts); }) == "dimension_mismatch");
  }

  TEST_CASE("intensity_integral closed forms and refined quadrature") {
    const VolumeGrid g = box_grid({10, 10, 1}, Vec3(3, 3, 1), Vec3::Zero());
    PointsXd centers(1, 3);
    centers << 12, 15, 0;
    const BasisSet basis = build_basis(g, centers, 0.01);
    CHECK(intensity_integral(basis, VectorXd::Zero(2), g) == doctest::Approx(g.domain_measure()).epsilon(1e-14));
    VectorXd c = VectorXd::Zero(2);
    c(0) = std::log(3.5);
    CHECK(intensity_integral(basis, c, g) == doctest::Approx(3.5 * g.domain_measure()).epsilon(1e-13));

    // Independent 10x refined midpoint rule over each voxel footprint.
    Rng rng(3);
    for (int rep = 0; rep < 5; ++rep) {
      const VectorXd theta = rng.normal_vector(2);
      double fine = 0.0;
      const int r = 10;
      for (Index v = 0; v < g.masked_count(); ++v) {
        for (int a = 0; a < r; ++a) {
          for (int b = 0; b < r; ++b) {
            const double x = g.masked_centers()(v, 0) + 3.0 * ((a + 0.5) / r - 0.5);
            const double y = g.masked_centers()(v, 1) + 3.0 * ((b + 0.5) / r - 0.5);
            fine += std::exp(theta(0) + theta(1) * kernel_by_hand(0.01, x, y, 0, 12, 15, 0)) * 9.0 / (r * r);
          }
        }
      }
      CHECK(std::abs(intensity_integral(basis, theta, g) / fine - 1.0) < 0.02);
      CHECK(intensity_integral_refined(basis, theta, g, 10) == doctest::Approx(fine).epsilon(1e-10));
    }
  }

  TEST_CASE("intensity_integral reports overflow") {
    const VolumeGrid g = box_grid({4, 4, 1}, Vec3::Ones(), Vec3::Zero());
    const BasisSet basis = build_basis(g, PointsXd(Vec3(1, 1, 0).transpose()), 0.1);
    VectorXd theta = VectorXd::Zero(2);
    theta(0) = 800;
    try {
      intensity_integral(basis, theta, g);
      FAIL("expected overflow");
    } catch (const Error& e) {
      CHECK(e.code() == "intensity_overflow");
      CHECK(std::string(e.what()).find("800") != std::string::npos);
    }
  }

  TEST_CASE("basis properties") {
    const VolumeGrid g = ellipse_grid({15, 12, 2}, Vec3(2, 2, 3), Vec3(-14, -11, 0));
    Rng rng(11);
    PointsXd centers(5, 3);
    for (Index m = 0; m < 5; ++m) centers.row(m) = g.masked_centers().row(static_cast<Index>(rng.uniform() * g.masked_count()));
    const BasisSet basis = build_basis(g, centers, 0.02);

    // Design entries in (0, 1], constant column exactly 1.
    CHECK((basis.voxel_design.col(0).array() == 1.0).all());
    CHECK((basis.voxel_design.rightCols(5).array() > 0.0).all());
    CHECK((basis.voxel_design.rightCols(5).array() <= 1.0).all());

    // Linearity in theta.
    const VectorXd t1 = rng.normal_vector(6), t2 = rng.normal_vector(6);
    const PointsXd& pts = g.masked_centers();
    const VectorXd lhs = eval_log_intensity(basis, t1 + t2, pts);
    const VectorXd rhs = eval_log_intensity(basis, t1, pts) + eval_log_intensity(basis, t2, pts);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);

    // Shifting the constant coefficient by log c scales M by c.
    VectorXd shifted = t1;
    shifted(0) += std::log(1.7);
    CHECK(intensity_integral(basis, shifted, g) == doctest::Approx(1.7 * intensity_integral(basis, t1, g)).epsilon(1e-13));

    // Kernel symmetry about its center.
    for (int rep = 0; rep < 10; ++rep) {
      const Vec3 d = 5.0 * rng.normal_vector(3);
      const Vec3 c = centers.row(0).transpose();
      CHECK(basis_row(basis, c + d)(1) == doctest::Approx(basis_row(basis, Vec3(c - d))(1)).epsilon(1e-15));
    }
  }

  TEST_CASE("snap_focus policy") {
    const VolumeGrid g = ellipse_grid({10, 10, 1}, Vec3(2, 2, 2), Vec3::Zero());
    const SnapResult inside = snap_focus(g, Vec3(9.3, 10.6, 0.4));
    CHECK(inside.position == Vec3(10, 10, 0));
    CHECK_FALSE(inside.moved_off_mask);

    // Lattice corner is outside the ellipse: moved to the nearest masked center.
    const SnapResult corner = snap_focus(g, Vec3(0.2, 0.2, 0));
    CHECK(corner.moved_off_mask);
    CHECK(corner.masked >= 0);
    double best = INFINITY;
    const Vec3 w(0.2, 0.2, 0);
    for (Index v = 0; v < g.masked_count(); ++v) best = std::min(best, (g.masked_centers().row(v).transpose() - w).norm());
    CHECK((corner.position - w).norm() == doctest::Approx(best));

    CHECK(error_code([&] { snap_focus(g, Vec3(100, 0, 0)); }) == "focus_out_of_bounds");
  }
}
