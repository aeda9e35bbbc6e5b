#pragma once

#include "cbma/basis.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cbma {

/// One contrast: its foci and, when known, its type label and covariates.
struct Study {
  std::string id;
  PointsXd foci;                        // n_i x 3, mm
  std::optional<int> label;             // 1 = type 1, 0 = type 0
  std::optional<VectorXd> covariates;   // r-vector
  MatrixXd focus_design;                // n_i x p, row j = b(x_ij)^T
  VectorXd focus_sum;                   // p, sum_j b(x_ij)

  Index n_foci() const { return foci.rows(); }
};

/// Fills focus_design and focus_sum for the given basis.
void attach_basis(Study& study, const BasisSet& basis);

Study make_study(std::string id, PointsXd foci, const BasisSet& basis, std::optional<int> label = std::nullopt,
                 std::optional<VectorXd> covariates = std::nullopt);

}  // namespace cbma
