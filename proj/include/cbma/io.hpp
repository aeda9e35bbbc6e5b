#pragma once

#include "cbma/classify.hpp"
#include "cbma/config.hpp"
#include "cbma/synthdata.hpp"

#include <string>
#include <utility>
#include <vector>

namespace cbma {

/// Studies read from a foci CSV, in order of first appearance.
///
/// CSV layout: a header row starting with study_id,x_mm,y_mm,z_mm followed
/// by optional columns. A column named `label` holds 0/1 or is empty for
/// unlabeled studies, `weight` holds a per-study weight, and any other
/// column is a numeric covariate. Lines starting with '#' are comments;
/// `# format_version: N` declares the format version.
struct Dataset {
  std::vector<Study> studies;
  std::vector<std::string> covariate_names;
  std::vector<double> weights;  // empty when the file has no weight column
  std::vector<std::string> warnings;
};

/// Throws Error("parse_error") with the 1-based line number on malformed
/// rows and Error("mixed_labels") when a study has labeled and unlabeled rows.
Dataset load_foci_csv(const std::string& path);
void save_foci_csv(const std::string& path, const Dataset& data);

/// Snaps every focus to the grid (see snap_focus) and records a warning per
/// focus that had to move off-mask.
void snap_dataset(Dataset& data, const VolumeGrid& grid);

/// Computes focus designs for every study.
void attach_dataset(Dataset& data, const BasisSet& basis);

/// Deterministic split; `fraction` of every label stratum (1, 0, unlabeled)
/// goes to train (rounded to nearest) when stratified, of the whole set
/// otherwise. Original order is kept inside each part.
std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double fraction, std::uint64_t seed,
                                             bool stratify = true);

Dataset scenario_dataset(const Scenario& scenario);

/// Hex FNV-1a digest of a file's bytes.
std::string file_digest(const std::string& path);

void save_predictions_csv(const std::string& path, const std::vector<Prediction>& predictions);
std::vector<Prediction> load_predictions_csv(const std::string& path);

void save_roc_csv(const std::string& path, const RocCurve& roc);

/// Kernel centers as m,x_mm,y_mm,z_mm rows (m = basis column, from 1).
void save_kernel_layout_csv(const std::string& path, const PointsXd& centers);
PointsXd load_kernel_layout_csv(const std::string& path);

/// Writes the chain into a directory as raw little-endian arrays plus
/// manifest.json describing their shapes. `extra` is stored under "model".
void save_chain(const std::string& dir, const ChainOutput& chain, const Json& extra = Json::object());
ChainOutput load_chain(const std::string& dir, Json* extra = nullptr);

/// Splits one CSV line on commas (no quoting).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace cbma
