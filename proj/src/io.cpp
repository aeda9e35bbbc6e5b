#include "cbma/io.hpp"

#include "cbma/binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace cbma {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, long line, const std::string& what) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v)) {
    throw Error("parse_error", "line " + std::to_string(line) + ": bad " + what + " '" + t + "'");
  }
  return v;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int parse_format_version(const std::string& comment) {
  const std::string key = "format_version:";
  const auto pos = comment.find(key);
  if (pos == std::string::npos) return 0;
  return std::atoi(comment.c_str() + pos + key.size());
}

struct RowAccumulator {
  std::vector<Vec3> foci;
  std::optional<int> label;
  bool labeled = false;
  std::optional<VectorXd> covariates;
  double weight = 1.0;
};

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

Dataset load_foci_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path);
  Dataset data;
  std::string line;
  long line_no = 0;
  std::vector<std::string> header;
  int label_col = -1, weight_col = -1;
  std::vector<int> cov_cols;
  std::vector<std::string> order;
  std::unordered_map<std::string, RowAccumulator> rows;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      if (parse_format_version(t) > kFormatVersion) {
        throw Error("unsupported_format", path + ": foci format_version is newer than this build");
      }
      continue;
    }
    const auto cells = split_csv_line(t);
    if (header.empty()) {
      header = cells;
      if (header.size() < 4 || header[0] != "study_id" || header[1] != "x_mm" || header[2] != "y_mm" ||
          header[3] != "z_mm") {
        throw Error("parse_error", "line " + std::to_string(line_no) + ": header must start with study_id,x_mm,y_mm,z_mm");
      }
      for (int c = 4; c < static_cast<int>(header.size()); ++c) {
        if (header[c] == "label") {
          label_col = c;
        } else if (header[c] == "weight") {
          weight_col = c;
        } else {
          cov_cols.push_back(c);
          data.covariate_names.push_back(header[c]);
        }
      }
      continue;
    }
    if (cells.size() != header.size()) {
      throw Error("parse_error", "line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                                     " fields, found " + std::to_string(cells.size()));
    }
    const std::string& id = cells[0];
    if (id.empty()) throw Error("parse_error", "line " + std::to_string(line_no) + ": empty study_id");
    const Vec3 x(parse_double(cells[1], line_no, "x_mm"), parse_double(cells[2], line_no, "y_mm"),
                 parse_double(cells[3], line_no, "z_mm"));

    std::optional<int> label;
    if (label_col >= 0 && !cells[label_col].empty()) {
      if (cells[label_col] == "1") {
        label = 1;
      } else if (cells[label_col] == "0") {
        label = 0;
      } else {
        throw Error("parse_error", "line " + std::to_string(line_no) + ": label must be 0, 1 or empty");
      }
    }
    std::optional<VectorXd> cov;
    if (!cov_cols.empty()) {
      VectorXd c(static_cast<Index>(cov_cols.size()));
      for (std::size_t m = 0; m < cov_cols.size(); ++m) {
        c(static_cast<Index>(m)) = parse_double(cells[cov_cols[m]], line_no, header[cov_cols[m]]);
      }
      cov = c;
    }
    const double weight = weight_col >= 0 ? parse_double(cells[weight_col], line_no, "weight") : 1.0;

    auto it = rows.find(id);
    if (it == rows.end()) {
      RowAccumulator acc;
      acc.label = label;
      acc.labeled = label.has_value();
      acc.covariates = cov;
      acc.weight = weight;
      it = rows.emplace(id, std::move(acc)).first;
      order.push_back(id);
    } else {
      RowAccumulator& acc = it->second;
      if (acc.labeled != label.has_value()) {
        throw Error("mixed_labels", "line " + std::to_string(line_no) + ": study " + id +
                                        " mixes labeled and unlabeled rows");
      }
      if (acc.label != label) {
        throw Error("mixed_labels", "line " + std::to_string(line_no) + ": study " + id + " has conflicting labels");
      }
      if (cov && *acc.covariates != *cov) {
        throw Error("parse_error", "line " + std::to_string(line_no) + ": covariates differ within study " + id);
      }
      if (weight != acc.weight) {
        throw Error("parse_error", "line " + std::to_string(line_no) + ": weight differs within study " + id);
      }
    }
    it->second.foci.push_back(x);
  }
  if (header.empty()) data.warnings.push_back(path + ": empty foci file");

  for (const std::string& id : order) {
    RowAccumulator& acc = rows.at(id);
    Study s;
    s.id = id;
    s.foci.resize(static_cast<Index>(acc.foci.size()), 3);
    for (std::size_t j = 0; j < acc.foci.size(); ++j) s.foci.row(static_cast<Index>(j)) = acc.foci[j].transpose();
    s.label = acc.label;
    s.covariates = acc.covariates;
    data.studies.push_back(std::move(s));
    if (weight_col >= 0) data.weights.push_back(acc.weight);
  }
  return data;
}

void save_foci_csv(const std::string& path, const Dataset& data) {
  bool any_label = false;
  for (const Study& s : data.studies) any_label = any_label || s.label.has_value();
  const bool weights = !data.weights.empty();
  std::ostringstream out;
  out << "# format_version: " << kFormatVersion << "\n";
  out << "study_id,x_mm,y_mm,z_mm";
  if (any_label) out << ",label";
  if (weights) out << ",weight";
  for (const auto& name : data.covariate_names) out << "," << name;
  out << "\n";
  for (std::size_t i = 0; i < data.studies.size(); ++i) {
    const Study& s = data.studies[i];
    if (s.id.find(',') != std::string::npos) throw Error("invalid_id", "study id contains a comma: " + s.id);
    for (Index j = 0; j < s.foci.rows(); ++j) {
      out << s.id << "," << fmt(s.foci(j, 0)) << "," << fmt(s.foci(j, 1)) << "," << fmt(s.foci(j, 2));
      if (any_label) out << "," << (s.label ? std::to_string(*s.label) : "");
      if (weights) out << "," << fmt(data.weights[i]);
      for (std::size_t m = 0; m < data.covariate_names.size(); ++m) {
        if (!s.covariates) throw Error("invalid_data", "study " + s.id + " lacks covariates");
        out << "," << fmt((*s.covariates)(static_cast<Index>(m)));
      }
      out << "\n";
    }
  }
  atomic_write(path, out.str());
}

void snap_dataset(Dataset& data, const VolumeGrid& grid) {
  for (Study& s : data.studies) {
    for (Index j = 0; j < s.foci.rows(); ++j) {
      const Vec3 x = s.foci.row(j).transpose();
      SnapResult r;
      try {
        r = snap_focus(grid, x);
      } catch (const Error& e) {
        throw Error(e.code(), "study " + s.id + ": focus (" + fmt(x.x()) + ", " + fmt(x.y()) + ", " + fmt(x.z()) +
                                  ") is outside the grid bounding box");
      }
      if (r.moved_off_mask) {
        data.warnings.push_back("study " + s.id + ": focus (" + fmt(x.x()) + ", " + fmt(x.y()) + ", " + fmt(x.z()) +
                                ") moved to the nearest masked voxel");
      }
      s.foci.row(j) = r.position.transpose();
    }
  }
}

void attach_dataset(Dataset& data, const BasisSet& basis) {
  for (Study& s : data.studies) attach_basis(s, basis);
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double fraction, std::uint64_t seed, bool stratify) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error("invalid_fraction", "fraction must lie in [0, 1]");
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < data.studies.size(); ++i) {
    const auto& y = data.studies[i].label;
    strata[stratify ? (y ? *y : -1) : 0].push_back(i);
  }
  std::vector<char> in_train(data.studies.size(), 0);
  for (auto& [key, idx] : strata) {
    Rng rng(seed, {static_cast<std::uint64_t>(key + 2)});
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    const auto take = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size())));
    for (std::size_t m = 0; m < take; ++m) in_train[idx[m]] = 1;
  }
  Dataset train, test;
  train.covariate_names = test.covariate_names = data.covariate_names;
  for (std::size_t i = 0; i < data.studies.size(); ++i) {
    Dataset& part = in_train[i] ? train : test;
    part.studies.push_back(data.studies[i]);
    if (!data.weights.empty()) part.weights.push_back(data.weights[i]);
  }
  return {std::move(train), std::move(test)};
}

Dataset scenario_dataset(const Scenario& scenario) {
  Dataset data;
  for (std::size_t i = 0; i < scenario.ids.size(); ++i) {
    Study s;
    s.id = scenario.ids[i];
    s.foci = scenario.foci[i];
    s.label = scenario.labels[i];
    data.studies.push_back(std::move(s));
  }
  return data;
}

std::string file_digest(const std::string& path) {
  const auto bytes = read_file(path);
  return hex64(fnv1a64(bytes.data(), bytes.size()));
}

void save_predictions_csv(const std::string& path, const std::vector<Prediction>& predictions) {
  std::ostringstream out;
  out << "# format_version: " << kFormatVersion << "\n";
  out << "study_id,p_type1_mean,p_lo95,p_hi95,n_discarded_draws\n";
  for (const Prediction& p : predictions) {
    out << p.study_id << "," << fmt(p.mean) << "," << fmt(p.lo95) << "," << fmt(p.hi95) << "," << p.n_discarded << "\n";
  }
  atomic_write(path, out.str());
}

std::vector<Prediction> load_predictions_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path);
  std::vector<Prediction> out;
  std::string line;
  long line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split_csv_line(t);
    if (!header) {
      if (cells.size() < 2 || cells[0] != "study_id" || cells[1] != "p_type1_mean") {
        throw Error("parse_error", "line " + std::to_string(line_no) + ": expected predictions header");
      }
      header = true;
      continue;
    }
    if (cells.size() != 5) throw Error("parse_error", "line " + std::to_string(line_no) + ": expected 5 fields");
    Prediction p;
    p.study_id = cells[0];
    p.mean = parse_double(cells[1], line_no, "p_type1_mean");
    p.lo95 = parse_double(cells[2], line_no, "p_lo95");
    p.hi95 = parse_double(cells[3], line_no, "p_hi95");
    p.n_discarded = static_cast<long>(parse_double(cells[4], line_no, "n_discarded_draws"));
    out.push_back(std::move(p));
  }
  return out;
}

void save_roc_csv(const std::string& path, const RocCurve& roc) {
  std::ostringstream out;
  out << "# format_version: " << kFormatVersion << "\n";
  out << "# auc: " << fmt(roc.auc) << "\n";
  out << "threshold,fpr,tpr\n";
  for (std::size_t m = 0; m < roc.fpr.size(); ++m) {
    out << (std::isinf(roc.thresholds[m]) ? std::string("inf") : fmt(roc.thresholds[m])) << "," << fmt(roc.fpr[m])
        << "," << fmt(roc.tpr[m]) << "\n";
  }
  atomic_write(path, out.str());
}

void save_kernel_layout_csv(const std::string& path, const PointsXd& centers) {
  std::ostringstream out;
  out << "# format_version: " << kFormatVersion << "\n";
  out << "m,x_mm,y_mm,z_mm\n";
  for (Index m = 0; m < centers.rows(); ++m) {
    out << m + 1 << "," << fmt(centers(m, 0)) << "," << fmt(centers(m, 1)) << "," << fmt(centers(m, 2)) << "\n";
  }
  atomic_write(path, out.str());
}

PointsXd load_kernel_layout_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path);
  std::vector<Vec3> pts;
  std::string line;
  long line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split_csv_line(t);
    if (!header) {
      header = true;
      if (cells.size() == 4 && cells[0] == "m") continue;
      throw Error("parse_error", "line " + std::to_string(line_no) + ": expected header m,x_mm,y_mm,z_mm");
    }
    if (cells.size() != 4) throw Error("parse_error", "line " + std::to_string(line_no) + ": expected 4 fields");
    pts.emplace_back(parse_double(cells[1], line_no, "x_mm"), parse_double(cells[2], line_no, "y_mm"),
                     parse_double(cells[3], line_no, "z_mm"));
  }
  PointsXd out(static_cast<Index>(pts.size()), 3);
  for (std::size_t m = 0; m < pts.size(); ++m) out.row(static_cast<Index>(m)) = pts[m].transpose();
  return out;
}

namespace {

void write_array(const std::filesystem::path& file, const std::vector<double>& values) {
  BinaryWriter w;
  for (double v : values) w.f64(v);
  atomic_write(file.string(), w.bytes());
}

void write_int_array(const std::filesystem::path& file, const std::vector<std::int64_t>& values) {
  BinaryWriter w;
  for (auto v : values) w.i64(v);
  atomic_write(file.string(), w.bytes());
}

std::vector<double> read_array(const std::filesystem::path& file, std::size_t count) {
  BinaryReader r(read_file(file.string()));
  std::vector<double> out(count);
  for (auto& v : out) v = r.f64();
  if (!r.at_end()) throw Error("corrupt_file", file.string() + " has unexpected size");
  return out;
}

std::vector<std::int64_t> read_int_array(const std::filesystem::path& file, std::size_t count) {
  BinaryReader r(read_file(file.string()));
  std::vector<std::int64_t> out(count);
  for (auto& v : out) v = r.i64();
  if (!r.at_end()) throw Error("corrupt_file", file.string() + " has unexpected size");
  return out;
}

template <typename Get>
std::vector<double> flatten(const std::vector<Draw>& draws, Get get) {
  std::vector<double> out;
  for (const Draw& d : draws) {
    const auto& m = get(d);
    out.insert(out.end(), m.data(), m.data() + m.size());
  }
  return out;
}

}  // namespace

void save_chain(const std::string& dir, const ChainOutput& chain, const Json& extra) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);
  const auto S = chain.draws.size();
  Index p = 0, k = 0, n = 0, r = 0;
  bool theta = false;
  if (S > 0) {
    const Draw& d0 = chain.draws.front();
    p = d0.lambda.rows();
    k = d0.k;
    n = d0.eta.rows();
    r = d0.beta.rows();
    theta = d0.theta.size() > 0;
    for (const Draw& d : chain.draws) {
      if (d.k != k || d.lambda.rows() != p || d.eta.rows() != n || d.beta.rows() != r ||
          (d.theta.size() > 0) != theta) {
        throw Error("rank_changed", "retained draws must share their shapes");
      }
    }
  }

  std::vector<std::int64_t> iterations, ks;
  std::vector<double> alpha;
  for (const Draw& d : chain.draws) {
    iterations.push_back(d.iteration);
    ks.push_back(d.k);
    alpha.push_back(d.alpha);
  }
  write_int_array(root / "iteration.i64", iterations);
  write_int_array(root / "k.i64", ks);
  write_array(root / "alpha.f64", alpha);
  write_array(root / "gamma.f64", flatten(chain.draws, [](const Draw& d) -> const VectorXd& { return d.gamma; }));
  write_array(root / "sigma2.f64", flatten(chain.draws, [](const Draw& d) -> const VectorXd& { return d.sigma2; }));
  write_array(root / "lambda.f64", flatten(chain.draws, [](const Draw& d) -> const MatrixXd& { return d.lambda; }));
  write_array(root / "eta.f64", flatten(chain.draws, [](const Draw& d) -> const MatrixXd& { return d.eta; }));
  write_array(root / "beta.f64", flatten(chain.draws, [](const Draw& d) -> const MatrixXd& { return d.beta; }));
  if (theta) write_array(root / "theta.f64", flatten(chain.draws, [](const Draw& d) -> const MatrixXd& { return d.theta; }));

  write_array(root / "accept_rate.f64", chain.accept_rate);
  write_array(root / "step_size.f64", chain.step_size_trace);
  write_int_array(root / "k_trace.i64", std::vector<std::int64_t>(chain.k_trace.begin(), chain.k_trace.end()));
  write_int_array(root / "divergences.i64", std::vector<std::int64_t>(chain.divergences.begin(), chain.divergences.end()));
  std::vector<std::int64_t> hashes;
  for (auto h : chain.kernel_hash) hashes.push_back(static_cast<std::int64_t>(h));
  write_int_array(root / "kernel_hash.u64", hashes);

  Json labels = Json::array();
  for (const auto& y : chain.labels) labels.push_back(y ? Json(*y) : Json(nullptr));
  Json m{
      {"format_version", kFormatVersion},
      {"layout", "little-endian, column-major per draw, draws concatenated"},
      {"n_draws", S},
      {"p", p},
      {"k", k},
      {"n", n},
      {"r", r},
      {"n_iterations", chain.accept_rate.size()},
      {"has_theta", theta},
      {"arrays",
       {{"iteration.i64", {S}},
        {"k.i64", {S}},
        {"alpha.f64", {S}},
        {"gamma.f64", {S, k}},
        {"sigma2.f64", {S, p}},
        {"lambda.f64", {S, p, k}},
        {"eta.f64", {S, n, k}},
        {"beta.f64", {S, r, k}},
        {"theta.f64", theta ? Json{S, p, n} : Json(nullptr)},
        {"accept_rate.f64", {chain.accept_rate.size()}},
        {"step_size.f64", {chain.step_size_trace.size()}},
        {"k_trace.i64", {chain.k_trace.size()}},
        {"divergences.i64", {chain.divergences.size()}},
        {"kernel_hash.u64", {chain.kernel_hash.size()}}}},
      {"final_step_size", chain.final_step_size},
      {"final_step_size_bits", hex64(std::bit_cast<std::uint64_t>(chain.final_step_size))},
      {"study_ids", chain.study_ids},
      {"labels", labels},
      {"config", to_json(chain.config)},
      {"model", extra},
  };
  atomic_write((root / "manifest.json").string(), m.dump(2) + "\n");
}

ChainOutput load_chain(const std::string& dir, Json* extra) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  const auto bytes = read_file((root / "manifest.json").string());
  Json m;
  try {
    m = Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::exception& e) {
    throw Error("corrupt_file", "chain manifest: " + std::string(e.what()));
  }
  if (m.value("format_version", 0) > kFormatVersion) throw Error("unsupported_format", "chain format_version too new");

  ChainOutput c;
  c.config = sampler_config_from_json(m.at("config"));
  c.study_ids = m.at("study_ids").get<std::vector<std::string>>();
  for (const auto& y : m.at("labels")) c.labels.push_back(y.is_null() ? std::nullopt : std::optional<int>(y.get<int>()));
  c.final_step_size = std::bit_cast<double>(std::stoull(m.at("final_step_size_bits").get<std::string>(), nullptr, 16));
  if (extra) *extra = m.value("model", Json::object());

  const auto S = m.at("n_draws").get<std::size_t>();
  const auto p = m.at("p").get<Index>();
  const auto k = m.at("k").get<Index>();
  const auto n = m.at("n").get<Index>();
  const auto r = m.at("r").get<Index>();
  const bool theta = m.at("has_theta").get<bool>();
  const auto T = m.at("n_iterations").get<std::size_t>();

  const auto it = read_int_array(root / "iteration.i64", S);
  const auto ks = read_int_array(root / "k.i64", S);
  const auto alpha = read_array(root / "alpha.f64", S);
  const auto gamma = read_array(root / "gamma.f64", S * static_cast<std::size_t>(k));
  const auto sigma2 = read_array(root / "sigma2.f64", S * static_cast<std::size_t>(p));
  const auto lambda = read_array(root / "lambda.f64", S * static_cast<std::size_t>(p * k));
  const auto eta = read_array(root / "eta.f64", S * static_cast<std::size_t>(n * k));
  const auto beta = read_array(root / "beta.f64", S * static_cast<std::size_t>(r * k));
  const auto th = theta ? read_array(root / "theta.f64", S * static_cast<std::size_t>(p * n)) : std::vector<double>();

  for (std::size_t s = 0; s < S; ++s) {
    Draw d;
    d.iteration = it[s];
    d.k = ks[s];
    d.alpha = alpha[s];
    d.gamma = Eigen::Map<const VectorXd>(gamma.data() + s * k, k);
    d.sigma2 = Eigen::Map<const VectorXd>(sigma2.data() + s * p, p);
    d.lambda = Eigen::Map<const MatrixXd>(lambda.data() + s * p * k, p, k);
    d.eta = Eigen::Map<const MatrixXd>(eta.data() + s * n * k, n, k);
    d.beta = Eigen::Map<const MatrixXd>(beta.data() + s * r * k, r, k);
    if (theta) d.theta = Eigen::Map<const MatrixXd>(th.data() + s * p * n, p, n);
    c.draws.push_back(std::move(d));
  }
  c.accept_rate = read_array(root / "accept_rate.f64", T);
  c.step_size_trace = read_array(root / "step_size.f64", T);
  for (auto v : read_int_array(root / "k_trace.i64", T)) c.k_trace.push_back(static_cast<int>(v));
  for (auto v : read_int_array(root / "divergences.i64", T)) c.divergences.push_back(v);
  for (auto v : read_int_array(root / "kernel_hash.u64", T)) c.kernel_hash.push_back(static_cast<std::uint64_t>(v));
  return c;
}

}  // namespace cbma
