// cbma: command-line front end (fit, predict, simulate, summarize,
// baseline-nbc, evaluate, split, kernels).

#include "cbma/baseline_nbc.hpp"
#include "cbma/binary_io.hpp"
#include "cbma/classify.hpp"
#include "cbma/config.hpp"
#include "cbma/io.hpp"
#include "cbma/summaries.hpp"
#include "cbma/synthdata.hpp"
#include "cbma/volume_io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

namespace fs = std::filesystem;
using namespace cbma;

namespace {

struct Manifest {
  std::string command;
  std::vector<std::string> args;
  Json config = Json::object();
  Json inputs = Json::object();
  Json outputs = Json::array();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void input(const std::string& path) { inputs[path] = file_digest(path); }
  void output(const std::string& path) { outputs.push_back(path); }

  void write(const std::string& path) const {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const Json j{{"format_version", kFormatVersion}, {"software_version", kVersion}, {"command", command},
                 {"args", args},  {"config", config},   {"inputs", inputs},
                 {"outputs", outputs}, {"timing", {{"seconds", seconds}}}};
    atomic_write(path, j.dump(2) + "\n");
  }
};

Json model_json(const BasisSet& basis) {
  return Json{{"bandwidth", basis.bandwidth}, {"kernels", "kernels.csv"}, {"mask", "mask"}};
}

// Grid and basis stored alongside a chain by `fit`.
struct FittedModel {
  VolumeGrid grid;
  BasisSet basis;
  ChainOutput chain;
};

FittedModel load_fitted(const std::string& dir) {
  FittedModel m;
  Json extra;
  m.chain = load_chain(dir, &extra);
  const fs::path root(dir);
  m.grid = load_mask((root / extra.at("mask").get<std::string>()).string());
  m.basis = build_basis(m.grid, load_kernel_layout_csv((root / extra.at("kernels").get<std::string>()).string()),
                        extra.at("bandwidth").get<double>());
  return m;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  if (text.empty()) return out;
  for (const auto& cell : split_csv_line(text)) out.push_back(std::stoi(cell));
  return out;
}

void print_json(const Json& j) { std::cout << j.dump(2) << std::endl; }

// ---- fit ------------------------------------------------------------------

struct FitArgs {
  std::string foci, mask, config, out, kernels, resume;
  int nx = 6, ny = 8;
  double bandwidth = 0.002;
  std::optional<std::uint64_t> seed;
  std::optional<long> n_iter, burn_in, thin, checkpoint_every;
  std::optional<int> threads;
};

int run_fit(const FitArgs& a, Manifest& manifest) {
  SamplerConfig config;
  if (!a.config.empty()) {
    const auto bytes = read_file(a.config);
    config = sampler_config_from_json(Json::parse(bytes.begin(), bytes.end()));
    manifest.input(a.config);
  }
  if (a.seed) config.rng_seed = *a.seed;
  if (a.n_iter) config.n_iter = *a.n_iter;
  if (a.burn_in) config.burn_in = *a.burn_in;
  if (a.thin) config.thin = *a.thin;
  if (a.threads) config.n_threads = *a.threads;
  if (a.checkpoint_every) config.checkpoint_every = *a.checkpoint_every;
  fs::create_directories(a.out);
  const fs::path out(a.out);
  if (config.checkpoint_every > 0 && config.checkpoint_path.empty()) {
    config.checkpoint_path = (out / "checkpoint.bin").string();
  }
  config.validate();

  VolumeGrid grid = load_mask(a.mask);
  manifest.input(volume_base(a.mask) + ".json");
  manifest.input(volume_base(a.mask) + ".raw");
  Dataset data = load_foci_csv(a.foci);
  manifest.input(a.foci);
  snap_dataset(data, grid);
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";

  PointsXd centers;
  if (!a.kernels.empty()) {
    centers = load_kernel_layout_csv(a.kernels);
    manifest.input(a.kernels);
  } else {
    std::set<double> zs;
    for (Index v = 0; v < grid.masked_count(); ++v) zs.insert(grid.masked_centers()(v, 2));
    centers = default_kernel_layout(grid, std::vector<double>(zs.begin(), zs.end()), a.nx, a.ny);
  }
  const BasisSet basis = build_basis(grid, centers, a.bandwidth);
  attach_dataset(data, basis);
  const FitData fit_data(grid, basis, data.studies);

  ChainRunner runner = a.resume.empty() ? ChainRunner(fit_data, config) : ChainRunner::from_checkpoint(fit_data, a.resume);
  if (!a.resume.empty()) manifest.input(a.resume);
  runner.run();
  const ChainOutput chain = runner.take_output();

  const std::string chain_dir = (out / "chain").string();
  save_chain(chain_dir, chain, model_json(basis));
  save_kernel_layout_csv((fs::path(chain_dir) / "kernels.csv").string(), basis.centers);
  save_mask((fs::path(chain_dir) / "mask").string(), grid);
  manifest.output(chain_dir);
  manifest.config = to_json(chain.config);
  manifest.config["model"] = {{"nx", a.nx}, {"ny", a.ny}, {"bandwidth", a.bandwidth}, {"p", basis.p()}};
  manifest.write((out / "manifest.json").string());

  const Diagnostics d = diagnostics(chain);
  print_json({{"retained_draws", chain.draws.size()},
              {"p", basis.p()},
              {"final_k", chain.k_trace.empty() ? 0 : chain.k_trace.back()},
              {"mean_accept_sampling", d.mean_accept_sampling},
              {"divergences", d.total_divergences},
              {"chain", chain_dir}});
  return 0;
}

// ---- predict --------------------------------------------------------------

struct PredictArgs {
  std::string chain, foci, out;
  ClassifyConfig classify;
};

int run_predict(const PredictArgs& a, Manifest& manifest) {
  Dataset data = load_foci_csv(a.foci);
  manifest.input(a.foci);
  std::vector<Prediction> predictions;
  if (!data.studies.empty()) {
    FittedModel m = load_fitted(a.chain);
    snap_dataset(data, m.grid);
    for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
    attach_dataset(data, m.basis);
    predictions = classify_new(data.studies, m.chain, m.grid, m.basis, a.classify);
  }
  save_predictions_csv(a.out, predictions);
  manifest.output(a.out);
  manifest.config = {{"n_sweeps", a.classify.n_sweeps}, {"burn_in", a.classify.burn_in},
                     {"max_draws", a.classify.max_draws}, {"rng_seed", a.classify.rng_seed}};
  manifest.write(a.out + ".manifest.json");
  print_json({{"n_studies", predictions.size()}, {"predictions", a.out}});
  return 0;
}

// ---- simulate -------------------------------------------------------------

ScenarioConfig scenario_from_json(const Json& j) {
  ScenarioConfig c;
  const std::set<std::string> known{"dims", "voxel_size", "z_mm", "n_studies", "type1_fraction", "k_true",
                                    "bumps_min", "bumps_max", "amp_min", "amp_max", "width_min", "width_max",
                                    "perturb_bumps", "perturb_width_min", "perturb_width_max", "perturb_sd", "type_shift",
                                    "expected_count_type1", "expected_count_type0", "seed", "format_version"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw Error("invalid_config", "unknown key '" + key + "' in scenario");
  }
  if (j.contains("dims")) c.dims = j.at("dims").get<Dims>();
  if (j.contains("voxel_size")) {
    const auto v = j.at("voxel_size").get<std::array<double, 3>>();
    c.voxel_size = Vec3(v[0], v[1], v[2]);
  }
  c.z_mm = j.value("z_mm", c.z_mm);
  c.n_studies = j.value("n_studies", c.n_studies);
  c.type1_fraction = j.value("type1_fraction", c.type1_fraction);
  c.k_true = j.value("k_true", c.k_true);
  c.bumps_min = j.value("bumps_min", c.bumps_min);
  c.bumps_max = j.value("bumps_max", c.bumps_max);
  c.amp_min = j.value("amp_min", c.amp_min);
  c.amp_max = j.value("amp_max", c.amp_max);
  c.width_min = j.value("width_min", c.width_min);
  c.width_max = j.value("width_max", c.width_max);
  c.perturb_bumps = j.value("perturb_bumps", c.perturb_bumps);
  c.perturb_width_min = j.value("perturb_width_min", c.perturb_width_min);
  c.perturb_width_max = j.value("perturb_width_max", c.perturb_width_max);
  c.perturb_sd = j.value("perturb_sd", c.perturb_sd);
  c.type_shift = j.value("type_shift", c.type_shift);
  c.expected_count_type1 = j.value("expected_count_type1", c.expected_count_type1);
  c.expected_count_type0 = j.value("expected_count_type0", c.expected_count_type0);
  c.seed = j.value("seed", c.seed);
  return c;
}

Json scenario_to_json(const ScenarioConfig& c) {
  return Json{{"format_version", kFormatVersion},
              {"dims", c.dims},
              {"voxel_size", {c.voxel_size[0], c.voxel_size[1], c.voxel_size[2]}},
              {"z_mm", c.z_mm},
              {"n_studies", c.n_studies},
              {"type1_fraction", c.type1_fraction},
              {"k_true", c.k_true},
              {"bumps_min", c.bumps_min},
              {"bumps_max", c.bumps_max},
              {"amp_min", c.amp_min},
              {"amp_max", c.amp_max},
              {"width_min", c.width_min},
              {"width_max", c.width_max},
              {"perturb_bumps", c.perturb_bumps},
              {"perturb_width_min", c.perturb_width_min},
              {"perturb_width_max", c.perturb_width_max},
              {"perturb_sd", c.perturb_sd},
              {"type_shift", c.type_shift},
              {"expected_count_type1", c.expected_count_type1},
              {"expected_count_type0", c.expected_count_type0},
              {"seed", c.seed}};
}

struct SimulateArgs {
  std::string scenario, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_studies;
};

int run_simulate(const SimulateArgs& a, Manifest& manifest) {
  ScenarioConfig config;
  if (!a.scenario.empty()) {
    const auto bytes = read_file(a.scenario);
    config = scenario_from_json(Json::parse(bytes.begin(), bytes.end()));
    manifest.input(a.scenario);
  }
  if (a.seed) config.seed = *a.seed;
  if (a.n_studies) config.n_studies = *a.n_studies;
  const Scenario sc = make_scenario(config);

  fs::create_directories(a.out);
  const fs::path out(a.out);
  const std::string foci = (out / "foci.csv").string();
  save_foci_csv(foci, scenario_dataset(sc));
  save_mask((out / "mask").string(), sc.grid);
  VolumeWriteOptions opt;
  opt.value_name = "true_intensity";
  opt.dtype = "float64";
  opt.volume_names = sc.ids;
  save_volumes((out / "truths").string(), sc.grid, sc.truths, opt);
  atomic_write((out / "scenario.json").string(), scenario_to_json(config).dump(2) + "\n");
  for (const char* f : {"foci.csv", "mask.json", "mask.raw", "truths.json", "truths.raw", "scenario.json"}) {
    manifest.output((out / f).string());
  }
  manifest.config = scenario_to_json(config);
  manifest.write((out / "manifest.json").string());
  long n_foci = 0;
  for (const auto& f : sc.foci) n_foci += f.rows();
  print_json({{"n_studies", sc.ids.size()}, {"n_type1", config.n_type1()}, {"n_foci", n_foci}, {"out", a.out}});
  return 0;
}

// ---- summarize ------------------------------------------------------------

struct SummarizeArgs {
  std::string chain, out, png_slices;
  std::optional<double> png_min, png_max;
  bool per_study = true;
};

int run_summarize(const SummarizeArgs& a, Manifest& manifest) {
  const FittedModel m = load_fitted(a.chain);
  manifest.input((fs::path(a.chain) / "manifest.json").string());
  fs::create_directories(a.out);
  const fs::path out(a.out);
  const std::vector<int> slices = parse_int_list(a.png_slices);

  auto write = [&](const std::string& name, const MatrixXd& values, const std::string& value_name,
                   std::vector<std::string> names = {}) {
    VolumeWriteOptions opt;
    opt.value_name = value_name;
    opt.volume_names = std::move(names);
    if (!slices.empty()) {
      PngSlices png;
      png.slices = slices;
      png.vmin = a.png_min.value_or(values.minCoeff());
      png.vmax = a.png_max.value_or(values.maxCoeff() > png.vmin ? values.maxCoeff() : png.vmin + 1.0);
      opt.png = png;
    }
    const std::string base = (out / name).string();
    save_volumes(base, m.grid, values, opt);
    manifest.output(base + ".json");
  };

  std::vector<Index> all, type1, type0;
  for (std::size_t i = 0; i < m.chain.labels.size(); ++i) {
    all.push_back(static_cast<Index>(i));
    if (m.chain.labels[i] == 1) type1.push_back(static_cast<Index>(i));
    if (m.chain.labels[i] == 0) type0.push_back(static_cast<Index>(i));
  }
  Json summary = Json::object();
  write("group_all", group_mean_intensity(m.chain, all, m.basis).mean, "intensity");
  if (!type1.empty()) write("group_type1", group_mean_intensity(m.chain, type1, m.basis).mean, "intensity");
  if (!type0.empty()) write("group_type0", group_mean_intensity(m.chain, type0, m.basis).mean, "intensity");
  if (!type1.empty() && !type0.empty()) {
    const DifferenceMaps d = difference_maps(m.chain, type1, type0, m.basis);
    write("difference_mean", d.mean, "intensity_difference");
    write("difference_sd", d.sd, "intensity_difference_sd");
    write("difference_standardized", d.standardized, "standardized_difference");
    VectorXd flag(static_cast<Index>(d.zero_sd.size()));
    for (std::size_t v = 0; v < d.zero_sd.size(); ++v) flag(static_cast<Index>(v)) = d.zero_sd[v];
    write("difference_zero_sd", flag, "zero_sd_flag");
  }
  write("dictionary", mean_dictionary(m.chain, m.basis), "dictionary_loading");
  if (a.per_study) write("study_intensity", posterior_mean_intensities(m.chain, m.basis), "intensity", m.chain.study_ids);

  const Diagnostics d = diagnostics(m.chain);
  Json scalars = Json::array();
  for (const auto& t : d.scalars) {
    scalars.push_back({{"name", t.name}, {"mean", t.mean}, {"sd", t.sd}, {"mcse", t.mcse}, {"n", t.n}});
  }
  summary["scalars"] = scalars;
  summary["mean_accept_burn_in"] = d.mean_accept_burn_in;
  summary["mean_accept_sampling"] = d.mean_accept_sampling;
  summary["total_divergences"] = d.total_divergences;
  summary["k_final"] = d.k_trace.empty() ? 0 : d.k_trace.back();
  const std::string diag = (out / "diagnostics.json").string();
  atomic_write(diag, summary.dump(2) + "\n");
  manifest.output(diag);
  manifest.write((out / "manifest.json").string());
  print_json(summary);
  return 0;
}

// ---- baseline-nbc ---------------------------------------------------------

struct NbcArgs {
  std::string train, test, mask, out, prob_maps;
  double radius = 10.0;
  bool flat_prior = false;
};

int run_nbc(const NbcArgs& a, Manifest& manifest) {
  const VolumeGrid grid = load_mask(a.mask);
  Dataset train = load_foci_csv(a.train);
  Dataset test = load_foci_csv(a.test);
  manifest.input(a.train);
  manifest.input(a.test);
  snap_dataset(train, grid);
  snap_dataset(test, grid);

  std::vector<ActivationMap> maps;
  std::vector<int> labels;
  std::vector<double> weights;
  for (std::size_t i = 0; i < train.studies.size(); ++i) {
    const Study& s = train.studies[i];
    if (!s.label) throw Error("missing_label", "training study " + s.id + " has no label");
    maps.push_back(binary_activation_map(s.foci, grid, a.radius));
    labels.push_back(*s.label);
    if (!train.weights.empty()) weights.push_back(train.weights[i]);
  }
  const ProbabilityMaps probs = group_probability_maps(maps, labels, weights);
  double prior = 0.5;
  if (!a.flat_prior) {
    double n1 = 0;
    for (int y : labels) n1 += y;
    prior = n1 / static_cast<double>(labels.size());
  }
  if (!a.prob_maps.empty()) {
    MatrixXd pm(probs.p1.size(), 2);
    pm << probs.p1, probs.p0;
    VolumeWriteOptions opt;
    opt.value_name = "activation_probability";
    opt.volume_names = {"type1", "type0"};
    save_volumes(a.prob_maps, grid, pm, opt);
    manifest.output(volume_base(a.prob_maps) + ".json");
  }

  std::vector<Prediction> predictions;
  std::vector<int> test_labels;
  std::vector<double> scores;
  for (const Study& s : test.studies) {
    const double p = nbc_predict(binary_activation_map(s.foci, grid, a.radius), probs, prior);
    predictions.push_back({s.id, p, p, p, 0, 1});
    if (s.label) {
      test_labels.push_back(*s.label);
      scores.push_back(p);
    }
  }
  save_predictions_csv(a.out, predictions);
  manifest.output(a.out);
  manifest.config = {{"radius", a.radius}, {"prior_type1", prior}, {"clip", kProbabilityClip}};
  manifest.write(a.out + ".manifest.json");
  Json result{{"n_test", predictions.size()}, {"prior_type1", prior}, {"predictions", a.out}};
  if (test_labels.size() == test.studies.size() && !test_labels.empty()) {
    try {
      result["auc"] = roc_auc(test_labels, scores).auc;
    } catch (const Error&) {
      result["auc"] = nullptr;
    }
  }
  print_json(result);
  return 0;
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  std::string predictions, labels, roc_out, truths, estimates, mask;
  std::optional<double> reference_imse;
};

int run_evaluate(const EvaluateArgs& a, Manifest& manifest) {
  Json result = Json::object();
  if (!a.predictions.empty()) {
    if (a.labels.empty()) throw Error("usage", "--predictions needs --labels");
    const auto preds = load_predictions_csv(a.predictions);
    const Dataset truth = load_foci_csv(a.labels);
    manifest.input(a.predictions);
    manifest.input(a.labels);
    std::map<std::string, int> label_of;
    for (const Study& s : truth.studies) {
      if (s.label) label_of[s.id] = *s.label;
    }
    std::vector<int> labels;
    std::vector<double> scores;
    for (const Prediction& p : preds) {
      const auto it = label_of.find(p.study_id);
      if (it == label_of.end()) throw Error("missing_label", "no label for study " + p.study_id);
      labels.push_back(it->second);
      scores.push_back(p.mean);
    }
    const RocCurve roc = roc_auc(labels, scores);
    result["auc"] = roc.auc;
    result["n"] = labels.size();
    if (!a.roc_out.empty()) {
      save_roc_csv(a.roc_out, roc);
      manifest.output(a.roc_out);
      result["roc"] = a.roc_out;
    }
  }
  if (!a.truths.empty()) {
    if (a.estimates.empty() || a.mask.empty()) throw Error("usage", "--truths needs --estimates and --mask");
    const VolumeGrid grid = load_mask(a.mask);
    const MatrixXd t = masked_values(grid, load_volumes(a.truths));
    const MatrixXd e = masked_values(grid, load_volumes(a.estimates));
    const double value = imse(t, e, grid);
    result["imse"] = value;
    result["imse_best_constant"] = imse(t, best_constant_estimate(t), grid);
    if (a.reference_imse) result["rimse"] = value / *a.reference_imse;
  }
  if (result.empty()) throw Error("usage", "evaluate needs --predictions or --truths");
  manifest.config = result;
  print_json(result);
  return 0;
}

// ---- split ----------------------------------------------------------------

struct SplitArgs {
  std::string foci, train, test, test_labels;
  double fraction = 0.5;
  std::uint64_t seed = 1;
  bool stratify = true;
};

int run_split(const SplitArgs& a, Manifest& manifest) {
  const Dataset data = load_foci_csv(a.foci);
  manifest.input(a.foci);
  auto [train, test] = split_train_test(data, a.fraction, a.seed, a.stratify);
  save_foci_csv(a.train, train);
  manifest.output(a.train);
  if (!a.test_labels.empty()) {
    save_foci_csv(a.test_labels, test);
    manifest.output(a.test_labels);
  }
  for (Study& s : test.studies) s.label.reset();
  save_foci_csv(a.test, test);
  manifest.output(a.test);
  manifest.config = {{"fraction", a.fraction}, {"seed", a.seed}, {"stratify", a.stratify}};
  manifest.write(a.train + ".manifest.json");
  print_json({{"n_train", train.studies.size()}, {"n_test", test.studies.size()}});
  return 0;
}

// ---- kernels --------------------------------------------------------------

struct KernelArgs {
  std::string mask, out;
  int nx = 6, ny = 8;
};

int run_kernels(const KernelArgs& a, Manifest& manifest) {
  const VolumeGrid grid = load_mask(a.mask);
  std::set<double> zs;
  for (Index v = 0; v < grid.masked_count(); ++v) zs.insert(grid.masked_centers()(v, 2));
  const PointsXd centers = default_kernel_layout(grid, std::vector<double>(zs.begin(), zs.end()), a.nx, a.ny);
  save_kernel_layout_csv(a.out, centers);
  manifest.output(a.out);
  print_json({{"n_kernels", centers.rows()}, {"p", centers.rows() + 1}, {"out", a.out}});
  return 0;
}

void report_error(const std::string& code, const std::string& message) {
  std::cerr << Json{{"error", message}, {"code", code}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian coordinate-based meta-analysis with a latent factor Cox process model"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Manifest manifest;
  for (int i = 0; i < argc; ++i) manifest.args.emplace_back(argv[i]);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Run the sampler on a foci CSV");
  fit_cmd->add_option("--foci", fit.foci, "Foci CSV")->required();
  fit_cmd->add_option("--mask", fit.mask, "Mask volume (.json sidecar or base path)")->required();
  fit_cmd->add_option("--out", fit.out, "Output directory")->required();
  fit_cmd->add_option("--config", fit.config, "Sampler config JSON");
  fit_cmd->add_option("--kernels", fit.kernels, "Kernel layout CSV (overrides --nx/--ny)");
  fit_cmd->add_option("--nx", fit.nx, "Kernels per slice along x");
  fit_cmd->add_option("--ny", fit.ny, "Kernels per slice along y");
  fit_cmd->add_option("--bandwidth", fit.bandwidth, "Kernel bandwidth b (mm^-2)");
  fit_cmd->add_option("--seed", fit.seed);
  fit_cmd->add_option("--n-iter", fit.n_iter);
  fit_cmd->add_option("--burn-in", fit.burn_in);
  fit_cmd->add_option("--thin", fit.thin);
  fit_cmd->add_option("--threads", fit.threads);
  fit_cmd->add_option("--checkpoint-every", fit.checkpoint_every);
  fit_cmd->add_option("--resume", fit.resume, "Checkpoint to resume from");

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Posterior predictive type probabilities for foci-only studies");
  predict_cmd->add_option("--chain", predict.chain, "Chain directory written by fit")->required();
  predict_cmd->add_option("--foci", predict.foci, "Foci CSV of new studies")->required();
  predict_cmd->add_option("--out", predict.out, "Predictions CSV")->required();
  predict_cmd->add_option("--sweeps", predict.classify.n_sweeps);
  predict_cmd->add_option("--inner-burn-in", predict.classify.burn_in);
  predict_cmd->add_option("--max-draws", predict.classify.max_draws);
  predict_cmd->add_option("--seed", predict.classify.rng_seed);
  predict_cmd->add_option("--threads", predict.classify.n_threads);

  SimulateArgs simulate;
  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate a synthetic multi-study dataset");
  simulate_cmd->add_option("--scenario", simulate.scenario, "Scenario JSON");
  simulate_cmd->add_option("--out", simulate.out, "Output directory")->required();
  simulate_cmd->add_option("--seed", simulate.seed);
  simulate_cmd->add_option("--n-studies", simulate.n_studies);

  SummarizeArgs summarize;
  auto* summarize_cmd = app.add_subcommand("summarize", "Posterior summary volumes and diagnostics");
  summarize_cmd->add_option("--chain", summarize.chain, "Chain directory written by fit")->required();
  summarize_cmd->add_option("--out", summarize.out, "Output directory")->required();
  summarize_cmd->add_option("--png-slices", summarize.png_slices, "Comma-separated axial slice indices to render");
  summarize_cmd->add_option("--png-min", summarize.png_min);
  summarize_cmd->add_option("--png-max", summarize.png_max);
  summarize_cmd->add_flag("!--no-per-study", summarize.per_study, "Skip per-study intensity maps");

  NbcArgs nbc;
  auto* nbc_cmd = app.add_subcommand("baseline-nbc", "Activation-map naive Bayes baseline");
  nbc_cmd->add_option("--train", nbc.train, "Labeled training foci CSV")->required();
  nbc_cmd->add_option("--test", nbc.test, "Test foci CSV")->required();
  nbc_cmd->add_option("--mask", nbc.mask, "Mask volume")->required();
  nbc_cmd->add_option("--out", nbc.out, "Predictions CSV")->required();
  nbc_cmd->add_option("--radius", nbc.radius, "Activation radius (mm)");
  nbc_cmd->add_flag("--flat-prior", nbc.flat_prior, "Use P(type 1) = 0.5 instead of the training frequency");
  nbc_cmd->add_option("--prob-maps", nbc.prob_maps, "Write the class probability maps to this volume");

  EvaluateArgs evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "AUC/ROC for predictions, IMSE for intensity maps");
  evaluate_cmd->add_option("--predictions", evaluate.predictions);
  evaluate_cmd->add_option("--labels", evaluate.labels, "Foci CSV carrying the true labels");
  evaluate_cmd->add_option("--roc-out", evaluate.roc_out);
  evaluate_cmd->add_option("--truths", evaluate.truths);
  evaluate_cmd->add_option("--estimates", evaluate.estimates);
  evaluate_cmd->add_option("--mask", evaluate.mask);
  evaluate_cmd->add_option("--reference-imse", evaluate.reference_imse);

  KernelArgs kernels;
  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "Train/test split of a labeled foci CSV");
  split_cmd->add_option("--foci", split.foci, "Labeled foci CSV")->required();
  split_cmd->add_option("--train", split.train, "Training CSV (labels kept)")->required();
  split_cmd->add_option("--test", split.test, "Test CSV (labels removed)")->required();
  split_cmd->add_option("--test-labels", split.test_labels, "Test CSV with labels, for scoring");
  split_cmd->add_option("--fraction", split.fraction, "Fraction of each label stratum sent to train");
  split_cmd->add_option("--seed", split.seed);
  split_cmd->add_flag("!--no-stratify", split.stratify, "Split the whole set instead of per label");

  auto* kernels_cmd = app.add_subcommand("kernels", "Export the default kernel layout");
  kernels_cmd->add_option("--mask", kernels.mask)->required();
  kernels_cmd->add_option("--out", kernels.out)->required();
  kernels_cmd->add_option("--nx", kernels.nx);
  kernels_cmd->add_option("--ny", kernels.ny);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return 2;
  }

  try {
    if (fit_cmd->parsed()) {
      manifest.command = "fit";
      return run_fit(fit, manifest);
    }
    if (predict_cmd->parsed()) {
      manifest.command = "predict";
      return run_predict(predict, manifest);
    }
    if (simulate_cmd->parsed()) {
      manifest.command = "simulate";
      return run_simulate(simulate, manifest);
    }
    if (summarize_cmd->parsed()) {
      manifest.command = "summarize";
      return run_summarize(summarize, manifest);
    }
    if (nbc_cmd->parsed()) {
      manifest.command = "baseline-nbc";
      return run_nbc(nbc, manifest);
    }
    if (evaluate_cmd->parsed()) {
      manifest.command = "evaluate";
      return run_evaluate(evaluate, manifest);
    }
    if (split_cmd->parsed()) {
      manifest.command = "split";
      return run_split(split, manifest);
    }
    if (kernels_cmd->parsed()) {
      manifest.command = "kernels";
      return run_kernels(kernels, manifest);
    }
  } catch (const Error& e) {
    report_error(e.code(), e.what());
    return 1;
  } catch (const Json::exception& e) {
    report_error("invalid_json", e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 1;
  }
  return 0;
}
