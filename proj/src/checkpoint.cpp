#include "cbma/binary_io.hpp"
#include "cbma/config.hpp"
#include "cbma/sampler.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace cbma {

namespace {

constexpr char kMagic[] = "CBMACKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t data_fingerprint(const FitData& data) {
  BinaryWriter w;
  w.i64(data.n());
  w.i64(data.basis->p());
  w.i64(data.grid->masked_count());
  w.f64(data.basis->bandwidth);
  for (const Study& s : *data.studies) {
    w.str(s.id);
    w.i64(s.n_foci());
    w.i64(s.label ? *s.label : -1);
  }
  return fnv1a64(w.bytes().data(), w.bytes().size());
}

void write_labels(BinaryWriter& w, const Labels& labels) {
  w.u64(labels.size());
  for (const auto& y : labels) w.i64(y ? *y : -1);
}

Labels read_labels(BinaryReader& r) {
  Labels out(static_cast<std::size_t>(r.u64()));
  for (auto& y : out) {
    const std::int64_t v = r.i64();
    if (v >= 0) y = static_cast<int>(v);
  }
  return out;
}

void write_state(BinaryWriter& w, const ModelState& s) {
  w.matrix(s.theta);
  w.matrix(s.factor.lambda);
  w.matrix(s.factor.eta);
  w.vector(s.factor.sigma2);
  w.matrix(s.factor.iota);
  w.vector(s.factor.delta);
  w.matrix(s.covariate.beta);
  w.matrix(s.covariate.w);
  w.f64(s.probit.alpha);
  w.vector(s.probit.gamma);
  w.vector(s.probit.W);
  w.f64(s.probit.priors.m_alpha);
  w.f64(s.probit.priors.v_alpha);
  w.f64(s.probit.priors.mu_gamma);
  w.f64(s.probit.priors.v_gamma);
  w.f64(s.step_size);
}

ModelState read_state(BinaryReader& r) {
  ModelState s;
  s.theta = r.matrix();
  s.factor.lambda = r.matrix();
  s.factor.eta = r.matrix();
  s.factor.sigma2 = r.vector();
  s.factor.iota = r.matrix();
  s.factor.delta = r.vector();
  s.factor.recompute_tau();
  s.covariate.beta = r.matrix();
  s.covariate.w = r.matrix();
  s.probit.alpha = r.f64();
  s.probit.gamma = r.vector();
  s.probit.W = r.vector();
  s.probit.priors.m_alpha = r.f64();
  s.probit.priors.v_alpha = r.f64();
  s.probit.priors.mu_gamma = r.f64();
  s.probit.priors.v_gamma = r.f64();
  s.step_size = r.f64();
  return s;
}

template <typename T, typename Put>
void write_seq(BinaryWriter& w, const std::vector<T>& v, Put put) {
  w.u64(v.size());
  for (const T& x : v) put(x);
}

}  // namespace

void atomic_write(const std::string& path, const std::vector<char>& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io_error", "cannot open " + tmp + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("io_error", "failed writing " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("io_error", "cannot rename " + tmp + " to " + path + ": " + ec.message());
}

void atomic_write(const std::string& path, const std::string& text) {
  atomic_write(path, std::vector<char>(text.begin(), text.end()));
}

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open " + path);
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void ChainRunner::save_checkpoint(const std::string& path) const {
  BinaryWriter w;
  w.raw(std::string(kMagic, 8));
  w.u32(kCheckpointVersion);
  w.str(to_json(config_).dump());
  w.u64(data_fingerprint(data_));
  w.i64(iteration_);
  write_state(w, state_);
  write_seq(w, trace_.accept_history, [&](double x) { w.f64(x); });

  const ChainOutput& o = output_;
  write_seq(w, o.accept_rate, [&](double x) { w.f64(x); });
  write_seq(w, o.k_trace, [&](int x) { w.i64(x); });
  write_seq(w, o.step_size_trace, [&](double x) { w.f64(x); });
  write_seq(w, o.divergences, [&](long x) { w.i64(x); });
  write_seq(w, o.kernel_hash, [&](std::uint64_t x) { w.u64(x); });
  write_seq(w, o.study_ids, [&](const std::string& x) { w.str(x); });
  write_labels(w, o.labels);
  w.f64(o.final_step_size);
  write_seq(w, o.draws, [&](const Draw& d) {
    w.i64(d.iteration);
    w.matrix(d.theta);
    w.matrix(d.lambda);
    w.vector(d.sigma2);
    w.matrix(d.eta);
    w.f64(d.alpha);
    w.vector(d.gamma);
    w.matrix(d.beta);
    w.i64(d.k);
  });
  atomic_write(path, w.bytes());
}

ChainRunner ChainRunner::from_checkpoint(const FitData& data, const std::string& path) {
  BinaryReader r(read_file(path));
  if (r.raw(8) != std::string(kMagic, 8)) throw Error("corrupt_file", path + " is not a checkpoint");
  if (r.u32() != kCheckpointVersion) throw Error("unsupported_format", "unsupported checkpoint version");
  const SamplerConfig config = sampler_config_from_json(Json::parse(r.str()));
  if (r.u64() != data_fingerprint(data)) throw Error("checkpoint_mismatch", "checkpoint was written for different data");

  ChainRunner runner(data, config);
  runner.iteration_ = r.i64();
  runner.state_ = read_state(r);
  const auto n_hist = r.u64();
  runner.trace_.accept_history.resize(n_hist);
  for (auto& x : runner.trace_.accept_history) x = r.f64();

  ChainOutput& o = runner.output_;
  o.accept_rate.resize(r.u64());
  for (auto& x : o.accept_rate) x = r.f64();
  o.k_trace.resize(r.u64());
  for (auto& x : o.k_trace) x = static_cast<int>(r.i64());
  o.step_size_trace.resize(r.u64());
  for (auto& x : o.step_size_trace) x = r.f64();
  o.divergences.resize(r.u64());
  for (auto& x : o.divergences) x = r.i64();
  o.kernel_hash.resize(r.u64());
  for (auto& x : o.kernel_hash) x = r.u64();
  o.study_ids.resize(r.u64());
  for (auto& x : o.study_ids) x = r.str();
  o.labels = read_labels(r);
  o.final_step_size = r.f64();
  o.draws.resize(r.u64());
  for (Draw& d : o.draws) {
    d.iteration = r.i64();
    d.theta = r.matrix();
    d.lambda = r.matrix();
    d.sigma2 = r.vector();
    d.eta = r.matrix();
    d.alpha = r.f64();
    d.gamma = r.vector();
    d.beta = r.matrix();
    d.k = r.i64();
  }
  if (!r.at_end()) throw Error("corrupt_file", "trailing bytes in checkpoint");
  return runner;
}

}  // namespace cbma
