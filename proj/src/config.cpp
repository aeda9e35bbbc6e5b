#include "cbma/config.hpp"

#include <set>

namespace cbma {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error("invalid_config", where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw Error("invalid_config", "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw Error("invalid_config", std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

}  // namespace

Json to_json(const MgpsHyper& h) {
  return Json{{"rho", h.rho},           {"a1", h.a1},         {"a2", h.a2},
              {"a_sigma", h.a_sigma},   {"b_sigma", h.b_sigma}, {"k_init", h.k_init},
              {"adapt_eps", h.adapt_eps}, {"adapt_p0", h.adapt_p0}, {"adapt_p1", h.adapt_p1}};
}

MgpsHyper mgps_hyper_from_json(const Json& j) {
  reject_unknown(j, {"rho", "a1", "a2", "a_sigma", "b_sigma", "k_init", "adapt_eps", "adapt_p0", "adapt_p1"}, "factor");
  MgpsHyper h;
  read(j, "rho", h.rho);
  read(j, "a1", h.a1);
  read(j, "a2", h.a2);
  read(j, "a_sigma", h.a_sigma);
  read(j, "b_sigma", h.b_sigma);
  read(j, "k_init", h.k_init);
  read(j, "adapt_eps", h.adapt_eps);
  read(j, "adapt_p0", h.adapt_p0);
  read(j, "adapt_p1", h.adapt_p1);
  return h;
}

Json to_json(const SamplerConfig& c) {
  return Json{
      {"format_version", kFormatVersion},
      {"n_iter", c.n_iter},
      {"burn_in", c.burn_in},
      {"thin", c.thin},
      {"hmc",
       {{"L_mean", c.hmc.L_mean},
        {"eps_init", c.hmc.eps_init},
        {"target_accept", c.hmc.target_accept},
        {"adapt_every", c.hmc.adapt_every},
        {"adapt_window", c.hmc.adapt_window},
        {"kappa", c.hmc.kappa}}},
      {"rng_seed", c.rng_seed},
      {"factor", to_json(c.factor)},
      {"probit",
       {{"m_alpha", c.probit.m_alpha},
        {"v_alpha", c.probit.v_alpha},
        {"mu_gamma", c.probit.mu_gamma},
        {"v_gamma", c.probit.v_gamma}}},
      {"use_probit", c.use_probit},
      {"use_covariates", c.use_covariates},
      {"n_threads", c.n_threads},
      {"use_likelihood", c.use_likelihood},
      {"record_theta", c.record_theta},
      {"checkpoint_every", c.checkpoint_every},
      {"checkpoint_path", c.checkpoint_path},
  };
}

SamplerConfig sampler_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"format_version", "n_iter", "burn_in", "thin", "hmc", "rng_seed", "factor", "probit", "use_probit",
                  "use_covariates", "n_threads", "use_likelihood", "record_theta", "checkpoint_every",
                  "checkpoint_path"},
                 "sampler config");
  SamplerConfig c;
  if (j.contains("format_version") && j.at("format_version").get<int>() > kFormatVersion) {
    throw Error("unsupported_format", "sampler config format_version is newer than this build");
  }
  read(j, "n_iter", c.n_iter);
  read(j, "burn_in", c.burn_in);
  read(j, "thin", c.thin);
  if (j.contains("hmc")) {
    const Json& h = j.at("hmc");
    reject_unknown(h, {"L_mean", "eps_init", "target_accept", "adapt_every", "adapt_window", "kappa"}, "hmc");
    read(h, "L_mean", c.hmc.L_mean);
    read(h, "eps_init", c.hmc.eps_init);
    read(h, "target_accept", c.hmc.target_accept);
    read(h, "adapt_every", c.hmc.adapt_every);
    read(h, "adapt_window", c.hmc.adapt_window);
    read(h, "kappa", c.hmc.kappa);
  }
  read(j, "rng_seed", c.rng_seed);
  if (j.contains("factor")) c.factor = mgps_hyper_from_json(j.at("factor"));
  if (j.contains("probit")) {
    const Json& p = j.at("probit");
    reject_unknown(p, {"m_alpha", "v_alpha", "mu_gamma", "v_gamma"}, "probit");
    read(p, "m_alpha", c.probit.m_alpha);
    read(p, "v_alpha", c.probit.v_alpha);
    read(p, "mu_gamma", c.probit.mu_gamma);
    read(p, "v_gamma", c.probit.v_gamma);
  }
  read(j, "use_probit", c.use_probit);
  read(j, "use_covariates", c.use_covariates);
  read(j, "n_threads", c.n_threads);
  read(j, "use_likelihood", c.use_likelihood);
  read(j, "record_theta", c.record_theta);
  read(j, "checkpoint_every", c.checkpoint_every);
  read(j, "checkpoint_path", c.checkpoint_path);
  c.validate();
  return c;
}

}  // namespace cbma
