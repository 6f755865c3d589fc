#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "skygp/hmc.hpp"
#include "skygp/posterior.hpp"
#include "skygp/rng.hpp"

namespace skygp {

inline constexpr const char* kCheckpointMagic = "skygp-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// Everything needed for a bit-exact resume: parameter state, sampler
/// tuning, the mass matrix, and the generator state. Doubles are stored as
/// hex floats.
struct Checkpoint {
  long iteration = 0;
  double eps = 0.1;
  double da_mu = 0.0, da_log_eps = 0.0, da_log_eps_bar = 0.0, da_h_bar = 0.0;
  long da_count = 0;
  ChainState state;
  int mass_mode = 0;  // MassMatrixMode as int
  Eigen::VectorXd mass_diag, mass_off;
  std::string rng_state;
  double cached_logpost = 0.0, cached_loglik = 0.0;
};

namespace detail {

inline std::string hex(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

inline void write_vector(std::ostream& os, const char* name, const Eigen::VectorXd& v) {
  os << name << ' ' << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << hex(v[i]);
  os << '\n';
}

inline Eigen::VectorXd read_vector(std::istream& is, const std::string& expect) {
  std::string name;
  long n = 0;
  is >> name >> n;
  if (name != expect || n < 0) throw std::runtime_error("checkpoint: bad field '" + name + "'");
  Eigen::VectorXd v(n);
  std::string tok;
  for (long i = 0; i < n; ++i) {
    is >> tok;
    v[i] = std::strtod(tok.c_str(), nullptr);
  }
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ck, const Rng& rng) {
  std::ostringstream os;
  os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  os << "iteration " << ck.iteration << '\n';
  os << "eps " << detail::hex(ck.eps) << '\n';
  os << "dual " << detail::hex(ck.da_mu) << ' ' << detail::hex(ck.da_log_eps) << ' '
     << detail::hex(ck.da_log_eps_bar) << ' ' << detail::hex(ck.da_h_bar) << ' ' << ck.da_count
     << '\n';
  detail::write_vector(os, "theta", ck.state.theta);
  detail::write_vector(os, "gfield", ck.state.gfield);
  detail::write_vector(os, "zmiss", ck.state.zmiss);
  os << "log_tau " << detail::hex(ck.state.log_tau) << '\n';
  detail::write_vector(os, "log_sigma2", ck.state.log_sigma2);
  detail::write_vector(os, "lambda_ell", ck.state.lambda_ell);
  os << "mass_mode " << ck.mass_mode << '\n';
  detail::write_vector(os, "mass_diag", ck.mass_diag);
  detail::write_vector(os, "mass_off", ck.mass_off);
  os << "cached " << detail::hex(ck.cached_logpost) << ' ' << detail::hex(ck.cached_loglik) << '\n';
  os << "rng ";
  rng.save(os);
  os << '\n';

  // write atomically so a kill never leaves a torn checkpoint behind
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp);
    out << os.str();
  }
  std::remove(path.c_str());
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot move checkpoint into place at " + path);
}

inline Checkpoint load_checkpoint(const std::string& path, Rng& rng) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kCheckpointMagic) throw std::runtime_error("not a checkpoint file: " + path);
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  std::string key, tok;
  in >> key >> ck.iteration;
  if (key != "iteration") throw std::runtime_error("checkpoint: expected iteration");
  in >> key >> tok;
  ck.eps = std::strtod(tok.c_str(), nullptr);
  in >> key;
  if (key != "dual") throw std::runtime_error("checkpoint: expected dual");
  in >> tok;
  ck.da_mu = std::strtod(tok.c_str(), nullptr);
  in >> tok;
  ck.da_log_eps = std::strtod(tok.c_str(), nullptr);
  in >> tok;
  ck.da_log_eps_bar = std::strtod(tok.c_str(), nullptr);
  in >> tok;
  ck.da_h_bar = std::strtod(tok.c_str(), nullptr);
  in >> ck.da_count;
  ck.state.theta = detail::read_vector(in, "theta");
  ck.state.gfield = detail::read_vector(in, "gfield");
  ck.state.zmiss = detail::read_vector(in, "zmiss");
  in >> key >> tok;
  ck.state.log_tau = std::strtod(tok.c_str(), nullptr);
  ck.state.log_sigma2 = detail::read_vector(in, "log_sigma2");
  ck.state.lambda_ell = detail::read_vector(in, "lambda_ell");
  in >> key >> ck.mass_mode;
  if (key != "mass_mode") throw std::runtime_error("checkpoint: expected mass_mode");
  ck.mass_diag = detail::read_vector(in, "mass_diag");
  ck.mass_off = detail::read_vector(in, "mass_off");
  in >> key >> tok;
  ck.cached_logpost = std::strtod(tok.c_str(), nullptr);
  in >> tok;
  ck.cached_loglik = std::strtod(tok.c_str(), nullptr);
  in >> key;
  if (key != "rng") throw std::runtime_error("checkpoint: expected rng state");
  rng.load(in);
  return ck;
}

}  // namespace skygp
