#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <kerrloss/cli/run_config.hpp>
#include <kerrloss/kerrloss.hpp>

namespace fs = std::filesystem;
using namespace kerrloss;
using kerrloss::cli::RunConfig;

namespace {

enum Exit { kOk = 0, kValidation = 1, kVerifyFailure = 2, kGateFailure = 3 };

struct Overrides {
  std::string config;
  std::vector<std::pair<std::string, std::string>> values;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config, "key=value config file");
  auto bind = [&](const std::string& flag, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(flag, [&ov, key](const std::string& v) { ov.values.emplace_back(key, v); }, help);
  };
  bind("--omega", "omega", "oscillator frequency");
  bind("--U", "U", "Kerr strength");
  bind("--kappa1", "kappa1", "one-body loss rate");
  bind("--kappa2", "kappa2", "two-body loss rate");
  bind("--nmax", "n_max", "Fock truncation");
  bind("--out", "out", "output directory");
  bind("--seed", "seed", "seed for randomized draws");
  cmd->add_option("--set", ov.sets, "extra key=value overrides");
}

RunConfig resolve(const Overrides& ov) {
  RunConfig c;
  if (!ov.config.empty()) c = cli::load_config(ov.config, c);
  for (const auto& [k, v] : ov.values) c.set(k, v);
  for (const auto& s : ov.sets) c = cli::parse_config_text(s, c);
  c.validate();
  return c;
}

std::string fmt_time(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

class Outputs {
 public:
  explicit Outputs(const RunConfig& c) : cfg_(c), dir_(c.out), hash_(c.hash()) {
    fs::create_directories(dir_);
    std::ofstream os(dir_ / "run.cfg");
    os << "# config_hash=" << hash_ << '\n' << c.serialize();
  }

  const std::string& hash() const { return hash_; }

  // numeric files start with the config-hash line
  std::ofstream open(const std::string& name) const {
    std::ofstream os(dir_ / name);
    if (!os) throw ValidationError("cannot write " + (dir_ / name).string());
    os << "# config_hash=" << hash_ << '\n';
    return os;
  }

  void write_json(const std::string& name, const nlohmann::json& j) const {
    std::ofstream os(dir_ / name);
    if (!os) throw ValidationError("cannot write " + (dir_ / name).string());
    os << j.dump(2) << '\n';
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

 private:
  RunConfig cfg_;
  fs::path dir_;
  std::string hash_;
};

int cmd_spectrum(const RunConfig& c) {
  Outputs out(c);
  Truncation t(c.n_max);
  Classification cls = classify_detailed(c.params);
  degeneracy_scan(c.params, t);
  {
    auto os = out.open("spectrum.csv");
    os << "m,k,re_lambda,im_lambda\n";
    os.precision(17);
    for (int m = -t.n_max(); m <= t.n_max(); ++m)
      for (int k = 0; k < t.block_size(m); ++k) {
        cplx l = eigenvalue(c.params, m, k);
        os << m << ',' << k << ',' << l.real() << ',' << l.imag() << '\n';
      }
  }
  auto os = out.open("asymptotic_modes.csv");
  os << "m,k,re_lambda,im_lambda\n";
  os.precision(17);
  int count = 0;
  std::cout << "case " << to_string(cls.tag);
  if (cls.near_integer_warning) std::cout << " (warning: kappa1/kappa2 within 1e-6 of an integer)";
  std::cout << "\n";
  for (int m = -t.n_max(); m <= t.n_max(); ++m)
    for (int k = 0; k < t.block_size(m); ++k) {
      cplx l = eigenvalue(c.params, m, k);
      if (std::abs(l.real()) <= 1e-12) {
        ++count;
        os << m << ',' << k << ',' << l.real() << ',' << l.imag() << '\n';
        std::cout << "asymptotic mode m=" << m << " k=" << k << " lambda=(" << l.real() + 0.0 << ", " << l.imag() + 0.0
                  << ")\n";
      }
    }
  std::cout << count << " zero-real-part modes; spectrum written to " << out.path("spectrum.csv").string() << "\n";
  return kOk;
}

int cmd_eigvecs(const RunConfig& c) {
  Outputs out(c);
  SpectralOptions opt{c.fault_flip_superdiag};
  SpectralDecomposition d = decompose(c.params, Truncation(c.n_max), opt);
  auto os = out.open("eigvecs.csv");
  write_eigvecs_csv(os, d);
  std::cout << "case " << to_string(d.tag()) << "; eigenvectors written to " << out.path("eigvecs.csv").string() << "\n";
  return kOk;
}

std::vector<cplx> a_factor_table(const ModelParams& p, const Truncation& tr, double t) {
  std::vector<cplx> f(tr.n_max());
  if (p.kappa2 > 0.0) {
    for (int k = 0; k < tr.n_max(); ++k) f[k] = annihilation_factor(p, k, t);
    return f;
  }
  FockState a(tr, annihilation(tr.dim()));
  FockState ah = heisenberg_phi(p, a, t);
  for (int k = 0; k < tr.n_max(); ++k) f[k] = ah.matrix()(k, k + 1) / std::sqrt(k + 1.0);
  return f;
}

int cmd_evolve(const RunConfig& c) {
  Outputs out(c);
  FockState rho0 = cli::initial_state(c);
  const Truncation& tr = rho0.truncation();
  std::vector<FockState> states;
  std::vector<Expectation> ex;
  for (double t : c.times) {
    states.push_back(propagate_phi(c.params, rho0, t));
    auto e = standard_expectations(t, states.back());
    ex.insert(ex.end(), e.begin(), e.end());
  }
  {
    auto os = out.open("evolution.csv");
    write_evolution_csv(os, c.times, states);
    auto oe = out.open("expectations.csv");
    write_expectations_csv(oe, ex);
  }
  if (c.oracle) {
    IntegratorConfig ic;
    ic.rtol = c.rtol;
    ic.atol = c.atol;
    Generator g(c.params);
    std::vector<FockState> ref;
    std::vector<Expectation> rex;
    double worst = 0.0;
    for (std::size_t i = 0; i < c.times.size(); ++i) {
      ref.push_back(ode_propagate(g, rho0, c.times[i], ic));
      auto e = standard_expectations(c.times[i], ref.back());
      rex.insert(rex.end(), e.begin(), e.end());
      worst = std::max(worst, relative_sup(states[i], ref.back()));
    }
    auto os = out.open("evolution_oracle.csv");
    write_evolution_csv(os, c.times, ref);
    auto oe = out.open("expectations_oracle.csv");
    write_expectations_csv(oe, rex);
    std::cout << "oracle max relative deviation " << worst << "\n";
  }
  if (c.heisenberg == "a") {
    auto os = out.open("heisenberg_a.csv");
    os << "t,k,re,im\n";
    os.precision(17);
    for (double t : c.times) {
      auto f = a_factor_table(c.params, tr, t);
      for (int k = 0; k < static_cast<int>(f.size()); ++k) os << t << ',' << k << ',' << f[k].real() << ',' << f[k].imag() << '\n';
    }
  }
  std::cout << "evolved " << c.times.size() << " times; output in " << c.out << "\n";
  return kOk;
}

int cmd_verify(const RunConfig& c) {
  Outputs out(c);
  VerifyOptions o;
  o.n_max = c.n_max;
  o.draws = c.draws;
  o.seed = c.seed;
  o.spectral.flip_superdiag_sign = c.fault_flip_superdiag;
  auto checks = run_verify(o);
  out.write_json("verify_report.json", to_json(checks));
  int failed = 0;
  for (const auto& ch : checks)
    if (!ch.pass) {
      ++failed;
      std::cout << "FAIL " << ch.check << " max_dev=" << ch.max_dev << " tol=" << ch.tolerance << "\n";
    }
  std::cout << checks.size() - failed << "/" << checks.size() << " checks passed (config_hash=" << out.hash() << ")\n";
  return failed ? kVerifyFailure : kOk;
}

int cmd_noise(const RunConfig& c) {
  Outputs out(c);
  FockState rho0 = cli::initial_state(c);
  NoiseConfig nc;
  nc.n_max = c.n_max;
  nc.ode.rtol = c.rtol;
  nc.ode.atol = c.atol;
  GridSpec gs;
  gs.automatic = c.grid == "auto";
  gs.J_max = c.J_max;
  gs.N_J = c.N_J;

  auto trace = cumulant_trace(c.params, rho0, c.noise_times, nc);
  {
    auto os = out.open("cumulants.csv");
    os << "t,k1,k2,k3,k4,excess_kurtosis,sweep_spread,stable\n";
    os.precision(17);
    for (const auto& s : trace)
      os << s.t << ',' << s.cumulants[0] << ',' << s.cumulants[1] << ',' << s.cumulants[2] << ',' << s.cumulants[3] << ','
         << s.excess_kurtosis << ',' << s.sweep_spread << ',' << (s.stable ? 1 : 0) << '\n';
  }

  bool gates_ok = true;
  nlohmann::json gate_report = nlohmann::json::array();
  for (double t : c.noise_times) {
    const std::string tag = fmt_time(t);
    try {
      NoiseRun run = run_noise(c.params, rho0, t, nc, gs);
      nlohmann::json j = to_json(run);
      j["config_hash"] = out.hash();
      out.write_json("noise_t" + tag + ".json", j);
      auto od = out.open("density_t" + tag + ".csv");
      write_density_csv(od, run);
      auto oz = out.open("z_t" + tag + ".csv");
      write_z_csv(oz, run);
      gate_report.push_back({{"t", t}, {"gates", j["gates"]}});
      gates_ok = gates_ok && run.gates.pass();
    } catch (const GateError& e) {
      gate_report.push_back({{"t", t}, {"error", e.what()}});
      gates_ok = false;
    }
  }
  out.write_json("gates.json", {{"config_hash", out.hash()}, {"runs", gate_report}});

  double peak = 0.0;
  for (const auto& s : trace) {
    peak = std::max(peak, std::abs(s.excess_kurtosis));
    std::cout << "t=" << s.t << " variance=" << s.cumulants[1] << " excess_kurtosis=" << s.excess_kurtosis << "\n";
  }
  if (!trace.empty()) {
    const double last = std::abs(trace.back().excess_kurtosis);
    const bool gaussian_final = last < 0.1;
    const bool transient = last > 0.0 ? peak >= 5.0 * last : peak > 0.0;
    std::cout << "gaussian_throughout=" << (peak < 0.05) << " transient_non_gaussian=" << transient
              << " final_gaussian=" << gaussian_final << "\n";
  }
  std::cout << "gates " << (gates_ok ? "pass" : "FAIL") << " (config_hash=" << out.hash() << ")\n";
  return gates_ok ? kOk : kGateFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kerrloss: Kerr oscillator with one- and two-body loss"};
  app.require_subcommand(1);
  Overrides ov;
  bool oracle = false, fault = false;
  std::string heis, initial, times, noise_times, grid;

  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues over all (m,k)");
  auto* eigvecs = app.add_subcommand("eigvecs", "left and right eigenvector dump");
  auto* evolve = app.add_subcommand("evolve", "closed-form time evolution");
  auto* verify = app.add_subcommand("verify", "seeded invariant suites, JSON report");
  auto* noise = app.add_subcommand("noise", "generating function, P(x) and cumulants");
  for (auto* cmd : {spectrum, eigvecs, evolve, verify, noise}) add_common(cmd, ov);

  auto bind = [&](CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(flag, [&ov, key](const std::string& v) { ov.values.emplace_back(key, v); }, help);
  };
  for (auto* cmd : {evolve, noise}) {
    bind(cmd, "--initial", "initial", "vacuum | fock | coherent | file");
    bind(cmd, "--fock-n", "fock_n", "Fock number for initial=fock");
    bind(cmd, "--alpha", "alpha_re", "coherent amplitude (real part)");
    bind(cmd, "--alpha-im", "alpha_im", "coherent amplitude (imaginary part)");
    bind(cmd, "--initial-file", "initial_file", "FockState JSON for initial=file");
  }
  bind(evolve, "--times", "times", "comma-separated output times");
  evolve->add_flag("--oracle", oracle, "also integrate the master equation numerically");
  evolve->add_option("--heisenberg", heis, "Heisenberg factor table for an observable (a)");
  bind(noise, "--noise-times", "noise_times", "comma-separated increasing times");
  bind(noise, "--grid", "grid", "auto | fixed");
  bind(noise, "--J-max", "J_max", "fixed-grid half width");
  bind(noise, "--N-J", "N_J", "fixed-grid point count (odd)");
  bind(verify, "--draws", "draws", "parameter draws per case");
  verify->add_flag("--fault-flip-superdiag", fault, "debug: flip the sign of the transformed superdiagonal");
  eigvecs->add_flag("--fault-flip-superdiag", fault, "debug: flip the sign of the transformed superdiagonal");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (oracle) ov.values.emplace_back("oracle", "true");
    if (fault) ov.values.emplace_back("fault_flip_superdiag", "true");
    if (!heis.empty()) ov.values.emplace_back("heisenberg", heis);
    RunConfig c = resolve(ov);
    if (*spectrum) return cmd_spectrum(c);
    if (*eigvecs) return cmd_eigvecs(c);
    if (*evolve) return cmd_evolve(c);
    if (*verify) return cmd_verify(c);
    if (*noise) return cmd_noise(c);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const CaseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const GateError& e) {
    std::cerr << "gate failure: " << e.what() << "\n";
    return kGateFailure;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kGateFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kValidation;
}
