#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "algoforge/errors.hpp"
#include "algoforge/json_io.hpp"

namespace af = algoforge;
using af::json;

namespace {

// Exit-code contract: 0 success/certified, 2 legitimate negative verdict,
// 1 usage or data error.
constexpr int kOk = 0;
constexpr int kErr = 1;
constexpr int kNegative = 2;

struct Flags {
  std::string problem, controller, mode = "full", out_dir = ".";
  std::string param, grid, x0 = "zero";
  std::uint64_t seed = 1;
  int steps = 200;
  int nu_max = 3;
  double tol_rho = 1e-3;
  bool nu_max_set = false, tol_rho_set = false;
};

// Summary numbers are printed as JSON tokens so each one matches the report.
std::string num(double v) { return json(v).dump(); }

double opt_num(const json& options, const char* key, double fallback) {
  return options.contains(key) ? options.at(key).get<double>() : fallback;
}

int opt_int(const json& options, const char* key, int fallback) {
  return options.contains(key) ? options.at(key).get<int>() : fallback;
}

class Report {
 public:
  Report(std::string command, const Flags& f) : out_dir_(f.out_dir) {
    body_["command"] = std::move(command);
    body_["verdicts"] = json::object();
    body_["certificates"] = json::object();
    body_["matrices"] = json::object();
    start_ = std::chrono::steady_clock::now();
  }

  json& verdicts() { return body_["verdicts"]; }
  json& certificates() { return body_["certificates"]; }
  json& matrices() { return body_["matrices"]; }
  json& body() { return body_; }

  void note(const std::string& line) { summary_ << line << '\n'; }

  int finish(int exit_code) {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    body_["timing"] = {
        {"seconds", std::chrono::duration<double>(elapsed).count()}};
    body_["exit_code"] = exit_code;
    std::filesystem::create_directories(out_dir_);
    const auto path = std::filesystem::path(out_dir_) / "report.json";
    af::save_json(body_, path.string());
    std::cout << summary_.str() << "report: " << path.string() << "\n";
    return exit_code;
  }

 private:
  json body_;
  std::ostringstream summary_;
  std::string out_dir_;
  std::chrono::steady_clock::time_point start_;
};

void write_file(const Flags& f, const std::string& name, const json& j,
                Report& rep) {
  std::filesystem::create_directories(f.out_dir);
  const auto path = std::filesystem::path(f.out_dir) / name;
  af::save_json(j, path.string());
  rep.note("wrote " + path.string());
}

af::RateOptions rate_options(const af::ProblemFile& pf, const Flags& f) {
  af::RateOptions ro;
  ro.rho_lo = opt_num(pf.options, "rho_lo", ro.rho_lo);
  ro.rho_hi = opt_num(pf.options, "rho_hi", ro.rho_hi);
  ro.tol = f.tol_rho_set ? f.tol_rho : opt_num(pf.options, "tol_rho", ro.tol);
  ro.nu_max = f.nu_max_set ? f.nu_max : opt_int(pf.options, "nu_max", ro.nu_max);
  return ro;
}

// Assumption audit plus the plant regulator solve shared by several verbs.
// Returns false (after recording the verdict) when the equations are
// infeasible.
bool regulator_stage(const af::ProblemFile& pf, Report& rep,
                     af::RegulatorSolution& reg) {
  const af::AssumptionReport audit =
      af::check_assumptions(pf.network, pf.cls.m, pf.consensus);
  rep.verdicts()["assumptions"] = af::to_json(audit);
  rep.note(std::string("assumptions: ") + (audit.all() ? "pass" : "FAIL"));
  try {
    reg = af::solve_plant_regulator(pf.network, pf.consensus);
  } catch (const af::Infeasible& e) {
    rep.verdicts()["plant_regulator_feasible"] = false;
    rep.verdicts()["plant_regulator_residual"] = e.residual;
    rep.note("plant regulator equation infeasible (residual " + num(e.residual) + ")");
    return false;
  }
  rep.verdicts()["plant_regulator_feasible"] = true;
  rep.verdicts()["plant_regulator_residual"] = reg.residual;
  rep.matrices()["pi"] = af::to_json(reg.pi);
  rep.matrices()["gamma"] = af::to_json(reg.gamma);
  rep.matrices()["phi"] = af::to_json(reg.phi);
  rep.note("plant regulator residual " + num(reg.residual));
  return true;
}

bool controller_regulator_stage(const af::StateSpace& k,
                                const af::RegulatorSolution& reg, Report& rep,
                                af::ControllerRegulator& creg) {
  try {
    creg = af::solve_controller_regulator(k, reg.phi, reg.gamma);
  } catch (const af::Infeasible& e) {
    rep.verdicts()["controller_regulator_feasible"] = false;
    rep.verdicts()["controller_regulator_residual"] = e.residual;
    rep.note("controller regulator equation infeasible (residual " +
             num(e.residual) + ")");
    return false;
  }
  rep.verdicts()["controller_regulator_feasible"] = true;
  rep.verdicts()["controller_regulator_residual"] = creg.residual;
  rep.matrices()["theta"] = af::to_json(creg.theta);
  rep.note("controller regulator residual " + num(creg.residual));
  return true;
}

int cmd_analyze(const Flags& f) {
  Report rep("analyze", f);
  const af::ProblemFile pf = af::load_problem(f.problem);
  const af::StateSpace k = af::load_controller(f.controller);

  af::RegulatorSolution reg;
  if (!regulator_stage(pf, rep, reg)) return rep.finish(kNegative);
  af::ControllerRegulator creg;
  if (!controller_regulator_stage(k, reg, rep, creg)) return rep.finish(kNegative);

  const af::StateSpace loop = af::close_controller(pf.network, k);
  rep.verdicts()["executable"] =
      af::is_block_lower_triangular(loop.d, pf.cls.s(), pf.cls.c);
  try {
    const af::Certificate cert = af::analyze_rate(loop, pf.cls, rate_options(pf, f));
    rep.certificates()["rate"] = af::to_json(cert);
    rep.verdicts()["certified"] = true;
    rep.verdicts()["rho"] = cert.rho;
    rep.note("certified rho " + num(cert.rho) + " (margin " + num(cert.margin) + ")");
    return rep.finish(kOk);
  } catch (const af::NeverCertified& e) {
    rep.verdicts()["certified"] = false;
    rep.verdicts()["deficit"] = e.deficit;
    rep.note(std::string("not certified: ") + e.what() + " (deficit " +
             num(e.deficit) + ")");
    return rep.finish(kNegative);
  }
}

int cmd_check_regulator(const Flags& f) {
  Report rep("check-regulator", f);
  const af::ProblemFile pf = af::load_problem(f.problem);
  af::RegulatorSolution reg;
  if (!regulator_stage(pf, rep, reg)) return rep.finish(kNegative);
  if (!f.controller.empty()) {
    const af::StateSpace k = af::load_controller(f.controller);
    af::ControllerRegulator creg;
    if (!controller_regulator_stage(k, reg, rep, creg)) return rep.finish(kNegative);
  }
  return rep.finish(kOk);
}

int cmd_order_bound(const Flags& f) {
  Report rep("order-bound", f);
  const af::ProblemFile pf = af::load_problem(f.problem);
  af::RegulatorSolution reg;
  if (!regulator_stage(pf, rep, reg)) return rep.finish(kNegative);
  const int r_info = opt_int(pf.options, "r_info", af::blt_info_rank(pf.cls));
  const int bound =
      af::order_bound(reg.gamma, reg.phi, r_info, pf.network.ny());
  rep.verdicts()["r_info"] = r_info;
  rep.verdicts()["order_bound"] = bound;
  rep.note("r_info " + std::to_string(r_info) + ", controller order bound " +
           std::to_string(bound));
  return rep.finish(kOk);
}

int cmd_factorize(const Flags& f) {
  Report rep("factorize", f);
  const af::ProblemFile pf = af::load_problem(f.problem);
  const af::StateSpace k = af::load_controller(f.controller);

  af::RegulatorSolution reg;
  if (!regulator_stage(pf, rep, reg)) return rep.finish(kNegative);
  af::ControllerRegulator creg;
  if (!controller_regulator_stage(k, reg, rep, creg)) return rep.finish(kNegative);

  af::FactorizationResult fac;
  try {
    fac = af::factorize(k, creg.theta, reg.gamma, reg.phi);
  } catch (const af::NotMinimal& e) {
    rep.verdicts()["minimal"] = false;
    rep.verdicts()["controllable"] = af::is_controllable(k.a, k.b);
    rep.verdicts()["observable"] = af::is_observable(k.a, k.c);
    rep.note(std::string("not minimal: ") + e.what());
    return rep.finish(kErr);
  }
  rep.verdicts()["minimal"] = true;
  rep.body()["factorization"] = af::to_json(fac);
  write_file(f, "sigma_min.json", af::to_json(fac.sigma_min), rep);
  write_file(f, "sigma_core.json", af::to_json(fac.sigma_core), rep);
  rep.note("internal model order " + std::to_string(fac.r) + ", core order " +
           std::to_string(fac.sigma_core.n()));

  // Cascade fidelity sampled off the unit circle.
  double gap = 0.0;
  const af::StateSpace casc = af::cascade(fac.sigma_min, fac.sigma_core);
  for (int i = 0; i < 7; ++i) {
    const std::complex<double> z =
        2.3 * std::exp(std::complex<double>(0.0, 0.9 * i + 0.3));
    gap = std::max(gap,
                   (af::transfer_at(k, z) - af::transfer_at(casc, z)).cwiseAbs().maxCoeff());
  }
  rep.verdicts()["cascade_gap"] = gap;
  rep.note("cascade transfer gap " + num(gap));

  try {
    const af::KroneckerSystem ks = af::kron_detect(k, pf.cls.c);
    const af::StaticCoreParams sp = af::static_core_identify(ks);
    json family = {{"b0", sp.b0},
                   {"b1", af::to_json(af::MatrixXd(sp.b1))},
                   {"b2", af::to_json(af::MatrixXd(sp.b2))}};
    rep.body()["static_family"] = family;
    rep.note("static core family: b0 " + num(sp.b0));
  } catch (const std::exception&) {
    rep.body()["static_family"] = nullptr;
  }
  return rep.finish(kOk);
}

int cmd_synthesize(const Flags& f) {
  Report rep("synthesize", f);
  const af::ProblemFile pf = af::load_problem(f.problem);

  af::SynthesisResult res;
  try {
    if (f.mode == "full") {
      af::AlternationOptions opts;
      opts.nu_max = f.nu_max_set ? f.nu_max : opt_int(pf.options, "nu_max", opts.nu_max);
      opts.rho_lo = opt_num(pf.options, "rho_lo", opts.rho_lo);
      opts.rho_hi = opt_num(pf.options, "rho_hi", opts.rho_hi);
      opts.max_iters = opt_int(pf.options, "max_iters", opts.max_iters);
      if (f.tol_rho_set) opts.bisect_tol = f.tol_rho;
      res = af::alternate_synthesis(pf.network, pf.cls, pf.info, opts);
    } else {
      af::RegulatorSolution reg;
      if (!regulator_stage(pf, rep, reg)) return rep.finish(kNegative);
      const int r = af::defect_basis(reg.phi).r;
      const int n_xi = opt_int(pf.options, "core_order", 0);
      const af::MatrixXd theta22 =
          af::MatrixXd::Zero(n_xi, pf.network.zw() - r);
      af::StructuredOptions opts;
      opts.nu_max = f.nu_max_set ? f.nu_max : opt_int(pf.options, "nu_max", opts.nu_max);
      opts.restarts = opt_int(pf.options, "restarts", opts.restarts);
      opts.simplex_iters = opt_int(pf.options, "simplex_iters", opts.simplex_iters);
      opts.seed = f.seed;
      const double rho = opt_num(pf.options, "rho", 0.95);
      res = af::structured_synthesis(pf.network, reg, theta22, pf.info, pf.cls,
                                     rho, opts);
    }
  } catch (const af::Infeasible& e) {
    rep.verdicts()["synthesized"] = false;
    rep.note("plant regulator equation infeasible (residual " + num(e.residual) + ")");
    return rep.finish(kNegative);
  } catch (const af::NotSynthesizable& e) {
    rep.verdicts()["synthesized"] = false;
    rep.note(std::string("not synthesizable: ") + e.what());
    return rep.finish(kNegative);
  } catch (const af::NotCertified& e) {
    rep.verdicts()["synthesized"] = false;
    rep.verdicts()["deficit"] = e.deficit;
    rep.note(std::string("not certified: ") + e.what());
    return rep.finish(kNegative);
  } catch (const af::SolverUnknown& e) {
    rep.verdicts()["synthesized"] = false;
    rep.note(std::string("solver could not reach a verdict: ") + e.what());
    return rep.finish(kNegative);
  }

  rep.verdicts()["synthesized"] = true;
  rep.verdicts()["rho"] = res.rho;
  rep.body()["synthesis"] = af::to_json(res);
  write_file(f, "controller.json", af::to_json(res.controller), rep);
  write_file(f, "subcontroller.json", af::to_json(res.subcontroller), rep);

  const af::StateSpace loop = af::close_controller(pf.network, res.controller);
  const af::CertifyOutcome out = af::antipassivity_certify(
      loop, pf.cls, res.rho, res.lambda.nu_max, af::CertifyMode::FixedLambda,
      &res.lambda);
  if (out.certified())
    rep.certificates()["rate"] = af::to_json(*out.certificate);
  rep.verdicts()["recertified"] = out.certified();

  std::ostringstream log;
  for (std::size_t i = 0; i < res.rho_log.size(); ++i)
    log << (i ? " " : "") << num(res.rho_log[i]);
  rep.note("certified rho " + num(res.rho) + " (trace: " + log.str() + ")");
  rep.note("regulator residual " + num(res.regulator_residual));
  return rep.finish(kOk);
}

af::VectorXd parse_x0(const std::string& spec, int n) {
  if (spec == "zero") return af::VectorXd::Zero(n);
  if (spec == "ones") return af::VectorXd::Ones(n);
  std::vector<double> vals;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      vals.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw af::MalformedProblem("--x0: '" + tok + "' is not a number");
    }
  }
  if (static_cast<int>(vals.size()) != n)
    throw af::MalformedProblem("--x0 needs " + std::to_string(n) +
                               " entries, got " + std::to_string(vals.size()));
  return Eigen::Map<af::VectorXd>(vals.data(), n);
}

int cmd_simulate(const Flags& f) {
  Report rep("simulate", f);
  const af::ProblemFile pf = af::load_problem(f.problem);
  if (pf.oracles.empty())
    throw af::MalformedProblem("simulate needs oracle instances in the problem file");
  const af::StateSpace k = af::load_controller(f.controller);
  const af::StateSpace loop = af::close_controller(pf.network, k);
  const af::AlgorithmSystem alg = af::make_algorithm(loop, pf.oracles, pf.cls);

  const af::VectorXd x0 = parse_x0(f.x0, loop.n());
  af::SimulateOptions so;
  so.steps = f.steps;
  const af::Trajectory traj = af::simulate(alg, x0, so);

  std::filesystem::create_directories(f.out_dir);
  const auto csv_path = std::filesystem::path(f.out_dir) / "trajectory.csv";
  {
    std::ofstream csv(csv_path);
    csv << "k";
    for (int i = 0; i < loop.n(); ++i) csv << ",x" << i;
    for (int i = 0; i < loop.inputs(); ++i) csv << ",w" << i;
    for (int i = 0; i < loop.outputs(); ++i) csv << ",z" << i;
    csv << "\n";
    csv.precision(17);
    for (int s = 0; s < traj.steps(); ++s) {
      csv << s;
      for (int i = 0; i < loop.n(); ++i) csv << "," << traj.x(s, i);
      for (int i = 0; i < loop.inputs(); ++i) csv << "," << traj.w(s, i);
      for (int i = 0; i < loop.outputs(); ++i) csv << "," << traj.z(s, i);
      csv << "\n";
    }
  }
  rep.note("wrote " + csv_path.string());

  bool have_fp = false;
  af::FixedPoint fp;
  try {
    fp = af::solve_fixed_point_quadratic(alg);
    have_fp = true;
  } catch (const std::exception&) {
  }

  const int c = pf.cls.c, s_blocks = pf.cls.s();
  const auto plot_path = std::filesystem::path(f.out_dir) / "plot_data.csv";
  {
    std::ofstream plot(plot_path);
    plot << "k,consensus_residual,optimality_residual";
    if (have_fp) plot << ",error_norm";
    plot << "\n";
    plot.precision(17);
    for (int step = 0; step < traj.steps(); ++step) {
      af::VectorXd zbar = af::VectorXd::Zero(c), wsum = af::VectorXd::Zero(c);
      for (int i = 0; i < s_blocks; ++i) {
        zbar += traj.z.row(step).segment(i * c, c).transpose();
        wsum += traj.w.row(step).segment(i * c, c).transpose();
      }
      zbar /= s_blocks;
      double cons = 0.0;
      for (int i = 0; i < s_blocks; ++i)
        cons = std::max(
            cons, (traj.z.row(step).segment(i * c, c).transpose() - zbar).norm());
      plot << step << "," << cons << "," << wsum.norm();
      if (have_fp)
        plot << "," << (traj.x.row(step).transpose() - fp.x).norm();
      plot << "\n";
    }
  }
  rep.note("wrote " + plot_path.string());

  rep.verdicts()["diverged"] = traj.diverged;
  rep.verdicts()["steps"] = traj.steps();
  if (traj.diverged) {
    rep.note("diverged at step " + std::to_string(traj.steps()));
    return rep.finish(kNegative);
  }
  if (have_fp) {
    const double err = (traj.x.bottomRows(1).transpose() - fp.x).norm();
    rep.verdicts()["final_error"] = err;
    rep.note("final error " + num(err));
  }
  return rep.finish(kOk);
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> grid;
  if (spec.empty()) return grid;
  if (spec.find(':') != std::string::npos) {
    double lo = 0.0, hi = 0.0;
    int n = 0;
    char c1 = 0, c2 = 0;
    std::istringstream ss(spec);
    if (!(ss >> lo >> c1 >> hi >> c2 >> n) || c1 != ':' || c2 != ':' || n < 0)
      throw af::MalformedProblem("--grid: expected lo:hi:count");
    for (int i = 0; i < n; ++i)
      grid.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
    return grid;
  }
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      grid.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw af::MalformedProblem("--grid: '" + tok + "' is not a number");
    }
  }
  return grid;
}

int cmd_sweep(const Flags& f) {
  Report rep("sweep", f);
  const af::ProblemFile pf = af::load_problem(f.problem);
  if (f.param.empty()) throw af::MalformedProblem("sweep needs --param");
  const std::vector<double> grid = parse_grid(f.grid);

  json rows = json::array();
  std::filesystem::create_directories(f.out_dir);
  const auto csv_path = std::filesystem::path(f.out_dir) / "sweep.csv";
  std::ofstream csv(csv_path);
  csv << "param,verdict,value\n";
  csv.precision(17);

  if (f.param == "gamma") {
    // Resolvent-step family u = x - gamma*y over the measurement channel,
    // closed against the linear elements at the lower sector slopes.
    const int ny = pf.network.ny();
    for (double g : grid) {
      const af::MatrixXd id = af::MatrixXd::Identity(ny, ny);
      const af::StateSpace k =
          af::make_state_space(id, -g * id, id, -g * id);
      const af::StateSpace loop = af::close_controller(pf.network, k);
      const double sr =
          af::spectral_radius(af::close_quadratic(loop, pf.cls.m, pf.cls.c));
      const bool stable = sr < 1.0;
      csv << g << "," << (stable ? "stable" : "unstable") << "," << sr << "\n";
      rows.push_back(json{{"param", g},
                          {"verdict", stable ? "stable" : "unstable"},
                          {"value", sr}});
    }
  } else if ((f.param[0] == 'm' || f.param[0] == 'L') && f.param.size() > 1) {
    const int idx = std::stoi(f.param.substr(1)) - 1;
    if (idx < 0 || idx >= pf.cls.s())
      throw af::MalformedProblem("--param: block index out of range");
    if (f.controller.empty())
      throw af::MalformedProblem("class sweeps need --controller");
    const af::StateSpace k = af::load_controller(f.controller);
    const af::StateSpace loop = af::close_controller(pf.network, k);
    for (double v : grid) {
      af::VectorXd m = pf.cls.m, l = pf.cls.L;
      (f.param[0] == 'm' ? m : l)(idx) = v;
      json row{{"param", v}};
      try {
        const af::OracleClass cls = af::make_oracle_class(m, l, pf.cls.c);
        const af::Certificate cert = af::analyze_rate(loop, cls, rate_options(pf, f));
        csv << v << ",certified," << cert.rho << "\n";
        row["verdict"] = "certified";
        row["value"] = cert.rho;
      } catch (const std::exception&) {
        csv << v << ",not-certified,\n";
        row["verdict"] = "not-certified";
        row["value"] = nullptr;
      }
      rows.push_back(std::move(row));
    }
  } else {
    throw af::MalformedProblem("--param must be gamma, m<i>, or L<i>");
  }

  rep.body()["rows"] = std::move(rows);
  rep.note("wrote " + csv_path.string() + " (" + std::to_string(grid.size()) +
           " grid points)");
  return rep.finish(kOk);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Represent first-order methods as system interconnections, execute them, "
      "check convergence, factorize, and synthesize certified designs. "
      "ALGOFORGE_THREADS caps parallel search probes."};
  app.require_subcommand(1);

  Flags f;
  auto add_common = [&](CLI::App* cmd, bool needs_controller) {
    cmd->add_option("--problem", f.problem, "problem JSON file")->required();
    auto* c = cmd->add_option("--controller", f.controller, "controller JSON file");
    if (needs_controller) c->required();
    cmd->add_option("--out-dir", f.out_dir, "output directory");
    return cmd;
  };

  auto* analyze = add_common(app.add_subcommand("analyze", "certify a given design"), true);
  analyze->add_option("--tol-rho", f.tol_rho, "rate bisection tolerance")
      ->each([&](const std::string&) { f.tol_rho_set = true; });
  analyze->add_option("--nu-max", f.nu_max, "multiplier depth")
      ->each([&](const std::string&) { f.nu_max_set = true; });

  add_common(app.add_subcommand("factorize", "split a controller into internal model and core"), true);

  auto* synth = add_common(app.add_subcommand("synthesize", "design a certified controller"), false);
  synth->add_option("--mode", f.mode, "full|structured")
      ->check(CLI::IsMember({"full", "structured"}));
  synth->add_option("--seed", f.seed, "search seed");
  synth->add_option("--tol-rho", f.tol_rho, "rate bisection tolerance")
      ->each([&](const std::string&) { f.tol_rho_set = true; });
  synth->add_option("--nu-max", f.nu_max, "multiplier depth")
      ->each([&](const std::string&) { f.nu_max_set = true; });

  auto* sim = add_common(app.add_subcommand("simulate", "execute the interconnection"), true);
  sim->add_option("--steps", f.steps, "iteration count");
  sim->add_option("--x0", f.x0, "initial state: zero, ones, or comma list");

  auto* sweep = add_common(app.add_subcommand("sweep", "grid a scalar parameter"), false);
  sweep->add_option("--param", f.param, "gamma, m<i>, or L<i>")->required();
  sweep->add_option("--grid", f.grid, "comma list or lo:hi:count");
  sweep->add_option("--tol-rho", f.tol_rho, "rate bisection tolerance")
      ->each([&](const std::string&) { f.tol_rho_set = true; });
  sweep->add_option("--nu-max", f.nu_max, "multiplier depth")
      ->each([&](const std::string&) { f.nu_max_set = true; });

  add_common(app.add_subcommand("check-regulator", "audit assumptions and regulator equations"), false);
  add_common(app.add_subcommand("order-bound", "controller order lower bound"), false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kErr;
  }

  try {
    if (app.got_subcommand("analyze")) return cmd_analyze(f);
    if (app.got_subcommand("factorize")) return cmd_factorize(f);
    if (app.got_subcommand("synthesize")) return cmd_synthesize(f);
    if (app.got_subcommand("simulate")) return cmd_simulate(f);
    if (app.got_subcommand("sweep")) return cmd_sweep(f);
    if (app.got_subcommand("check-regulator")) return cmd_check_regulator(f);
    if (app.got_subcommand("order-bound")) return cmd_order_bound(f);
  } catch (const af::MalformedProblem& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kErr;
  } catch (const af::NotMinimal& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kErr;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kErr;
  } catch (const af::Infeasible& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kNegative;
  } catch (const af::NeverCertified& e) {
    std::cerr << "not certified: " << e.what() << "\n";
    return kNegative;
  } catch (const af::NotCertified& e) {
    std::cerr << "not certified: " << e.what() << "\n";
    return kNegative;
  } catch (const af::NotSynthesizable& e) {
    std::cerr << "not synthesizable: " << e.what() << "\n";
    return kNegative;
  } catch (const af::WellPosednessViolated& e) {
    std::cerr << "not well posed: " << e.what() << "\n";
    return kNegative;
  } catch (const af::NonConvergent& e) {
    std::cerr << "non-convergent: " << e.what() << "\n";
    return kNegative;
  } catch (const af::SolverUnknown& e) {
    std::cerr << "solver verdict unknown: " << e.what() << "\n";
    return kNegative;
  } catch (const af::IllPosed& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kErr;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kErr;
  }
  return kErr;
}
