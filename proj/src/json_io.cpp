#include "algoforge/json_io.hpp"

#include <cmath>
#include <fstream>

#include "algoforge/errors.hpp"

namespace algoforge {

namespace {

[[noreturn]] void bad(const std::string& msg) { throw MalformedProblem(msg); }

const json& member(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    bad(where + ": missing field '" + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& what) {
  if (!j.is_number()) bad(what + ": expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& what) {
  if (!j.is_number_integer()) bad(what + ": expected an integer");
  return j.get<int>();
}

}  // namespace

json to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) bad(what + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return MatrixXd(0, 0);
  if (!j[0].is_array()) bad(what + ": row 0 is not an array");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      bad(what + ": row " + std::to_string(i) + " has the wrong length");
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = number(row[static_cast<std::size_t>(k)],
                       what + "(" + std::to_string(i) + "," + std::to_string(k) + ")");
  }
  return m;
}

VectorXd vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) bad(what + ": expected an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = number(j[static_cast<std::size_t>(i)], what + "[" + std::to_string(i) + "]");
  return v;
}

json to_json(const StateSpace& g) {
  return json{{"a", to_json(g.a)}, {"b", to_json(g.b)}, {"c", to_json(g.c)},
              {"d", to_json(g.d)}};
}

StateSpace state_space_from_json(const json& j) {
  MatrixXd a = matrix_from_json(member(j, "a", "system"), "a");
  MatrixXd b = matrix_from_json(member(j, "b", "system"), "b");
  MatrixXd c = matrix_from_json(member(j, "c", "system"), "c");
  MatrixXd d = matrix_from_json(member(j, "d", "system"), "d");
  const auto n = a.rows();
  if (b.rows() == 0 && n > 0) b.resize(n, 0);
  if (c.cols() == 0 && n > 0) c = MatrixXd::Zero(d.rows(), n);
  if (b.cols() == 0 && d.cols() > 0) b = MatrixXd::Zero(n, d.cols());
  try {
    return make_state_space(a, b, c, d);
  } catch (const std::invalid_argument& e) {
    bad(std::string("system: ") + e.what());
  }
}

json to_json(const PartitionedPlant& p) {
  return json{{"a", to_json(p.a)},     {"b1", to_json(p.b1)},
              {"b2", to_json(p.b2)},   {"c1", to_json(p.c1)},
              {"d1", to_json(p.d1)},   {"d12", to_json(p.d12)},
              {"c2", to_json(p.c2)},   {"d21", to_json(p.d21)},
              {"d2", to_json(p.d2)},   {"s", p.s},
              {"c", p.c}};
}

PartitionedPlant plant_from_json(const json& j) {
  const int s = integer(member(j, "s", "network"), "network.s");
  const int c = integer(member(j, "c", "network"), "network.c");
  auto m = [&](const char* key) {
    return matrix_from_json(member(j, key, "network"), std::string("network.") + key);
  };
  MatrixXd a = m("a"), b1 = m("b1"), b2 = m("b2");
  MatrixXd c1 = m("c1"), d1 = m("d1"), d12 = m("d12");
  MatrixXd c2 = m("c2"), d21 = m("d21"), d2 = m("d2");
  const auto fix = [](MatrixXd& x, Eigen::Index rows, Eigen::Index cols) {
    if (x.size() == 0) x = MatrixXd::Zero(rows, cols);
  };
  const Eigen::Index n = a.rows(), zw = static_cast<Eigen::Index>(s) * c;
  const Eigen::Index nu = b2.cols() > 0 ? b2.cols() : d12.cols();
  const Eigen::Index ny = c2.rows() > 0 ? c2.rows() : d21.rows();
  fix(b1, n, zw);
  fix(b2, n, nu);
  fix(c1, zw, n);
  fix(d1, zw, zw);
  fix(d12, zw, nu);
  fix(c2, ny, n);
  fix(d21, ny, zw);
  fix(d2, ny, nu);
  try {
    return make_partitioned_plant(a, b1, b2, c1, d1, d12, c2, d21, d2, s, c);
  } catch (const std::invalid_argument& e) {
    bad(std::string("network: ") + e.what());
  }
}

json to_json(const OracleClass& k) {
  json l = json::array();
  for (Eigen::Index i = 0; i < k.L.size(); ++i) {
    if (std::isinf(k.L(i)))
      l.push_back("inf");
    else
      l.push_back(k.L(i));
  }
  json m = json::array();
  for (Eigen::Index i = 0; i < k.m.size(); ++i) m.push_back(k.m(i));
  return json{{"m", m}, {"L", l}, {"c", k.c}};
}

OracleClass oracle_class_from_json(const json& j) {
  const json& jm = member(j, "m", "class");
  const json& jl = member(j, "L", "class");
  if (!jm.is_array() || !jl.is_array() || jm.size() != jl.size())
    bad("class: m and L must be arrays of equal length");
  VectorXd m(static_cast<Eigen::Index>(jm.size())), l(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m(i) = number(jm[static_cast<std::size_t>(i)], "class.m");
    const json& li = jl[static_cast<std::size_t>(i)];
    if (li.is_string()) {
      if (li.get<std::string>() != "inf") bad("class.L: only the string \"inf\" is allowed");
      l(i) = kInf;
    } else {
      l(i) = number(li, "class.L");
    }
  }
  const int c = j.contains("c") ? integer(j.at("c"), "class.c") : 1;
  try {
    return make_oracle_class(m, l, c);
  } catch (const std::invalid_argument& e) {
    bad(std::string("class: ") + e.what());
  }
}

json to_json(const BlockOracle& f) {
  struct Visitor {
    json operator()(const GeneralQuadratic& g) const {
      return json{{"kind", "general_quadratic"}, {"q", to_json(g.q)},
                  {"beta0", to_json(MatrixXd(g.beta0))}};
    }
    json operator()(const TestQuadratic& g) const {
      return json{{"kind", "test_quadratic"}, {"m", g.m}, {"b", to_json(MatrixXd(g.b))}};
    }
    json operator()(const L1BallIndicator& g) const {
      return json{{"kind", "l1_ball"}, {"radius", g.radius}};
    }
    json operator()(const BoxIndicator& g) const {
      return json{{"kind", "box"}, {"lo", to_json(MatrixXd(g.lo))},
                  {"hi", to_json(MatrixXd(g.hi))}};
    }
    json operator()(const ScaledL1& g) const {
      return json{{"kind", "scaled_l1"}, {"weight", g.weight}};
    }
    json operator()(const ZeroOracle&) const { return json{{"kind", "zero"}}; }
  };
  return std::visit(Visitor{}, f);
}

namespace {

VectorXd column_from_json(const json& j, const std::string& what) {
  // Accept both a flat array and a one-column nested array.
  if (j.is_array() && !j.empty() && j[0].is_array()) {
    const MatrixXd m = matrix_from_json(j, what);
    if (m.cols() != 1) bad(what + ": expected a single column");
    return m.col(0);
  }
  return vector_from_json(j, what);
}

}  // namespace

BlockOracle oracle_from_json(const json& j) {
  const json& jk = member(j, "kind", "oracle");
  if (!jk.is_string()) bad("oracle.kind: expected a string tag");
  const std::string kind = jk.get<std::string>();
  if (kind == "general_quadratic")
    return GeneralQuadratic{matrix_from_json(member(j, "q", "oracle"), "oracle.q"),
                            column_from_json(member(j, "beta0", "oracle"), "oracle.beta0")};
  if (kind == "test_quadratic")
    return TestQuadratic{number(member(j, "m", "oracle"), "oracle.m"),
                         column_from_json(member(j, "b", "oracle"), "oracle.b")};
  if (kind == "l1_ball")
    return L1BallIndicator{number(member(j, "radius", "oracle"), "oracle.radius")};
  if (kind == "box")
    return BoxIndicator{column_from_json(member(j, "lo", "oracle"), "oracle.lo"),
                        column_from_json(member(j, "hi", "oracle"), "oracle.hi")};
  if (kind == "scaled_l1")
    return ScaledL1{number(member(j, "weight", "oracle"), "oracle.weight")};
  if (kind == "zero") return ZeroOracle{};
  bad("oracle.kind: unknown tag '" + kind + "'");
}

json to_json(const FilterCoefficients& lam) {
  return json{{"table", to_json(lam.lambda)}, {"nu_max", lam.nu_max}};
}

FilterCoefficients filter_from_json(const json& j) {
  FilterCoefficients lam;
  lam.lambda = matrix_from_json(member(j, "table", "filter"), "filter.table");
  lam.nu_max = integer(member(j, "nu_max", "filter"), "filter.nu_max");
  if (lam.lambda.cols() != lam.nu_max + 1)
    bad("filter: table must have nu_max + 1 columns");
  return lam;
}

json to_json(const Certificate& cert) {
  json trace = json::array();
  for (const auto& [rho, ok] : cert.trace)
    trace.push_back(json{{"rho", rho}, {"certified", ok}});
  return json{{"rho", cert.rho},
              {"margin", cert.margin},
              {"lambda", to_json(cert.lambda)},
              {"m", to_json(cert.lyapunov_m)},
              {"trace", std::move(trace)}};
}

json to_json(const AssumptionReport& rep) {
  return json{{"mean_nonzero", rep.mean_nonzero},
              {"loop_invertible", rep.loop_invertible},
              {"stabilizable", rep.stabilizable},
              {"detectable", rep.detectable},
              {"regulator_rank", rep.regulator_rank},
              {"composite_detectable", rep.composite_detectable},
              {"all", rep.all()}};
}

json to_json(const RegulatorSolution& sol) {
  return json{{"pi", to_json(sol.pi)},
              {"gamma", to_json(sol.gamma)},
              {"phi", to_json(sol.phi)},
              {"residual", sol.residual}};
}

json to_json(const FactorizationResult& f) {
  return json{{"sigma_min", to_json(f.sigma_min)},
              {"sigma_core", to_json(f.sigma_core)},
              {"r", f.r},
              {"theta12", to_json(f.theta12)},
              {"theta22", to_json(f.theta22)},
              {"r_basis", to_json(f.r_basis)},
              {"q_basis", to_json(f.q_basis)},
              {"gamma1", to_json(f.gamma1)},
              {"gamma2", to_json(f.gamma2)},
              {"phi2", to_json(f.phi2)}};
}

json to_json(const SynthesisResult& r) {
  return json{{"controller", to_json(r.controller)},
              {"subcontroller", to_json(r.subcontroller)},
              {"lambda", to_json(r.lambda)},
              {"rho", r.rho},
              {"mode", r.mode == SynthesisMode::Full ? "full" : "structured"},
              {"rho_log", r.rho_log},
              {"regulator_residual", r.regulator_residual},
              {"feedthrough_perturbation", r.feedthrough_perturbation},
              {"seed", r.seed}};
}

namespace {

PartitionedPlant network_from_json(const json& j, const OracleClass& cls) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "direct") return make_direct_plant(cls.s(), cls.c);
    bad("network: unknown builder '" + name + "'");
  }
  if (!j.is_object()) bad("network: expected a string or an object");
  if (j.contains("builder")) {
    const std::string name = j.at("builder").get<std::string>();
    if (name == "direct") return make_direct_plant(cls.s(), cls.c);
    if (name == "delay")
      return make_delay_network(integer(member(j, "h_z", "network"), "network.h_z"),
                                integer(member(j, "h_w", "network"), "network.h_w"),
                                cls.c);
    if (name == "channel")
      return make_channel_plant(number(member(j, "alpha", "network"), "network.alpha"),
                                integer(member(j, "h", "network"), "network.h"), cls.c);
    bad("network: unknown builder '" + name + "'");
  }
  return plant_from_json(j);
}

bool mask_is_blt(const Eigen::MatrixXi& mask) {
  if (mask.rows() != mask.cols()) return false;
  for (int i = 0; i < mask.rows(); ++i)
    for (int k = i + 1; k < mask.cols(); ++k)
      if (mask(i, k) != 0) return false;
  return true;
}

}  // namespace

ProblemFile parse_problem(const json& j) {
  if (!j.is_object()) bad("problem: expected a JSON object");
  ProblemFile pf;
  pf.cls = oracle_class_from_json(member(j, "class", "problem"));
  pf.network = network_from_json(member(j, "network", "problem"), pf.cls);
  if (pf.network.s != pf.cls.s() || pf.network.c != pf.cls.c)
    bad("problem: network is " + std::to_string(pf.network.s) + " blocks of width " +
        std::to_string(pf.network.c) + " but the class has " +
        std::to_string(pf.cls.s()) + " blocks of width " + std::to_string(pf.cls.c));

  if (j.contains("oracles")) {
    const json& jo = j.at("oracles");
    if (!jo.is_array()) bad("oracles: expected an array");
    for (const json& o : jo) pf.oracles.push_back(oracle_from_json(o));
    if (!pf.oracles.empty() &&
        static_cast<int>(pf.oracles.size()) != pf.cls.s())
      bad("oracles: expected one entry per block (" + std::to_string(pf.cls.s()) + ")");
  }

  if (j.contains("consensus") && !j.at("consensus").is_string()) {
    pf.consensus = matrix_from_json(j.at("consensus"), "consensus");
    try {
      validate_consensus(pf.consensus, pf.cls.s(), pf.cls.c);
    } catch (const std::invalid_argument& e) {
      bad(std::string("consensus: ") + e.what());
    }
  } else {
    pf.consensus = default_consensus(pf.cls.s(), pf.cls.c);
  }

  const int blocks = pf.cls.s();
  if (j.contains("info")) {
    const MatrixXd raw = matrix_from_json(j.at("info"), "info");
    if (raw.rows() != blocks || raw.cols() != blocks)
      bad("info: mask must be " + std::to_string(blocks) + "x" + std::to_string(blocks));
    pf.info.mask = (raw.array() != 0.0).cast<int>();
    pf.info.quad_invariance = mask_is_blt(pf.info.mask) ||
                              pf.info.mask.minCoeff() == 1;
  } else {
    pf.info = dense_info(blocks, blocks);
  }

  pf.options = j.contains("options") ? j.at("options") : json::object();
  if (!pf.options.is_object()) bad("options: expected an object");
  return pf;
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    bad(path + ": " + e.what());
  }
  return j;
}

ProblemFile load_problem(const std::string& path) { return parse_problem(load_json(path)); }

StateSpace load_controller(const std::string& path) {
  return state_space_from_json(load_json(path));
}

void save_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) bad("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace algoforge
