#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "algoforge/analysis.hpp"
#include "algoforge/factorization.hpp"
#include "algoforge/lti.hpp"
#include "algoforge/oracles.hpp"
#include "algoforge/regulation.hpp"
#include "algoforge/synthesis.hpp"

namespace algoforge {

using nlohmann::json;

// Matrices travel as row-major nested arrays; the empty matrix is []. Doubles
// round-trip bit-identically through dump/parse.
json to_json(const MatrixXd& m);
MatrixXd matrix_from_json(const json& j, const std::string& what);
VectorXd vector_from_json(const json& j, const std::string& what);

json to_json(const StateSpace& g);
StateSpace state_space_from_json(const json& j);

json to_json(const PartitionedPlant& p);
PartitionedPlant plant_from_json(const json& j);

// L entries may be the string "inf".
json to_json(const OracleClass& k);
OracleClass oracle_class_from_json(const json& j);

// Oracles are tagged unions: general_quadratic {q, beta0}, test_quadratic
// {m, b}, l1_ball {radius}, box {lo, hi}, scaled_l1 {weight}, zero {}.
json to_json(const BlockOracle& f);
BlockOracle oracle_from_json(const json& j);

json to_json(const FilterCoefficients& lam);
FilterCoefficients filter_from_json(const json& j);

json to_json(const Certificate& cert);
json to_json(const AssumptionReport& rep);
json to_json(const RegulatorSolution& sol);
json to_json(const FactorizationResult& f);
json to_json(const SynthesisResult& r);

// Parsed problem file: network (named builder or explicit matrices), oracle
// class, optional oracle instances, consensus choice, information mask, and a
// free-form options object. Dimensions are cross-checked before anything runs.
struct ProblemFile {
  PartitionedPlant network;
  OracleClass cls;
  std::vector<BlockOracle> oracles;  // empty or one per block
  MatrixXd consensus;
  InfoStructure info;
  json options;
};

ProblemFile parse_problem(const json& j);
ProblemFile load_problem(const std::string& path);
StateSpace load_controller(const std::string& path);

json load_json(const std::string& path);
void save_json(const json& j, const std::string& path);

}  // namespace algoforge
