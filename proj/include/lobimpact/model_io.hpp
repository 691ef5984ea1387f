#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "lobimpact/hawkes.hpp"
#include "lobimpact/lob_model.hpp"

namespace lobimpact {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kModelSchemaVersion = 1;

// Complete market model: kernels, transitions, and the Dirichlet volume model.
struct Model {
  HawkesParams params;
  TransitionMatrices phi;
  DirichletParams gamma;
  int n = 2;
  int K = 3;

  void validate() const;
};

// Serialises the market part (types 1..d_E) in the fixed field order
// schema_version, d_E, d_S, n, K, nu, alpha, beta, phi, gamma.
nlohmann::ordered_json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& doc);
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

// 64-bit FNV-1a digest as 16 hex digits; used to tag outputs with their configuration.
std::string config_hash(const std::string& text);

}  // namespace lobimpact
