#include "lobimpact/model_io.hpp"

#include <cstdio>
#include <fstream>

namespace lobimpact {

void Model::validate() const {
  params.validate();
  phi.validate(1e-9);
  gamma.validate();
  if (phi.d_E != params.d_E || phi.d_S != params.d_S)
    throw std::invalid_argument("transition matrices do not match the Hawkes parameters");
  if (params.d_S != 3 * K || gamma.K != K || gamma.n != n)
    throw std::invalid_argument("model dimensions are inconsistent (d_S must equal 3K)");
}

nlohmann::ordered_json model_to_json(const Model& m) {
  const auto& p = m.params;
  nlohmann::ordered_json doc;
  doc["schema_version"] = kModelSchemaVersion;
  doc["d_E"] = p.d_E;
  doc["d_S"] = p.d_S;
  doc["n"] = m.n;
  doc["K"] = m.K;
  auto nu = nlohmann::ordered_json::array();
  for (int e = 1; e <= p.d_E; ++e) nu.push_back(p.nu[e]);
  doc["nu"] = nu;
  auto alpha = nlohmann::ordered_json::array();
  auto beta = nlohmann::ordered_json::array();
  for (int src = 1; src <= p.d_E; ++src) {
    auto a_src = nlohmann::ordered_json::array();
    auto b_src = nlohmann::ordered_json::array();
    for (int x = 0; x < p.d_S; ++x) {
      auto a_row = nlohmann::ordered_json::array();
      auto b_row = nlohmann::ordered_json::array();
      for (int tgt = 1; tgt <= p.d_E; ++tgt) {
        a_row.push_back(p.a(src, x, tgt));
        b_row.push_back(p.b(src, x, tgt));
      }
      a_src.push_back(a_row);
      b_src.push_back(b_row);
    }
    alpha.push_back(a_src);
    beta.push_back(b_src);
  }
  doc["alpha"] = alpha;
  doc["beta"] = beta;
  auto phi = nlohmann::ordered_json::array();
  for (int e = 1; e <= p.d_E; ++e) {
    auto mat = nlohmann::ordered_json::array();
    for (int from = 0; from < p.d_S; ++from) {
      auto row = nlohmann::ordered_json::array();
      for (int to = 0; to < p.d_S; ++to) row.push_back(m.phi(e, from, to));
      mat.push_back(row);
    }
    phi.push_back(mat);
  }
  doc["phi"] = phi;
  doc["gamma"] = m.gamma.gamma;
  return doc;
}

Model model_from_json(const nlohmann::json& doc) {
  try {
    const int version = doc.at("schema_version").get<int>();
    if (version != kModelSchemaVersion)
      throw std::invalid_argument("unsupported model schema version " + std::to_string(version));
    Model m;
    const int d_E = doc.at("d_E").get<int>();
    const int d_S = doc.at("d_S").get<int>();
    m.n = doc.at("n").get<int>();
    m.K = doc.at("K").get<int>();
    m.params = HawkesParams(d_E, d_S);
    m.phi = TransitionMatrices(d_E, d_S);
    const auto& nu = doc.at("nu");
    const auto& alpha = doc.at("alpha");
    const auto& beta = doc.at("beta");
    const auto& phi = doc.at("phi");
    if (static_cast<int>(nu.size()) != d_E || static_cast<int>(alpha.size()) != d_E ||
        static_cast<int>(beta.size()) != d_E || static_cast<int>(phi.size()) != d_E)
      throw std::invalid_argument("model arrays do not match d_E");
    for (int e = 1; e <= d_E; ++e) m.params.nu[e] = nu[e - 1].get<double>();
    for (int src = 1; src <= d_E; ++src) {
      if (static_cast<int>(alpha[src - 1].size()) != d_S ||
          static_cast<int>(beta[src - 1].size()) != d_S)
        throw std::invalid_argument("kernel arrays do not match d_S");
      for (int x = 0; x < d_S; ++x) {
        const auto& a_row = alpha[src - 1][x];
        const auto& b_row = beta[src - 1][x];
        if (static_cast<int>(a_row.size()) != d_E || static_cast<int>(b_row.size()) != d_E)
          throw std::invalid_argument("kernel rows do not match d_E");
        for (int tgt = 1; tgt <= d_E; ++tgt) {
          m.params.a(src, x, tgt) = a_row[tgt - 1].get<double>();
          m.params.b(src, x, tgt) = b_row[tgt - 1].get<double>();
        }
      }
    }
    for (int e = 1; e <= d_E; ++e) {
      const auto& mat = phi[e - 1];
      if (static_cast<int>(mat.size()) != d_S)
        throw std::invalid_argument("transition matrix does not match d_S");
      for (int from = 0; from < d_S; ++from) {
        if (static_cast<int>(mat[from].size()) != d_S)
          throw std::invalid_argument("transition row does not match d_S");
        for (int to = 0; to < d_S; ++to) m.phi(e, from, to) = mat[from][to].get<double>();
      }
    }
    m.gamma.n = m.n;
    m.gamma.K = m.K;
    m.gamma.gamma = doc.at("gamma").get<std::vector<std::vector<double>>>();
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << model_to_json(model).dump(2) << '\n';
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open model file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("cannot parse " + path + ": " + e.what());
  }
  return model_from_json(doc);
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lobimpact
