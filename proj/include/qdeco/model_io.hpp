#pragma once

// Model file schema (JSON), deterministic report serialization, and CSV
// emission for decay curves.

#include "qdeco/catalog.hpp"
#include "qdeco/dynamics.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace qdeco {

using Json = nlohmann::ordered_json;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Complex matrices as row-major arrays of [re, im] pairs

inline Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw IoError("matrix: expected a nonempty array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw IoError("matrix: ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Json& e = row.at(static_cast<std::size_t>(c));
      if (e.is_number()) {
        m(r, c) = e.get<double>();
      } else if (e.is_array() && e.size() == 2) {
        m(r, c) = Complex(e.at(0).get<double>(), e.at(1).get<double>());
      } else {
        throw IoError("matrix: entries must be numbers or [re, im] pairs");
      }
    }
  }
  return m;
}

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back(Json::array({m(r, c).real(), m(r, c).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Model documents

struct ParsedModel {
  BuiltModel built;
  std::string kind;              // "raw" or the builder kind
  double gamma = 0.0;            // builder rate when applicable
  std::optional<double> certified_alpha;  // proven MLSI constant, when known
};

inline ModelSpec model_spec_from_json(const Json& b) {
  ModelSpec spec;
  const std::string kind = b.at("kind").get<std::string>();
  spec.gamma = b.value("gamma", 1.0);
  if (kind == "deco") {
    spec.kind = ModelKind::Deco;
    spec.dim = b.at("dim").get<Eigen::Index>();
  } else if (kind == "depolarizing") {
    spec.kind = ModelKind::Depolarizing;
    spec.tau = matrix_from_json(b.at("tau"));
  } else if (kind == "diagonal_gamma") {
    spec.kind = ModelKind::DiagonalGamma;
    spec.gamma_matrix = matrix_from_json(b.at("gamma_matrix"));
  } else if (kind == "generic_conditional") {
    spec.kind = ModelKind::GenericConditional;
    for (const Json& blk : b.at("blocks"))
      spec.blocks.push_back({blk.at("dim_h").get<Eigen::Index>(),
                             matrix_from_json(blk.at("tau"))});
    if (b.contains("basis")) spec.block_basis = matrix_from_json(b.at("basis"));
  } else if (kind == "bipartite") {
    spec.kind = ModelKind::BipartiteFactor;
    spec.h_a = matrix_from_json(b.at("hamiltonian_a"));
    spec.inner = std::make_shared<ModelSpec>(model_spec_from_json(b.at("inner")));
  } else {
    throw IoError("unknown builder kind '" + kind + "'");
  }
  return spec;
}

/// Parses either a raw generator document or a builder document.
inline ParsedModel parse_model(const Json& doc) {
  if (!doc.is_object()) throw IoError("model: expected a JSON object");
  if (doc.value("schema", 1) != 1) throw IoError("model: unsupported schema version");
  ParsedModel out;
  if (doc.contains("builder")) {
    const Json& b = doc.at("builder");
    ModelSpec spec = model_spec_from_json(b);
    out.built = build_model(spec);
    out.kind = b.at("kind").get<std::string>();
    out.gamma = spec.gamma;
    // gamma (E - Id) semigroups satisfy EP >= gamma (D + D-bar) >= 2 (gamma/2) D_N.
    if (out.kind == "deco" || out.kind == "depolarizing" || out.kind == "generic_conditional")
      out.certified_alpha = 0.5 * spec.gamma;
    if (out.kind == "bipartite" && spec.inner && spec.inner->kind == ModelKind::Depolarizing)
      out.certified_alpha = 0.5 * spec.inner->gamma;
  } else {
    const Eigen::Index d = doc.at("dim").get<Eigen::Index>();
    Matrix h = doc.contains("hamiltonian") ? matrix_from_json(doc.at("hamiltonian"))
                                           : Matrix(Matrix::Zero(d, d));
    if (h.rows() != d) throw IoError("model: hamiltonian dimension disagrees with 'dim'");
    std::vector<Matrix> jumps;
    if (doc.contains("jumps"))
      for (const Json& j : doc.at("jumps")) jumps.push_back(matrix_from_json(j));
    out.built = BuiltModel{make_lindbladian(h, std::move(jumps)), std::nullopt};
    out.kind = "raw";
  }
  return out;
}

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  Json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("parse error in '" + path + "': " + e.what());
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Deterministic serialization (17 significant digits, fixed key order)

namespace detail {

inline void emit_json(const Json& j, std::string& out, int indent) {
  auto pad = [&](int n) { out.append(static_cast<std::size_t>(2 * n), ' '); };
  if (j.is_object()) {
    if (j.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) out += ",\n";
      first = false;
      pad(indent + 1);
      out += Json(it.key()).dump();
      out += ": ";
      emit_json(it.value(), out, indent + 1);
    }
    out += "\n";
    pad(indent);
    out += "}";
  } else if (j.is_array()) {
    if (j.empty()) {
      out += "[]";
      return;
    }
    out += "[";
    bool first = true;
    for (const auto& e : j) {
      if (!first) out += ", ";
      first = false;
      emit_json(e, out, indent);
    }
    out += "]";
  } else if (j.is_number_float()) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", j.get<double>());
    out += buf;
  } else {
    out += j.dump();
  }
}

}  // namespace detail

inline std::string dump_json_17(const Json& j) {
  std::string out;
  detail::emit_json(j, out, 0);
  out += "\n";
  return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
}

// ---------------------------------------------------------------------------
// CSV emission

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string curve_csv(const DecayCurve& curve, const BoundCurves& bounds) {
  std::ostringstream out;
  out << "t,trace_dist,df_variance,df_entropy,pi_bound,mlsi_bound";
  if (curve.has_mutual_info) out << ",mutual_info";
  out << "\n";
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    out << format_g17(curve.times[i]) << ',' << format_g17(curve.trace_dist[i]) << ','
        << format_g17(curve.df_variance[i]) << ',' << format_g17(curve.df_entropy[i]) << ','
        << format_g17(bounds.pi[i]) << ',' << format_g17(bounds.mlsi[i]);
    if (curve.has_mutual_info) out << ',' << format_g17(curve.mutual_info[i]);
    out << "\n";
  }
  return out.str();
}

inline std::string decotime_csv(const std::vector<DecoScalingRow>& rows) {
  std::ostringstream out;
  out << "d,g0,tau_empirical,tau_pi_bound,tau_mlsi_bound\n";
  for (const auto& r : rows)
    out << r.d << ',' << format_g17(r.g0) << ',' << format_g17(r.tau_empirical) << ','
        << format_g17(r.tau_pi_bound) << ',' << format_g17(r.tau_mlsi_bound) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Report fragments

inline Json spectrum_json(const Matrix& hermitian) {
  Json arr = Json::array();
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(hermitian));
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) arr.push_back(es.eigenvalues()(i));
  return arr;
}

inline Json structure_json(const BlockStructure& s) {
  Json blocks = Json::array();
  for (const auto& b : s.blocks) {
    Json blk;
    blk["dim_h"] = static_cast<long>(b.dim_h);
    blk["dim_k"] = static_cast<long>(b.dim_k);
    blk["p"] = b.p;
    blk["tau_eigenvalues"] = spectrum_json(b.tau);
    blocks.push_back(std::move(blk));
  }
  Json out;
  out["algebra_dim"] = static_cast<long>(s.algebra_dim());
  out["blocks"] = std::move(blocks);
  return out;
}

inline Json regularity_json(const RegularityReport& rep) {
  Json out;
  out["min_margin"] = rep.min_margin;
  out["violations"] = rep.violations;
  Json margins = Json::array();
  for (double m : rep.margins) margins.push_back(m);
  out["margins"] = std::move(margins);
  Json margins4 = Json::array();
  for (double m : rep.margins_dbc) margins4.push_back(m);
  out["margins_factor4"] = std::move(margins4);
  return out;
}

inline Json lp_regularity_json(const LpRegularityReport& rep) {
  Json rows = Json::array();
  for (const auto& r : rep.rows) {
    Json row;
    row["p"] = r.p;
    row["margin_strong"] = r.margin_strong;
    row["margin_weak"] = r.margin_weak;
    rows.push_back(std::move(row));
  }
  Json out;
  out["min_strong"] = rep.min_strong;
  out["violations_strong"] = rep.violations_strong;
  out["rows"] = std::move(rows);
  return out;
}

inline Json decotime_json(const DecoTimeResult& r) {
  Json out;
  out["epsilon"] = r.epsilon;
  out["tau_empirical"] = r.tau_empirical;
  out["tau_pi_bound"] = r.tau_pi_bound;
  out["tau_mlsi_bound"] = r.tau_mlsi_bound;
  out["sigma_min"] = r.sigma_min;
  return out;
}

}  // namespace qdeco
