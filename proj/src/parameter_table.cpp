#include "stomem/parameter_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stomem/builtin_data.hpp"

namespace stomem {

using nlohmann::json;

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::domain_error(what);
}

double lerp(double a, double b, double w) { return a + w * (b - a); }

double log_lerp(double a, double b, double w) {
  return std::exp(lerp(std::log(a), std::log(b), w));
}

double number_field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    throw std::invalid_argument("parameter table: missing numeric field '" + std::string(key) +
                                "' in " + where);
  }
  return it->get<double>();
}

}  // namespace

void SetDecayParams::validate() const {
  require(std::isfinite(g_steady) && g_steady >= 0.0, "SetDecayParams: g_steady must be >= 0");
  require(std::isfinite(delta_g) && delta_g >= 0.0, "SetDecayParams: delta_g must be >= 0");
  require(std::isfinite(gamma) && gamma >= 0.0, "SetDecayParams: gamma must be >= 0");
  require(tau1 > 0.0, "SetDecayParams: tau1 must be > 0");
  require(tau2 > 0.0, "SetDecayParams: tau2 must be > 0");
  require(beta > 0.0 && beta <= 1.0, "SetDecayParams: beta must lie in (0, 1]");
}

void OpticalDecayParams::validate() const {
  require(std::isfinite(delta_g) && delta_g >= 0.0, "OpticalDecayParams: delta_g must be >= 0");
  require(std::isfinite(gamma) && gamma >= 0.0, "OpticalDecayParams: gamma must be >= 0");
  require(tau1 > 0.0, "OpticalDecayParams: tau1 must be > 0");
  require(tau2 > 0.0, "OpticalDecayParams: tau2 must be > 0");
}

ParameterTable::ParameterTable(std::vector<BiasParams> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw std::invalid_argument("parameter table: no rows");
  std::sort(rows_.begin(), rows_.end(),
            [](const BiasParams& a, const BiasParams& b) { return a.bias < b.bias; });
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (i > 0 && rows_[i].bias == rows_[i - 1].bias) {
      throw std::invalid_argument("parameter table: duplicate bias row");
    }
    try {
      rows_[i].set.validate();
      rows_[i].opt.validate();
    } catch (const std::domain_error& e) {
      throw std::invalid_argument(std::string("parameter table: ") + e.what());
    }
    if (!(rows_[i].optical_baseline >= 0.0)) {
      throw std::invalid_argument("parameter table: optical baseline must be >= 0");
    }
  }
}

const ParameterTable& ParameterTable::builtin() {
  static const ParameterTable table =
      from_json(json::parse(builtin::kDefaultParametersJson));
  return table;
}

ParameterTable ParameterTable::from_json(const json& doc) {
  const json* rows = &doc;
  if (doc.is_object() && doc.contains("rows")) rows = &doc.at("rows");
  if (!rows->is_array()) {
    throw std::invalid_argument("parameter table: expected an array of bias rows");
  }
  std::vector<BiasParams> out;
  for (std::size_t i = 0; i < rows->size(); ++i) {
    const json& row = (*rows)[i];
    const std::string where = "row " + std::to_string(i);
    if (!row.is_object() || !row.contains("set") || !row.contains("opt")) {
      throw std::invalid_argument("parameter table: " + where + " needs 'set' and 'opt' objects");
    }
    BiasParams p;
    p.bias = number_field(row, "bias_V", where);
    const json& s = row.at("set");
    p.set.g_steady = number_field(s, "g_steady_nS", where + ".set");
    p.set.delta_g = number_field(s, "dg_nS", where + ".set");
    p.set.gamma = number_field(s, "gamma", where + ".set");
    p.set.tau1 = number_field(s, "tau1_s", where + ".set");
    p.set.tau2 = number_field(s, "tau2_s", where + ".set");
    p.set.beta = number_field(s, "beta", where + ".set");
    const json& o = row.at("opt");
    p.opt.delta_g = number_field(o, "dg_nS", where + ".opt");
    p.opt.gamma = number_field(o, "gamma", where + ".opt");
    p.opt.tau1 = number_field(o, "tau1_s", where + ".opt");
    p.opt.tau2 = number_field(o, "tau2_s", where + ".opt");
    p.optical_baseline =
        o.contains("g_steady_nS") ? number_field(o, "g_steady_nS", where + ".opt") : p.set.g_steady;
    out.push_back(p);
  }
  return ParameterTable(std::move(out));
}

ParameterTable ParameterTable::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("parameter table: cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::invalid_argument("parameter table: " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

BiasParams ParameterTable::at(double bias) const {
  if (std::isnan(bias)) throw std::domain_error("parameter table: bias is NaN");
  if (bias <= rows_.front().bias) return rows_.front();
  if (bias >= rows_.back().bias) return rows_.back();
  auto hi = std::lower_bound(rows_.begin(), rows_.end(), bias,
                             [](const BiasParams& r, double b) { return r.bias < b; });
  if (hi->bias == bias) return *hi;
  auto lo = hi - 1;
  const double w = (bias - lo->bias) / (hi->bias - lo->bias);

  BiasParams p;
  p.bias = bias;
  p.set.g_steady = lerp(lo->set.g_steady, hi->set.g_steady, w);
  p.set.delta_g = lerp(lo->set.delta_g, hi->set.delta_g, w);
  p.set.gamma = lerp(lo->set.gamma, hi->set.gamma, w);
  p.set.beta = lerp(lo->set.beta, hi->set.beta, w);
  p.set.tau1 = log_lerp(lo->set.tau1, hi->set.tau1, w);
  p.set.tau2 = log_lerp(lo->set.tau2, hi->set.tau2, w);
  p.opt.delta_g = lerp(lo->opt.delta_g, hi->opt.delta_g, w);
  p.opt.gamma = lerp(lo->opt.gamma, hi->opt.gamma, w);
  p.opt.tau1 = log_lerp(lo->opt.tau1, hi->opt.tau1, w);
  p.opt.tau2 = log_lerp(lo->opt.tau2, hi->opt.tau2, w);
  p.optical_baseline = lerp(lo->optical_baseline, hi->optical_baseline, w);
  return p;
}

json ParameterTable::to_json() const {
  json rows = json::array();
  for (const auto& r : rows_) {
    rows.push_back({{"bias_V", r.bias},
                    {"set",
                     {{"g_steady_nS", r.set.g_steady},
                      {"dg_nS", r.set.delta_g},
                      {"gamma", r.set.gamma},
                      {"tau1_s", r.set.tau1},
                      {"tau2_s", r.set.tau2},
                      {"beta", r.set.beta}}},
                    {"opt",
                     {{"g_steady_nS", r.optical_baseline},
                      {"dg_nS", r.opt.delta_g},
                      {"gamma", r.opt.gamma},
                      {"tau1_s", r.opt.tau1},
                      {"tau2_s", r.opt.tau2}}}});
  }
  return rows;
}

ParameterTable resolve_parameter_table(const std::string& explicit_path, std::string* source) {
  std::string path = explicit_path;
  if (path.empty()) {
    if (const char* env = std::getenv(std::string(kParamsEnvVar).c_str()); env && *env) path = env;
  }
  if (path.empty()) {
    if (source) *source = "builtin";
    return ParameterTable::builtin();
  }
  if (source) *source = path;
  return ParameterTable::from_file(path);
}

}  // namespace stomem
