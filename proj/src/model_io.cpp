#include "qfric/medium.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace qfric {

namespace {

using nlohmann::json;

double number_field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DomainError(where + "." + key + ": missing");
  if (!it->is_number()) throw DomainError(where + "." + key + ": expected a number");
  return it->get<double>();
}

std::vector<LorentzOscillator> terms_field(const json& doc, const char* key) {
  std::vector<LorentzOscillator> out;
  auto it = doc.find(key);
  if (it == doc.end()) return out;
  if (!it->is_array()) throw DomainError(std::string(key) + ": expected an array");
  for (std::size_t i = 0; i < it->size(); ++i) {
    const json& t = (*it)[i];
    const std::string where = std::string(key) + "[" + std::to_string(i) + "]";
    if (!t.is_object()) throw DomainError(where + ": expected an object");
    LorentzOscillator o{number_field(t, "plasma_strength", where),
                        number_field(t, "resonance", where), number_field(t, "damping", where)};
    try {
      o.validate();
    } catch (const DomainError& e) {
      throw DomainError(where + ": " + e.what());
    }
    out.push_back(o);
  }
  return out;
}

json terms_json(const std::vector<LorentzOscillator>& terms) {
  json arr = json::array();
  for (const auto& t : terms)
    arr.push_back({{"plasma_strength", t.plasma_strength},
                   {"resonance", t.resonance},
                   {"damping", t.damping}});
  return arr;
}

}  // namespace

SusceptibilityModel parse_model_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DomainError(std::string("model: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw DomainError("model: expected a JSON object");
  SusceptibilityModel m;
  if (auto it = doc.find("label"); it != doc.end()) {
    if (!it->is_string()) throw DomainError("label: expected a string");
    m.label = it->get<std::string>();
  }
  m.electric_terms = terms_field(doc, "electric_terms");
  m.magnetic_terms = terms_field(doc, "magnetic_terms");
  return m;
}

SusceptibilityModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model_json(ss.str());
}

std::string model_to_json(const SusceptibilityModel& model) {
  json doc = {{"label", model.label},
              {"electric_terms", terms_json(model.electric_terms)},
              {"magnetic_terms", terms_json(model.magnetic_terms)}};
  return doc.dump();
}

}  // namespace qfric
