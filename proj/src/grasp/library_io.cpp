#include "neuromanip/error.hpp"
#include "neuromanip/grasp.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace nm::grasp {

namespace {

using nlohmann::json;

// Line on which each element of the top-level array starts.
std::vector<int> element_lines(std::string_view text) {
  std::vector<int> lines;
  int line = 1;
  int depth = 0;
  bool in_string = false;
  bool escape = false;
  bool expect_element = false;
  for (char c : text) {
    if (c == '\n') ++line;
    if (in_string) {
      if (escape) escape = false;
      else if (c == '\\') escape = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (depth == 1 && expect_element && c != ' ' && c != '\t' && c != '\r' && c != '\n' && c != ',' && c != ']') {
      lines.push_back(line);
      expect_element = false;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '[':
      case '{':
        if (++depth == 1) expect_element = true;
        break;
      case ']':
      case '}': --depth; break;
      case ',':
        if (depth == 1) expect_element = true;
        break;
      default: break;
    }
  }
  return lines;
}

}  // namespace

GraspLibrary parse_library(std::string_view json_text, const std::string& origin, int k_max) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::Validation, "grasp", origin + ": " + e.what());
  }
  if (!j.is_array()) throw Error(Errc::Validation, "grasp", origin + ":1: expected a JSON array of patterns");
  const auto lines = element_lines(json_text);

  GraspLibrary lib;
  lib.k_max = k_max;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    const std::string where =
        origin + ":" + std::to_string(i < lines.size() ? lines[i] : 0) + ": pattern[" + std::to_string(i) + "]";
    std::string field;
    try {
      if (!e.is_object()) throw Error(Errc::Validation, "grasp", where + ": expected an object");
      for (auto it = e.begin(); it != e.end(); ++it) {
        static const char* allowed[] = {"id", "label", "setpoints", "classes", "size_range", "prior"};
        if (std::find(std::begin(allowed), std::end(allowed), it.key()) == std::end(allowed)) {
          throw Error(Errc::Validation, "grasp", where + ": unknown field '" + it.key() + "'");
        }
      }
      GraspPattern p;
      field = "id";
      p.id = e.at(field).get<int>();
      field = "label";
      p.label = e.at(field).get<std::string>();
      p.gesture = signal::parse_gesture(p.label);
      field = "setpoints";
      const auto sp = e.at(field).get<std::vector<double>>();
      if (sp.size() != 6) throw Error(Errc::Validation, "grasp", where + ".setpoints: expected 6 values");
      std::copy(sp.begin(), sp.end(), p.setpoints.begin());
      field = "classes";
      p.classes = e.at(field).get<std::vector<std::string>>();
      for (const auto& c : p.classes)
        if (!scene::known_class(c)) throw Error(Errc::Validation, "grasp", where + ".classes: unknown class '" + c + "'");
      field = "size_range";
      const auto sr = e.at(field).get<std::vector<double>>();
      if (sr.size() != 2) throw Error(Errc::Validation, "grasp", where + ".size_range: expected [lo, hi]");
      p.size_lo = sr[0];
      p.size_hi = sr[1];
      field = "prior";
      p.prior = e.at(field).get<double>();
      // Per-pattern ranges here so the error carries the line.
      for (double v : p.setpoints)
        if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::Validation, "grasp", where + ".setpoints: values must lie in [0, 1]");
      if (!(p.size_lo < p.size_hi)) throw Error(Errc::Validation, "grasp", where + ".size_range: lo must be below hi");
      if (!(p.prior > 0.0 && p.prior <= 1.0)) throw Error(Errc::Validation, "grasp", where + ".prior: must be in (0, 1]");
      lib.patterns.push_back(std::move(p));
    } catch (const json::exception& ex) {
      throw Error(Errc::Validation, "grasp", where + "." + field + ": " + ex.what());
    }
  }
  try {
    validate(lib);
  } catch (const Error& ex) {
    throw Error(Errc::Validation, "grasp", origin + ": " + ex.detail());
  }
  return lib;
}

GraspLibrary load_library(const std::filesystem::path& path, int k_max) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "grasp", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_library(ss.str(), path.string(), k_max);
}

}  // namespace nm::grasp
