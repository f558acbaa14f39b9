#include "neuromanip/error.hpp"
#include "neuromanip/scene.hpp"
#include "text.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace nm::scene {

namespace {

using nlohmann::json;

Vec3 vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::Validation, "scene", where + " must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) throw Error(Errc::Validation, "scene", where + ": unknown field '" + it.key() + "'");
  }
}

}  // namespace

Scene parse_scene(std::string_view json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::Validation, "scene", origin + ": " + e.what());
  }
  Scene scene;
  try {
    check_keys(j, {"camera", "objects"}, origin);
    if (j.contains("camera")) {
      const auto& c = j["camera"];
      check_keys(c, {"focal_px", "baseline_m", "width", "height"}, origin + ": camera");
      scene.camera.focal_px = c.value("focal_px", scene.camera.focal_px);
      scene.camera.baseline_m = c.value("baseline_m", scene.camera.baseline_m);
      scene.camera.width = c.value("width", scene.camera.width);
      scene.camera.height = c.value("height", scene.camera.height);
    }
    const auto& objs = j.at("objects");
    for (std::size_t i = 0; i < objs.size(); ++i) {
      const auto& o = objs[i];
      const std::string where = origin + ": objects[" + std::to_string(i) + "]";
      check_keys(o, {"id", "class", "aabb", "yaw", "grasp_size_m"}, where);
      SceneObject obj;
      obj.id = o.at("id").get<int>();
      obj.class_label = o.at("class").get<std::string>();
      obj.aabb.min = vec3(o.at("aabb").at("min"), where + ".aabb.min");
      obj.aabb.max = vec3(o.at("aabb").at("max"), where + ".aabb.max");
      obj.yaw = o.value("yaw", 0.0);
      obj.grasp_size_m = o.at("grasp_size_m").get<double>();
      scene.objects.push_back(std::move(obj));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::Validation, "scene", origin + ": " + e.what());
  }
  validate(scene);
  return scene;
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::SceneNotLoaded, "scene", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str(), path.string());
}

void save_scene(const std::filesystem::path& path, const Scene& scene) {
  json j;
  j["camera"] = {{"focal_px", scene.camera.focal_px},
                 {"baseline_m", scene.camera.baseline_m},
                 {"width", scene.camera.width},
                 {"height", scene.camera.height}};
  j["objects"] = json::array();
  for (const auto& o : scene.objects) {
    j["objects"].push_back({{"id", o.id},
                            {"class", o.class_label},
                            {"aabb", {{"min", o.aabb.min}, {"max", o.aabb.max}}},
                            {"yaw", o.yaw},
                            {"grasp_size_m", o.grasp_size_m}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "scene", "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<GazeSample> read_gaze_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "scene", "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != "t_us,ox,oy,oz,dx,dy,dz") {
    throw Error(Errc::Validation, "scene", path.string() + ":1: expected header 't_us,ox,oy,oz,dx,dy,dz'");
  }
  std::vector<GazeSample> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto fail = [&](const std::string& what) {
      throw Error(Errc::Validation, "scene", path.string() + ":" + std::to_string(lineno) + ": " + what);
    };
    const auto cols = text::split(line);
    if (cols.size() != 7) fail("expected 7 columns");
    GazeSample g;
    if (!text::parse(cols[0], g.timestamp_us)) fail("bad t_us");
    for (int a = 0; a < 3; ++a)
      if (!text::parse(cols[1 + a], g.origin[a])) fail("bad origin");
    Vec3 d{};
    for (int a = 0; a < 3; ++a)
      if (!text::parse(cols[4 + a], d[a])) fail("bad direction");
    try {
      g.dir = normalized(d);
    } catch (const Error&) {
      fail("zero-length direction");
    }
    out.push_back(g);
  }
  return out;
}

void write_gaze_csv(const std::filesystem::path& path, std::span<const GazeSample> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "scene", "cannot write " + path.string());
  out << "t_us,ox,oy,oz,dx,dy,dz\n";
  for (const auto& g : samples) {
    out << g.timestamp_us;
    for (double v : g.origin) out << ',' << text::fmt(v);
    for (double v : g.dir) out << ',' << text::fmt(v);
    out << '\n';
  }
}

}  // namespace nm::scene
