#pragma once

// Skeleton description files. Layout is documented in docs/skeleton-format.md.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gaitdyn/skeleton.hpp"

namespace gaitdyn {

namespace detail {

inline nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

inline Vec3 json_vec(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw SchemaError(std::string(what) + " must be a 3-element list");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline JointType parse_joint_type(const std::string& s) {
  if (s == "free") return JointType::Free;
  if (s == "revolute") return JointType::Revolute;
  if (s == "prismatic") return JointType::Prismatic;
  throw SchemaError("unknown joint type '" + s + "'");
}

}  // namespace detail

inline nlohmann::json skeleton_to_json(const Skeleton& skel) {
  using nlohmann::json;
  json bodies = json::array();
  for (const auto& b : skel.bodies()) {
    json inertia = json::array();
    for (int r = 0; r < 3; ++r)
      inertia.push_back({b.inertia(r, 0), b.inertia(r, 1), b.inertia(r, 2)});
    bodies.push_back({
        {"name", b.name},
        {"joint",
         {{"name", b.joint.name},
          {"type", to_string(b.joint.type)},
          {"parent", b.joint.parent < 0 ? json(nullptr)
                                        : json(skel.bodies()[b.joint.parent].name)},
          {"offset", detail::vec_json(b.joint.offset)},
          {"axis", detail::vec_json(b.joint.axis)}}},
        {"mass", b.mass},
        {"com", detail::vec_json(b.com_offset)},
        {"inertia", inertia},
        {"scale", detail::vec_json(b.scale)},
    });
  }
  json markers = json::array();
  for (const auto& m : skel.markers())
    markers.push_back({{"name", m.name},
                       {"body", skel.bodies()[m.body].name},
                       {"offset", detail::vec_json(m.offset)}});
  json contacts = json::array();
  for (int c : skel.contact_bodies()) contacts.push_back(skel.bodies()[c].name);
  return {{"format", "gaitdyn-skeleton"},
          {"version", 1},
          {"name", skel.name()},
          {"gravity", detail::vec_json(skel.gravity())},
          {"height_m", skel.height()},
          {"mass_kg", skel.nominal_mass()},
          {"bodies", bodies},
          {"markers", markers},
          {"contacts", contacts}};
}

inline Skeleton skeleton_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "gaitdyn-skeleton" || j.at("version") != 1)
      throw SchemaError("not a version 1 gaitdyn-skeleton document");
    std::vector<Body> bodies;
    auto find_body = [&](const std::string& name) {
      for (std::size_t i = 0; i < bodies.size(); ++i)
        if (bodies[i].name == name) return static_cast<int>(i);
      throw SchemaError("reference to undefined body '" + name + "'");
    };
    for (const auto& jb : j.at("bodies")) {
      Body b;
      b.name = jb.at("name").get<std::string>();
      const auto& jj = jb.at("joint");
      b.joint.name = jj.at("name").get<std::string>();
      b.joint.type = detail::parse_joint_type(jj.at("type").get<std::string>());
      b.joint.parent = jj.at("parent").is_null()
                           ? -1
                           : find_body(jj.at("parent").get<std::string>());
      b.joint.offset = detail::json_vec(jj.at("offset"), "joint offset");
      b.joint.axis = detail::json_vec(jj.at("axis"), "joint axis");
      b.mass = jb.at("mass").get<double>();
      b.com_offset = detail::json_vec(jb.at("com"), "com");
      const auto& ji = jb.at("inertia");
      if (!ji.is_array() || ji.size() != 3)
        throw SchemaError("inertia must be a 3x3 nested list");
      for (int r = 0; r < 3; ++r)
        b.inertia.row(r) = detail::json_vec(ji[r], "inertia row").transpose();
      b.scale = detail::json_vec(jb.at("scale"), "scale");
      bodies.push_back(std::move(b));
    }
    std::vector<MarkerDef> markers;
    for (const auto& jm : j.at("markers"))
      markers.push_back({jm.at("name").get<std::string>(),
                         find_body(jm.at("body").get<std::string>()),
                         detail::json_vec(jm.at("offset"), "marker offset")});
    std::vector<int> contacts;
    for (const auto& jc : j.at("contacts"))
      contacts.push_back(find_body(jc.get<std::string>()));
    return Skeleton(j.at("name").get<std::string>(), std::move(bodies),
                    std::move(markers), std::move(contacts),
                    detail::json_vec(j.at("gravity"), "gravity"),
                    j.at("height_m").get<double>(), j.at("mass_kg").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("skeleton document: ") + e.what());
  } catch (const InputError& e) {
    throw SchemaError(std::string("skeleton document: ") + e.what());
  }
}

inline Skeleton load_skeleton(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open skeleton file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 0);
  }
  return skeleton_from_json(j);
}

inline void save_skeleton(const Skeleton& skel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write skeleton file " + path);
  out << skeleton_to_json(skel).dump(2) << "\n";
}

}  // namespace gaitdyn
