#include "wbnmpc/rbd/model.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace wbnmpc::rbd {

using nlohmann::json;

int ModelSpec::contact_index(const std::string& contact_name) const {
  for (int i = 0; i < num_contacts(); ++i) {
    if (contact_points[i].name == contact_name) return i;
  }
  throw std::invalid_argument("unknown contact point: " + contact_name);
}

void ModelSpec::validate() const {
  if (bodies.empty() || joints.size() != bodies.size()) {
    throw std::invalid_argument("model: need one joint per body");
  }
  if (joints[0].type != JointType::FloatingPlanarBase || joints[0].parent != -1) {
    throw std::invalid_argument("model: joint 0 must be the floating base");
  }
  for (size_t i = 1; i < joints.size(); ++i) {
    if (joints[i].type != JointType::RevolutePlanar) {
      throw std::invalid_argument("model: only one floating base allowed");
    }
    if (joints[i].parent < 0 || joints[i].parent >= static_cast<int>(i)) {
      throw std::invalid_argument("model: joint parents must precede their body");
    }
  }
  for (const auto& b : bodies) {
    if (!(b.mass > 0.0)) throw std::invalid_argument("model: body mass must be > 0: " + b.name);
    if (!(b.inertia > 0.0)) throw std::invalid_argument("model: body inertia must be > 0: " + b.name);
  }
  std::set<std::string> names;
  for (const auto& c : contact_points) {
    if (c.body < 0 || c.body >= num_bodies()) {
      throw std::invalid_argument("model: contact body index out of range: " + c.name);
    }
    if (!names.insert(c.name).second) {
      throw std::invalid_argument("model: duplicate contact name: " + c.name);
    }
  }
  for (const auto& p : collision_pairs) {
    contact_index(p.left);
    contact_index(p.right);
    if (p.margin < 0.0) throw std::invalid_argument("model: collision margin must be >= 0");
  }
  const int nlim = nj();
  if (q_min.size() != nlim || q_max.size() != nlim || v_max.size() != nlim || tau_max.size() != nlim) {
    throw std::invalid_argument("model: limit vectors must have one entry per actuated joint");
  }
  for (int i = 0; i < nlim; ++i) {
    if (!(q_min[i] < q_max[i])) throw std::invalid_argument("model: q_min < q_max violated");
    if (!(v_max[i] > 0.0)) throw std::invalid_argument("model: v_max must be > 0");
    if (!(tau_max[i] > 0.0)) throw std::invalid_argument("model: tau_max must be > 0");
  }
}

namespace {

Eigen::Vector2d vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("model: expected a 2-vector");
  return {j[0].get<double>(), j[1].get<double>()};
}

Eigen::VectorXd vecn(const json& j) {
  Eigen::VectorXd out(j.size());
  for (size_t i = 0; i < j.size(); ++i) out[i] = j[i].get<double>();
  return out;
}

ModelSpec parse(const json& j) {
  ModelSpec m;
  m.name = j.value("name", "model");
  m.gravity = vec2(j.at("gravity"));
  for (const auto& jb : j.at("bodies")) {
    BodyParams b;
    b.name = jb.at("name").get<std::string>();
    b.mass = jb.at("mass").get<double>();
    b.com = vec2(jb.at("com"));
    b.inertia = jb.at("inertia").get<double>();
    m.bodies.push_back(b);
  }
  for (const auto& jj : j.at("joints")) {
    JointParams jp;
    const std::string type = jj.at("type").get<std::string>();
    if (type == "floating-planar-base") {
      jp.type = JointType::FloatingPlanarBase;
    } else if (type == "revolute-planar") {
      jp.type = JointType::RevolutePlanar;
    } else {
      throw std::invalid_argument("model: unknown joint type " + type);
    }
    jp.parent = jj.at("parent").get<int>();
    jp.placement = vec2(jj.at("placement"));
    jp.placement_angle = jj.value("placement_angle", 0.0);
    m.joints.push_back(jp);
  }
  for (const auto& jc : j.at("contact_points")) {
    ContactPoint c;
    c.name = jc.at("name").get<std::string>();
    c.body = jc.at("body").get<int>();
    c.offset = vec2(jc.at("offset"));
    m.contact_points.push_back(c);
  }
  if (j.contains("collision_pairs")) {
    for (const auto& jp : j.at("collision_pairs")) {
      const std::string kind = jp.value("kind", "foot-ordering");
      if (kind != "foot-ordering") throw std::invalid_argument("model: unknown collision kind " + kind);
      CollisionPair p;
      p.left = jp.at("left").get<std::string>();
      p.right = jp.at("right").get<std::string>();
      p.margin = jp.at("margin").get<double>();
      m.collision_pairs.push_back(p);
    }
  }
  const auto& lim = j.at("joint_limits");
  m.q_min = vecn(lim.at("q_min"));
  m.q_max = vecn(lim.at("q_max"));
  m.v_max = vecn(j.at("velocity_limit"));
  m.tau_max = vecn(j.at("torque_limit"));
  m.validate();
  return m;
}

}  // namespace

ModelSpec ModelSpec::from_json_text(const std::string& text) {
  return parse(json::parse(text));
}

ModelSpec ModelSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("model: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

bool State::valid_for(const ModelSpec& model) const {
  if (q.size() != model.nq() || v.size() != model.nv()) return false;
  return q.allFinite() && v.allFinite();
}

}  // namespace wbnmpc::rbd
