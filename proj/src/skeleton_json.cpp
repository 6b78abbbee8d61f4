#include "skeleton_json.hpp"

#include "json_fields.hpp"

namespace liftkit::detail {

nlohmann::json skeleton_to_json(const SkeletonSpec& spec) {
  for (const SkeletonSpec* builtin : {&h36m_17(), &eva_15()}) {
    if (spec == *builtin) return spec.name;
  }
  json j;
  j["name"] = spec.name;
  j["joint_count"] = spec.joint_count;
  j["root_index"] = spec.root_index;
  j["joint_names"] = spec.joint_names;
  j["parents"] = spec.parents;
  json pairs = json::array();
  for (const auto& [l, r] : spec.flip_pairs) pairs.push_back({l, r});
  j["flip_pairs"] = pairs;
  return j;
}

SkeletonSpec skeleton_from_json(const nlohmann::json& j, const std::string& context, ErrorKind kind) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "h36m_17") return h36m_17();
    if (name == "eva_15") return eva_15();
    throw Error(kind, context + ": unknown skeleton '" + name + "'");
  }
  FieldReader r(j, context + ".skeleton", kind);
  SkeletonSpec spec;
  spec.name = r.required<std::string>("name");
  spec.joint_count = r.required<std::size_t>("joint_count");
  r.optional("root_index", spec.root_index);
  r.optional("joint_names", spec.joint_names);
  r.optional("parents", spec.parents);
  if (r.has("flip_pairs")) {
    const auto& pairs = r.raw("flip_pairs");
    if (!pairs.is_array()) r.fail(context + ".skeleton: flip_pairs must be an array of [left, right]");
    for (const auto& p : pairs) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number_unsigned() || !p[1].is_number_unsigned()) {
        r.fail(context + ".skeleton: flip_pairs must be an array of [left, right] index pairs");
      }
      spec.flip_pairs.emplace_back(p[0].get<std::size_t>(), p[1].get<std::size_t>());
    }
  }
  r.finish();
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(kind, context + ": " + e.what());
  }
  return spec;
}

}  // namespace liftkit::detail
