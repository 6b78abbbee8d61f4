#pragma once

#include "json.hpp"
#include "liftkit/error.hpp"
#include "liftkit/skeleton.hpp"

namespace liftkit::detail {

// Built-ins serialize as their name, custom skeletons as a full object.
nlohmann::json skeleton_to_json(const SkeletonSpec& spec);

// Accepts a built-in name or an object; `kind` selects the error category.
SkeletonSpec skeleton_from_json(const nlohmann::json& j, const std::string& context, ErrorKind kind);

}  // namespace liftkit::detail
