#pragma once

// Strict JSON object reading shared by config, checkpoint and data parsing.

#include <set>
#include <string>

#include "json.hpp"
#include "liftkit/error.hpp"

namespace liftkit::detail {

using nlohmann::json;

class FieldReader {
 public:
  FieldReader(const json& object, std::string context, ErrorKind kind = ErrorKind::config)
      : object_(object), context_(std::move(context)), kind_(kind) {
    if (!object_.is_object()) fail(context_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return object_.contains(key); }

  template <typename T>
  void optional(const std::string& key, T& out) {
    seen_.insert(key);
    if (!object_.contains(key)) return;
    out = get<T>(key);
  }

  template <typename T>
  T required(const std::string& key) {
    seen_.insert(key);
    if (!object_.contains(key)) fail(context_ + ": missing required key '" + key + "'");
    return get<T>(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return object_.at(key);
  }

  // Rejects any key that was never asked for.
  void finish() const {
    for (auto it = object_.begin(); it != object_.end(); ++it) {
      if (!seen_.count(it.key())) fail(context_ + ": unknown key '" + it.key() + "'");
    }
  }

  [[noreturn]] void fail(const std::string& what) const { throw Error(kind_, what); }

 private:
  template <typename T>
  T get(const std::string& key) const {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!object_.at(key).is_number_unsigned()) fail(context_ + ": key '" + key + "' must be a non-negative integer");
    }
    try {
      return object_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(context_ + ": key '" + key + "' has the wrong type");
    }
  }

  const json& object_;
  std::string context_;
  ErrorKind kind_;
  std::set<std::string> seen_;
};

}  // namespace liftkit::detail
