#include "ranagent/core/json_io.hpp"

#include <cmath>

#include <fmt/format.h>

#include "ranagent/core/errors.hpp"

namespace ranagent {

std::string format_fixed6(double value) {
  if (!std::isfinite(value)) return "0.000000";
  std::string text = fmt::format("{:.6f}", value);
  if (text == "-0.000000") text = "0.000000";
  return text;
}

namespace {

void write(const Json& node, std::string& out) {
  switch (node.type()) {
    case Json::value_t::object: {
      out.push_back('{');
      bool first = true;
      for (const auto& [key, value] : node.items()) {
        if (!first) out.push_back(',');
        first = false;
        out += Json(key).dump();
        out.push_back(':');
        write(value, out);
      }
      out.push_back('}');
      break;
    }
    case Json::value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& value : node) {
        if (!first) out.push_back(',');
        first = false;
        write(value, out);
      }
      out.push_back(']');
      break;
    }
    case Json::value_t::number_float:
      out += format_fixed6(node.get<double>());
      break;
    default:
      out += node.dump();
      break;
  }
}

}  // namespace

std::string canonical_dump(const Json& doc) {
  std::string out;
  write(doc, out);
  return out;
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed) {
  std::uint64_t hash = seed;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string hex64(std::uint64_t value) { return fmt::format("{:016x}", value); }

std::string digest_of(const Json& doc) { return hex64(fnv1a64(canonical_dump(doc))).substr(0, 12); }

std::string join_path(const std::string& base, std::string_view key) {
  if (base.empty()) return std::string(key);
  return base + "." + std::string(key);
}

std::string index_path(const std::string& base, std::size_t index) {
  return base + "[" + std::to_string(index) + "]";
}

const Json& require(const Json& obj, std::string_view key, const std::string& path) {
  const std::string field = join_path(path, key);
  if (!obj.is_object()) throw Error(Errc::invalid_argument, "expected an object", path);
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(Errc::invalid_argument, "missing field '" + field + "'", field);
  return *it;
}

std::string require_string(const Json& obj, std::string_view key, const std::string& path) {
  const Json& value = require(obj, key, path);
  if (!value.is_string()) {
    throw Error(Errc::invalid_argument, "field must be a string", join_path(path, key));
  }
  return value.get<std::string>();
}

double require_number(const Json& obj, std::string_view key, const std::string& path) {
  const Json& value = require(obj, key, path);
  if (!value.is_number()) {
    throw Error(Errc::invalid_argument, "field must be a number", join_path(path, key));
  }
  return value.get<double>();
}

std::int64_t require_int(const Json& obj, std::string_view key, const std::string& path) {
  const Json& value = require(obj, key, path);
  if (!value.is_number_integer()) {
    throw Error(Errc::invalid_argument, "field must be an integer", join_path(path, key));
  }
  return value.get<std::int64_t>();
}

}  // namespace ranagent
