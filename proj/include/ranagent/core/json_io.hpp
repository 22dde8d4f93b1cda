#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace ranagent {

using Json = nlohmann::json;

// Fixed-point decimal with 6 fractional digits ("-0.000000" normalised to "0.000000").
std::string format_fixed6(double value);

// Serialises a document with sorted keys, no whitespace and every floating
// point number written with 6 fractional digits. Identical inputs produce
// identical bytes; used for all wire payloads, traces and golden files.
std::string canonical_dump(const Json& doc);

// 64-bit FNV-1a over the bytes of `text`.
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 0xcbf29ce484222325ULL);

// SplitMix64 finaliser; used to derive independent random sub-streams.
std::uint64_t mix64(std::uint64_t x);

std::string hex64(std::uint64_t value);

// Short hex digest of the canonical serialisation of `doc`.
std::string digest_of(const Json& doc);

// Typed field accessors that raise Error(invalid_argument) with a field path.
const Json& require(const Json& obj, std::string_view key, const std::string& path);
std::string require_string(const Json& obj, std::string_view key, const std::string& path);
double require_number(const Json& obj, std::string_view key, const std::string& path);
std::int64_t require_int(const Json& obj, std::string_view key, const std::string& path);

std::string join_path(const std::string& base, std::string_view key);
std::string index_path(const std::string& base, std::size_t index);

}  // namespace ranagent
