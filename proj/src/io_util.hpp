#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "skelact/error.hpp"

namespace skelact::detail {

using Json = nlohmann::ordered_json;

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed: " + path.string());
}

inline Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string(what) + ": invalid JSON: " + e.what());
  }
}

/// Fetches a required key, naming it in the error when absent.
inline const Json& need(const Json& obj, std::string_view key, std::string_view where) {
  if (!obj.is_object() || !obj.contains(key))
    throw Error(std::string(where) + ": missing key '" + std::string(key) + "'");
  return obj.at(key);
}

template <typename T>
T need_as(const Json& obj, std::string_view key, std::string_view where) {
  const Json& v = need(obj, key, where);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(std::string(where) + ": key '" + std::string(key) + "' has the wrong type");
  }
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
  return s;
}

}  // namespace skelact::detail
