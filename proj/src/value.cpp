#include "codesynth/value.hpp"

#include <cstdio>

#include "codesynth/errors.hpp"

namespace codesynth {

std::string to_string(ValueType t) {
  switch (t) {
    case ValueType::Int:
      return "Int";
    case ValueType::Str:
      return "String";
    case ValueType::ListInt:
      return "List[Int]";
    case ValueType::ListStr:
      return "List[String]";
  }
  return "Int";
}

ValueType parse_value_type(const std::string& tag, const std::string& entry) {
  if (tag == "Int") return ValueType::Int;
  if (tag == "String") return ValueType::Str;
  if (tag == "List[Int]") return ValueType::ListInt;
  if (tag == "List[String]") return ValueType::ListStr;
  throw UnknownValueTypeError(entry, tag);
}

std::optional<ValueType> classify_value(const Json& v) {
  if (v.is_boolean()) return std::nullopt;
  if (v.is_number_integer()) return ValueType::Int;
  if (v.is_string()) return ValueType::Str;
  if (v.is_array()) {
    bool all_int = true;
    bool all_str = true;
    for (const auto& e : v) {
      if (!(e.is_number_integer() && !e.is_boolean())) all_int = false;
      if (!e.is_string()) all_str = false;
    }
    if (all_int) return ValueType::ListInt;
    if (all_str) return ValueType::ListStr;
    return std::nullopt;
  }
  return std::nullopt;
}

bool matches_value_type(const Json& v, ValueType t) {
  auto cls = classify_value(v);
  if (!cls) return false;
  if (*cls == t) return true;
  // [] classifies as ListInt but is a valid ListStr as well.
  if (v.is_array() && v.empty() &&
      (t == ValueType::ListInt || t == ValueType::ListStr))
    return true;
  return false;
}

bool is_interchange_value(const Json& v) {
  return v.is_null() || classify_value(v).has_value();
}

namespace {

void append_py_string(std::string& out, const std::string& s) {
  out += '\'';
  for (unsigned char c : s) {
    switch (c) {
      case '\\':
        out += "\\\\";
        break;
      case '\'':
        out += "\\'";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      case '\t':
        out += "\\t";
        break;
      default:
        if (c < 0x20 || c == 0x7f) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\x%02x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);  // UTF-8 bytes pass through
        }
    }
  }
  out += '\'';
}

}  // namespace

std::string py_literal(const Json& v) {
  if (v.is_null()) return "None";
  if (v.is_number_integer() && !v.is_boolean())
    return std::to_string(v.get<int64_t>());
  if (v.is_string()) {
    std::string out;
    append_py_string(out, v.get<std::string>());
    return out;
  }
  if (v.is_array()) {
    std::string out = "[";
    bool first = true;
    for (const auto& e : v) {
      if (!first) out += ", ";
      first = false;
      out += py_literal(e);
    }
    out += "]";
    return out;
  }
  throw SerializationError("value is not representable as a source literal");
}

}  // namespace codesynth
