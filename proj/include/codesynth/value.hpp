#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace codesynth {

// All structured text in the toolkit (corpus files, record files, the runner
// protocol, reports) is JSON. ordered_json keeps field order stable so
// emitted files are byte-reproducible.
using Json = nlohmann::ordered_json;

// The four value types carried between composed functions.
enum class ValueType { Int, Str, ListInt, ListStr };

// Exact external tags: "Int", "String", "List[Int]", "List[String]".
std::string to_string(ValueType t);

// Throws UnknownValueTypeError on any other tag. `entry` names the offending
// corpus entry in the error message.
ValueType parse_value_type(const std::string& tag, const std::string& entry);

constexpr ValueType kAllValueTypes[] = {ValueType::Int, ValueType::Str,
                                        ValueType::ListInt, ValueType::ListStr};

// Classifies a decoded interchange value. Returns nullopt for null and for
// anything outside the four types (bool, float, nested or mixed lists).
// An empty list matches both list types; it is reported as ListInt and
// matches_value_type() accepts it for either.
std::optional<ValueType> classify_value(const Json& v);

bool matches_value_type(const Json& v, ValueType t);

// True iff v is encodable in the interchange encoding: one of the four
// types, or null (a stage may output the language's null value).
bool is_interchange_value(const Json& v);

// Renders an interchange value as a source literal in the corpus language
// that evaluates back to the same value. null renders as None.
std::string py_literal(const Json& v);

}  // namespace codesynth
