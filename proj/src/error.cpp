#include "asymcity/error.hpp"

namespace asymcity {

ParameterError::ParameterError(const std::string& field, const std::string& what)
    : Error("invalid parameter '" + field + "': " + what), field_(field) {}

ParseError::ParseError(const std::string& path, const std::string& what)
    : Error("parse error at " + path + ": " + what), path_(path) {}

}  // namespace asymcity
