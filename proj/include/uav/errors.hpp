#pragma once

#include <stdexcept>
#include <string>

namespace uav {

// Base class for all engine errors. Subclasses exist so callers and tests can
// distinguish failure categories without parsing messages; `kind()` feeds the
// CLI's structured error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg) : std::runtime_error(msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define UAV_DEFINE_ERROR(ClassName, kind_string)                        \
  class ClassName : public Error {                                      \
   public:                                                              \
    explicit ClassName(const std::string& msg) : Error(kind_string, msg) {} \
  }

UAV_DEFINE_ERROR(DimensionError, "dimension");
UAV_DEFINE_ERROR(NumericError, "numeric");
UAV_DEFINE_ERROR(GeometryError, "geometry");
UAV_DEFINE_ERROR(FormatError, "format");
UAV_DEFINE_ERROR(CorruptionError, "corruption");
UAV_DEFINE_ERROR(ConfigError, "config");
UAV_DEFINE_ERROR(PreconditionError, "precondition");
UAV_DEFINE_ERROR(IoError, "io");
UAV_DEFINE_ERROR(ParseError, "parse");
UAV_DEFINE_ERROR(ModalityError, "modality");
UAV_DEFINE_ERROR(DegenerateEmbeddingError, "degenerate-embedding");
UAV_DEFINE_ERROR(DegenerateSetError, "degenerate-set");

#undef UAV_DEFINE_ERROR

}  // namespace uav
