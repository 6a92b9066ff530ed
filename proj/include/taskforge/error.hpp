#pragma once

#include <stdexcept>
#include <string>

namespace taskforge {

// Base for every error raised by the library. Subclasses name the failing
// stage so callers (and the CLI) can map them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TASKFORGE_DEFINE_ERROR(Name)      \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

TASKFORGE_DEFINE_ERROR(IngestError);
TASKFORGE_DEFINE_ERROR(ValidationError);
TASKFORGE_DEFINE_ERROR(FixtureError);
TASKFORGE_DEFINE_ERROR(ParameterError);
TASKFORGE_DEFINE_ERROR(DimensionError);
TASKFORGE_DEFINE_ERROR(PaletteError);
TASKFORGE_DEFINE_ERROR(SamplerError);
TASKFORGE_DEFINE_ERROR(CodecError);
TASKFORGE_DEFINE_ERROR(ConfigError);
TASKFORGE_DEFINE_ERROR(TrainingError);
TASKFORGE_DEFINE_ERROR(MetricError);
TASKFORGE_DEFINE_ERROR(EvaluationError);
TASKFORGE_DEFINE_ERROR(IoError);

#undef TASKFORGE_DEFINE_ERROR

}  // namespace taskforge
