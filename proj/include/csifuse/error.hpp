#pragma once

#include <stdexcept>
#include <string>

namespace csifuse {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kSuccess = 0,
  kUsage = 2,
  kData = 3,
  kDivergence = 4,
};

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kData; }
};

#define CSIFUSE_DEFINE_ERROR(Name, Code)                               \
  class Name : public Error {                                          \
   public:                                                             \
    using Error::Error;                                                \
    ExitCode exit_code() const noexcept override { return Code; }      \
  }

// Input content problems.
CSIFUSE_DEFINE_ERROR(InputError, ExitCode::kData);
CSIFUSE_DEFINE_ERROR(ShapeError, ExitCode::kData);
CSIFUSE_DEFINE_ERROR(DataError, ExitCode::kData);
CSIFUSE_DEFINE_ERROR(ValidationError, ExitCode::kData);
CSIFUSE_DEFINE_ERROR(LabelError, ExitCode::kData);
CSIFUSE_DEFINE_ERROR(UnderdeterminedError, ExitCode::kData);

// File format problems.
CSIFUSE_DEFINE_ERROR(FormatError, ExitCode::kData);
CSIFUSE_DEFINE_ERROR(CorruptionError, ExitCode::kData);
CSIFUSE_DEFINE_ERROR(VersionError, ExitCode::kData);
CSIFUSE_DEFINE_ERROR(IoError, ExitCode::kData);

// Misuse of the API or the command line.
CSIFUSE_DEFINE_ERROR(StateError, ExitCode::kUsage);
CSIFUSE_DEFINE_ERROR(ModeError, ExitCode::kUsage);
CSIFUSE_DEFINE_ERROR(TapeError, ExitCode::kUsage);
CSIFUSE_DEFINE_ERROR(ConfigError, ExitCode::kUsage);
CSIFUSE_DEFINE_ERROR(UsageError, ExitCode::kUsage);

// Non-finite loss or gradient during optimisation.
CSIFUSE_DEFINE_ERROR(TrainingError, ExitCode::kDivergence);

#undef CSIFUSE_DEFINE_ERROR

}  // namespace csifuse
