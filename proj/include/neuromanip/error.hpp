#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nm {

enum class Errc {
  UnsupportedSampleRate,
  NonMonotonicTimestamps,
  StreamTooShort,
  DurationTooShort,
  InsufficientData,
  DivergedLoss,
  DimensionMismatch,
  EmptyCalibration,
  ShapeMismatch,
  ModelNotLoaded,
  NonPositiveDisparity,
  SceneNotLoaded,
  NoApplicableGrasp,
  EmptyCandidates,
  DatasetContextMismatch,
  CalibrationFailed,
  EmptyBench,
  MissingTrial,
  EmptyInput,
  PortInUse,
  Validation,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

// Single exception type for the library. `module()` names the subsystem that
// raised it so harness errors can be reported with their origin.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string_view module, const std::string& what)
      : std::runtime_error(std::string(module) + ": " + std::string(errc_name(code)) +
                           (what.empty() ? "" : ": " + what)),
        code_(code),
        module_(module),
        detail_(what) {}

  Errc code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }
  // The message without the module and code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string module_;
  std::string detail_;
};

}  // namespace nm
