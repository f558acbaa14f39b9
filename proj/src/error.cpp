#include "neuromanip/error.hpp"

namespace nm {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::UnsupportedSampleRate: return "UnsupportedSampleRate";
    case Errc::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case Errc::StreamTooShort: return "StreamTooShort";
    case Errc::DurationTooShort: return "DurationTooShort";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::DivergedLoss: return "DivergedLoss";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyCalibration: return "EmptyCalibration";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::ModelNotLoaded: return "ModelNotLoaded";
    case Errc::NonPositiveDisparity: return "NonPositiveDisparity";
    case Errc::SceneNotLoaded: return "SceneNotLoaded";
    case Errc::NoApplicableGrasp: return "NoApplicableGrasp";
    case Errc::EmptyCandidates: return "EmptyCandidates";
    case Errc::DatasetContextMismatch: return "DatasetContextMismatch";
    case Errc::CalibrationFailed: return "CalibrationFailed";
    case Errc::EmptyBench: return "EmptyBench";
    case Errc::MissingTrial: return "MissingTrial";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::PortInUse: return "PortInUse";
    case Errc::Validation: return "Validation";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace nm
