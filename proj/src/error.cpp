#include "opcast/error.hpp"

namespace opcast {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::TomlSyntax: return "TomlSyntax";
    case Errc::BadConfig: return "BadConfig";
    case Errc::MissingGathering: return "MissingGathering";
    case Errc::BadContingency: return "BadContingency";
    case Errc::UnknownVariable: return "UnknownVariable";
    case Errc::BadBBox: return "BadBBox";
    case Errc::MissingModelPath: return "MissingModelPath";
    case Errc::KwargsSyntax: return "KwargsSyntax";
    case Errc::DuplicateKey: return "DuplicateKey";
    case Errc::UnresolvedReference: return "UnresolvedReference";
    case Errc::DanglingGridRef: return "DanglingGridRef";
    case Errc::BadDate: return "BadDate";
    case Errc::FetchFailed: return "FetchFailed";
    case Errc::NoFallbackDate: return "NoFallbackDate";
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::UnknownReader: return "UnknownReader";
    case Errc::BadGridFile: return "BadGridFile";
    case Errc::PortInUse: return "PortInUse";
    case Errc::BadFixture: return "BadFixture";
    case Errc::UnknownDatastoreClass: return "UnknownDatastoreClass";
    case Errc::InvalidGrid: return "InvalidGrid";
    case Errc::EmptyCrop: return "EmptyCrop";
    case Errc::MissingDate: return "MissingDate";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::UnknownTransform: return "UnknownTransform";
    case Errc::TransformFailed: return "TransformFailed";
    case Errc::DuplicateTransform: return "DuplicateTransform";
    case Errc::UnknownProcessingClass: return "UnknownProcessingClass";
    case Errc::BadArgument: return "BadArgument";
    case Errc::NotHourly: return "NotHourly";
    case Errc::NoPriorObservation: return "NoPriorObservation";
    case Errc::MissingDEM: return "MissingDEM";
    case Errc::UnknownFeature: return "UnknownFeature";
    case Errc::ZeroSigma: return "ZeroSigma";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::MissingTensor: return "MissingTensor";
    case Errc::NonFiniteWeight: return "NonFiniteWeight";
    case Errc::BadThresholds: return "BadThresholds";
    case Errc::BadProbability: return "BadProbability";
    case Errc::IoFailure: return "IoFailure";
    case Errc::GridTooLarge: return "GridTooLarge";
    case Errc::WindowTooLarge: return "WindowTooLarge";
    case Errc::EmptySample: return "EmptySample";
  }
  return "Unknown";
}

namespace {

std::string compose(Errc code, const std::string& subject, const std::string& detail) {
  std::string msg(to_string(code));
  if (!subject.empty()) msg += "(" + subject + ")";
  if (!detail.empty()) msg += ": " + detail;
  return msg;
}

}  // namespace

Error::Error(Errc code, std::string subject, const std::string& detail)
    : std::runtime_error(compose(code, subject, detail)), code_(code), subject_(std::move(subject)) {}

}  // namespace opcast
