#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace opcast {

/// Every failure the pipeline can report by name.
enum class Errc {
  // config
  TomlSyntax,
  BadConfig,
  MissingGathering,
  BadContingency,
  UnknownVariable,
  BadBBox,
  MissingModelPath,
  KwargsSyntax,
  DuplicateKey,
  UnresolvedReference,
  DanglingGridRef,
  BadDate,
  // datastore
  FetchFailed,
  NoFallbackDate,
  FileNotFound,
  UnknownReader,
  BadGridFile,
  PortInUse,
  BadFixture,
  UnknownDatastoreClass,
  // grid
  InvalidGrid,
  EmptyCrop,
  MissingDate,
  GridMismatch,
  BadMagic,
  TruncatedPayload,
  // transform
  UnknownTransform,
  TransformFailed,
  DuplicateTransform,
  UnknownProcessingClass,
  BadArgument,
  NotHourly,
  NoPriorObservation,
  MissingDEM,
  UnknownFeature,
  ZeroSigma,
  // inference
  ShapeMismatch,
  MissingTensor,
  NonFiniteWeight,
  BadThresholds,
  BadProbability,
  // output
  IoFailure,
  GridTooLarge,
  WindowTooLarge,
  EmptySample,
};

std::string_view to_string(Errc code);

/// Exception carrying a named error code and the subject it concerns
/// (variable, tensor, transform, path ...).
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string subject, const std::string& detail = {});

  Errc code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }

  /// Set when this error wraps another one (e.g. TransformFailed).
  std::optional<Errc> cause() const noexcept { return cause_; }
  Error& with_cause(Errc cause) {
    cause_ = cause;
    return *this;
  }

 private:
  Errc code_;
  std::string subject_;
  std::optional<Errc> cause_;
};

}  // namespace opcast
