#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace jpo {

enum class Errc {
  NoValidPairing,
  InvalidRecord,
  NonFiniteInput,
  InvalidBeta,
  EmptyBatch,
  UnknownToken,
  EmptySequence,
  InvalidTemperature,
  EmptyDataset,
  UnsupportedObjective,
  EmptyField,
  ParseFailure,
  JudgeUnavailable,
  LengthMismatch,
  IoFailure,
  EmptyOutcomes,
  SizeExceedsCorpus,
  InsufficientData,
  ConfigInvalid,
  MissingInput,
  CheckpointFormat,
};

std::string_view errc_name(Errc code) noexcept;

// All library failures surface as this exception; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace jpo
