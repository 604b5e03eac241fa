#pragma once

#include <stdexcept>
#include <string>

namespace ovp {

enum class Errc {
  MissingFile,
  BadMagic,
  DimensionMismatch,
  DanglingReference,
  InvalidData,
  InvalidConfig,
  EmptySampleSet,
  UnknownClassInTargets,
  OverlappingClassIds,
  EmptyPseudoLabelSet,
  IoFailure,
  ParseError,
  RangeError,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::MissingFile: return "MissingFile";
    case Errc::BadMagic: return "BadMagic";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DanglingReference: return "DanglingReference";
    case Errc::InvalidData: return "InvalidData";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::EmptySampleSet: return "EmptySampleSet";
    case Errc::UnknownClassInTargets: return "UnknownClassInTargets";
    case Errc::OverlappingClassIds: return "OverlappingClassIds";
    case Errc::EmptyPseudoLabelSet: return "EmptyPseudoLabelSet";
    case Errc::IoFailure: return "IoFailure";
    case Errc::ParseError: return "ParseError";
    case Errc::RangeError: return "RangeError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace ovp
