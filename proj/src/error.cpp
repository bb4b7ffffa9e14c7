#include "lsrlab/error.hpp"

namespace lsrlab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::WrongSlotCount: return "WrongSlotCount";
    case ErrorCode::BadSymbol: return "BadSymbol";
    case ErrorCode::DanglingContinuation: return "DanglingContinuation";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::EmptyChord: return "EmptyChord";
    case ErrorCode::DegenerateValues: return "DegenerateValues";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NotScalarRoot: return "NotScalarRoot";
    case ErrorCode::TapeConsumed: return "TapeConsumed";
    case ErrorCode::KeyMismatch: return "KeyMismatch";
    case ErrorCode::BadCheckpoint: return "BadCheckpoint";
    case ErrorCode::IndexOutOfVocab: return "IndexOutOfVocab";
    case ErrorCode::MissingTargets: return "MissingTargets";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::Io: return "Io";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::InfeasibleProfile: return "InfeasibleProfile";
    case ErrorCode::TrainingDiverged: return "TrainingDiverged";
  }
  return "Unknown";
}

}  // namespace lsrlab
