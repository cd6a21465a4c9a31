#include "tlsinv/error.hpp"

namespace tlsinv {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidRecord: return "InvalidRecord";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::SingularUpdate: return "SingularUpdate";
    case ErrorCode::NoGroundData: return "NoGroundData";
    case ErrorCode::FitFailed: return "FitFailed";
    case ErrorCode::EmptyCylinder: return "EmptyCylinder";
    case ErrorCode::NoTreePoints: return "NoTreePoints";
    case ErrorCode::InvalidHeight: return "InvalidHeight";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace tlsinv
