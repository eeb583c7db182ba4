#include "quantvar/error.hpp"

namespace qv {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::kParse: return "ParseError";
        case ErrorKind::kInsufficientData: return "InsufficientData";
        case ErrorKind::kInvalidArgument: return "InvalidArgument";
        case ErrorKind::kMissingCovariate: return "MissingCovariate";
        case ErrorKind::kInsufficientHistory: return "InsufficientHistory";
        case ErrorKind::kSingularDesign: return "SingularDesign";
        case ErrorKind::kEstimationFailure: return "EstimationFailure";
        case ErrorKind::kInvalidSplit: return "InvalidSplit";
        case ErrorKind::kValidation: return "ValidationError";
        case ErrorKind::kIo: return "IoError";
    }
    return "Error";
}

}  // namespace qv
