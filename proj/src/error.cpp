#include "qfs/error.hpp"

namespace qfs {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnknownQuestionType: return "UnknownQuestionType";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::EmptyCollection: return "EmptyCollection";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::EmptyReferenceList: return "EmptyReferenceList";
    case ErrorCode::DuplicateInReturned: return "DuplicateInReturned";
    case ErrorCode::LambdaOutOfRange: return "LambdaOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MaskAllFalse: return "MaskAllFalse";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::UnknownDocument: return "UnknownDocument";
    case ErrorCode::ScorerInputMissing: return "ScorerInputMissing";
    case ErrorCode::NoIdealAnswer: return "NoIdealAnswer";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::EmptyCandidateList: return "EmptyCandidateList";
    case ErrorCode::TooFewQuestions: return "TooFewQuestions";
    }
    return "Unknown";
}

}  // namespace qfs
