#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qfs {

enum class ErrorCode {
    MalformedInput,
    DuplicateId,
    UnknownQuestionType,
    IoError,
    EmptyCorpus,
    EmptyCollection,
    EmptyList,
    EmptyReferenceList,
    DuplicateInReturned,
    LambdaOutOfRange,
    DimensionMismatch,
    InvalidArgument,
    MaskAllFalse,
    EmptySequence,
    EmptyDataset,
    NonFiniteLoss,
    KindMismatch,
    UnknownDocument,
    ScorerInputMissing,
    NoIdealAnswer,
    NoCandidates,
    EmptyCandidateList,
    TooFewQuestions,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map them onto exit statuses.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

}  // namespace qfs
