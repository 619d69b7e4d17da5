#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fcdata {

enum class ErrorCode {
    // corpus
    MalformedJson,
    MissingField,
    UnknownToolInAnswer,
    NonScalarArgument,
    UnsupportedType,
    NameMismatch,
    // scoring
    EmptyGroup,
    LengthMismatch,
    MissingPlan,
    // semantics
    EmptyInput,
    DimensionMismatch,
    ZeroVector,
    MissingEmbeddings,
    TooFewPoints,
    EmptyCluster,
    InvalidArgument,
    // diversity
    UnknownTool,
    UnknownParameter,
    // templates / augmentor / constructor
    MissingPlaceholderData,
    NoJsonFound,
    CheckerUnavailable,
    EmptyBuffer,
    UnparseableResponse,
    MalformedAnnotationRow,
    // gateway
    BackendUnavailable,
    AuthMissing,
    ScriptExhausted,
    // cli / config
    InvalidConfig,
    Io,
};

inline constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedJson: return "MalformedJson";
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::UnknownToolInAnswer: return "UnknownToolInAnswer";
        case ErrorCode::NonScalarArgument: return "NonScalarArgument";
        case ErrorCode::UnsupportedType: return "UnsupportedType";
        case ErrorCode::NameMismatch: return "NameMismatch";
        case ErrorCode::EmptyGroup: return "EmptyGroup";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::MissingPlan: return "MissingPlan";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::MissingEmbeddings: return "MissingEmbeddings";
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::EmptyCluster: return "EmptyCluster";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::UnknownTool: return "UnknownTool";
        case ErrorCode::UnknownParameter: return "UnknownParameter";
        case ErrorCode::MissingPlaceholderData: return "MissingPlaceholderData";
        case ErrorCode::NoJsonFound: return "NoJsonFound";
        case ErrorCode::CheckerUnavailable: return "CheckerUnavailable";
        case ErrorCode::EmptyBuffer: return "EmptyBuffer";
        case ErrorCode::UnparseableResponse: return "UnparseableResponse";
        case ErrorCode::MalformedAnnotationRow: return "MalformedAnnotationRow";
        case ErrorCode::BackendUnavailable: return "BackendUnavailable";
        case ErrorCode::AuthMissing: return "AuthMissing";
        case ErrorCode::ScriptExhausted: return "ScriptExhausted";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace fcdata
