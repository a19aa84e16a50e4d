#pragma once

#include <stdexcept>
#include <string>

namespace mpeval {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// task-catalog
struct MalformedRecord : Error { using Error::Error; };
struct UnknownLabel : Error { using Error::Error; };
struct MissingSlot : Error { using Error::Error; };
struct SubsetTooLarge : Error { using Error::Error; };
struct MissingWorkedAnswer : Error { using Error::Error; };

// prompt-engine
struct MissingTemplate : Error { using Error::Error; };
struct UnboundPlaceholder : Error { using Error::Error; };
struct ExemplarTaskMismatch : Error { using Error::Error; };
struct InvalidOverride : Error { using Error::Error; };

// backend-gateway
struct TransportError : Error { using Error::Error; };
struct TimeoutError : Error { using Error::Error; };
struct AuthError : Error { using Error::Error; };
struct FixtureMiss : Error { using Error::Error; };

struct ProviderError : Error {
    int status;
    ProviderError(int status_code, const std::string& msg)
        : Error(msg), status(status_code) {}
};

// A per-sample failure inside complete_samples, annotated with the index.
struct SampleError : Error {
    int sample_index;
    SampleError(int index, const std::string& msg)
        : Error("sample " + std::to_string(index) + ": " + msg), sample_index(index) {}
};

// response-parser
struct ParseFailure : Error { using Error::Error; };
struct AmbiguousAnswer : Error { using Error::Error; };
struct ConfidenceOutOfRange : Error { using Error::Error; };

// scoring
struct NoParsableSamples : Error { using Error::Error; };
struct AlignmentError : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };

// analysis
struct InconsistentGroup : Error { using Error::Error; };
struct EmptyAnnotationSet : Error { using Error::Error; };
struct DivisionByZero : Error { using Error::Error; };

// orchestrator
struct ConfigError : Error { using Error::Error; };
struct ManifestMissing : Error { using Error::Error; };
struct DigestMismatch : Error { using Error::Error; };
struct IncompleteRun : Error { using Error::Error; };
struct CoverageGap : Error { using Error::Error; };

}  // namespace mpeval
