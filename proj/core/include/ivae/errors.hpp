#pragma once

#include <stdexcept>
#include <string>

namespace ivae {

// One exception type per contract violation; what() carries the diagnostic.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeMismatch : Error { using Error::Error; };
struct WrongMagic : Error { using Error::Error; };
struct TruncatedPayload : Error { using Error::Error; };
struct LabelOutOfRange : Error { using Error::Error; };
struct IoFailure : Error { using Error::Error; };
struct BadMagic : Error { using Error::Error; };
struct UnsupportedVersion : Error { using Error::Error; };
struct CorruptArray : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct WrongModelKind : Error { using Error::Error; };
struct UnsupportedKind : Error { using Error::Error; };
struct InsufficientPoints : Error { using Error::Error; };
struct NonPositiveValue : Error { using Error::Error; };
struct EmptyRequest : Error { using Error::Error; };
struct TapeConsumed : Error { using Error::Error; };
struct BernoulliTargetOutOfRange : Error { using Error::Error; };

}  // namespace ivae
