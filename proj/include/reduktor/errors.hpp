// errors.hpp: error codes and the exception type shared by every module
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace reduktor {

enum class Errc {
    // input validation
    NotSquare,
    RowSumViolation,
    ColSumViolation,
    NegativeEntry,
    InvalidPartition,
    EmptySampleList,
    NonHermitianModel,
    NonUnitaryBasis,
    BlockIndexOutOfRange,
    KernelNormalizationViolation,
    NotCyclicOfOrderK,
    PeriodMismatch,
    InvalidArgument,
    // numerical failures
    DimensionTooLargeForExhaustive,
    GridTooCoarse,
    TailBoundExceedsTol,
    ValidationFailure,
    UnsupportedOrder,
    ValueEscape,
    NonRealReconstruction,
    // configuration / usage
    ConfigParse,
};

enum class ErrorKind { Usage, Validation, Numerical };

constexpr std::string_view errc_name(Errc c) noexcept {
    switch (c) {
    case Errc::NotSquare: return "NotSquare";
    case Errc::RowSumViolation: return "RowSumViolation";
    case Errc::ColSumViolation: return "ColSumViolation";
    case Errc::NegativeEntry: return "NegativeEntry";
    case Errc::InvalidPartition: return "InvalidPartition";
    case Errc::EmptySampleList: return "EmptySampleList";
    case Errc::NonHermitianModel: return "NonHermitianModel";
    case Errc::NonUnitaryBasis: return "NonUnitaryBasis";
    case Errc::BlockIndexOutOfRange: return "BlockIndexOutOfRange";
    case Errc::KernelNormalizationViolation: return "KernelNormalizationViolation";
    case Errc::NotCyclicOfOrderK: return "NotCyclicOfOrderK";
    case Errc::PeriodMismatch: return "PeriodMismatch";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DimensionTooLargeForExhaustive: return "DimensionTooLargeForExhaustive";
    case Errc::GridTooCoarse: return "GridTooCoarse";
    case Errc::TailBoundExceedsTol: return "TailBoundExceedsTol";
    case Errc::ValidationFailure: return "ValidationFailure";
    case Errc::UnsupportedOrder: return "UnsupportedOrder";
    case Errc::ValueEscape: return "ValueEscape";
    case Errc::NonRealReconstruction: return "NonRealReconstruction";
    case Errc::ConfigParse: return "ConfigParse";
    }
    return "Unknown";
}

constexpr ErrorKind errc_kind(Errc c) noexcept {
    switch (c) {
    case Errc::ConfigParse:
        return ErrorKind::Usage;
    case Errc::DimensionTooLargeForExhaustive:
    case Errc::GridTooCoarse:
    case Errc::TailBoundExceedsTol:
    case Errc::ValidationFailure:
    case Errc::UnsupportedOrder:
    case Errc::ValueEscape:
    case Errc::NonRealReconstruction:
        return ErrorKind::Numerical;
    default:
        return ErrorKind::Validation;
    }
}

// Process exit code contract: 1 usage/config, 2 input validation, 3 numerical.
constexpr int exit_code(ErrorKind k) noexcept {
    switch (k) {
    case ErrorKind::Usage: return 1;
    case ErrorKind::Validation: return 2;
    case ErrorKind::Numerical: return 3;
    }
    return 1;
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what, std::optional<std::size_t> index = std::nullopt,
          double magnitude = 0.0)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what),
          code_(code), index_(index), magnitude_(magnitude) {}

    Errc code() const noexcept { return code_; }
    ErrorKind kind() const noexcept { return errc_kind(code_); }
    // offending row/column/node, when there is one
    std::optional<std::size_t> index() const noexcept { return index_; }
    double magnitude() const noexcept { return magnitude_; }

private:
    Errc code_;
    std::optional<std::size_t> index_;
    double magnitude_;
};

} // namespace reduktor
