#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qv {

enum class ErrorKind {
    kParse,
    kInsufficientData,
    kInvalidArgument,
    kMissingCovariate,
    kInsufficientHistory,
    kSingularDesign,
    kEstimationFailure,
    kInvalidSplit,
    kValidation,
    kIo,
};

[[nodiscard]] std::string_view to_string(ErrorKind kind) noexcept;

/// Base exception for every failure raised by the library. The kind is a
/// stable machine-readable tag used by the CLI's error records.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : Error(ErrorKind::kParse, file + ":" + std::to_string(line) + ": " + what),
          file_(file), line_(line) {}

    [[nodiscard]] const std::string& file() const noexcept { return file_; }
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

/// Thrown by estimators that fail to converge. Carries the last iterate so
/// callers can log or reuse it.
class EstimationFailure : public Error {
public:
    explicit EstimationFailure(const std::string& message, std::vector<double> last_iterate = {})
        : Error(ErrorKind::kEstimationFailure, message), last_iterate_(std::move(last_iterate)) {}

    [[nodiscard]] const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

private:
    std::vector<double> last_iterate_;
};

}  // namespace qv
