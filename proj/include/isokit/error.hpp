#pragma once

#include <cstddef>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace isokit {

// Broad failure classes. The CLI maps these onto exit codes.
enum class ErrorKind {
    data,       // invalid or insufficient input data
    numerical,  // ill-conditioned or otherwise numerically unusable input
    contract,   // caller violated a precondition
    state,      // object used in the wrong state (e.g. inference before training)
    io,         // filesystem failures
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::data: return "data";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::contract: return "contract";
    case ErrorKind::state: return "state";
    case ErrorKind::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message)
        : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

    ErrorKind kind() const noexcept { return kind_; }
    // Stable machine-readable identifier, e.g. "ill_conditioned".
    const std::string& code() const noexcept { return code_; }

private:
    ErrorKind kind_;
    std::string code_;
};

// Data-validation failure, optionally pinned to a cell of a matrix or file.
class DataError : public Error {
public:
    DataError(std::string code, const std::string& message,
              std::optional<std::size_t> row = std::nullopt,
              std::optional<std::size_t> column = std::nullopt)
        : Error(ErrorKind::data, std::move(code), with_location(message, row, column)),
          row_(row), column_(column) {}

    std::optional<std::size_t> row() const noexcept { return row_; }
    std::optional<std::size_t> column() const noexcept { return column_; }

private:
    static std::string with_location(const std::string& message,
                                     std::optional<std::size_t> row,
                                     std::optional<std::size_t> column) {
        std::string out = message;
        if (row) out += " (row " + std::to_string(*row);
        if (row && column) out += ", column " + std::to_string(*column);
        if (!row && column) out += " (column " + std::to_string(*column);
        if (row || column) out += ")";
        return out;
    }

    std::optional<std::size_t> row_;
    std::optional<std::size_t> column_;
};

class NonFiniteError : public DataError {
public:
    NonFiniteError(std::size_t row, std::size_t column)
        : DataError("non_finite_entry", "non-finite entry", row, column) {}
};

class MalformedFileError : public DataError {
public:
    explicit MalformedFileError(const std::string& message,
                                std::optional<std::size_t> row = std::nullopt,
                                std::optional<std::size_t> column = std::nullopt)
        : DataError("malformed_file", message, row, column) {}
};

class DimensionMismatchError : public DataError {
public:
    explicit DimensionMismatchError(const std::string& message,
                                    std::optional<std::size_t> row = std::nullopt)
        : DataError("dimension_mismatch", message, row) {}
};

class InsufficientDataError : public DataError {
public:
    explicit InsufficientDataError(const std::string& message)
        : DataError("insufficient_data", message) {}
};

class IllConditionedError : public Error {
public:
    IllConditionedError(double smallest, double largest)
        : Error(ErrorKind::numerical, "ill_conditioned",
                "matrix is ill-conditioned: smallest eigenvalue " + format(smallest) +
                    " vs largest " + format(largest)),
          smallest_(smallest), largest_(largest) {}

    double smallest_eigenvalue() const noexcept { return smallest_; }
    double largest_eigenvalue() const noexcept { return largest_; }

private:
    static std::string format(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    double smallest_;
    double largest_;
};

class ContractError : public Error {
public:
    explicit ContractError(const std::string& message)
        : Error(ErrorKind::contract, "contract_violation", message) {}
};

class UninitializedCacheError : public Error {
public:
    UninitializedCacheError()
        : Error(ErrorKind::state, "uninitialized_cache",
                "moment cache has not seen a training batch") {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error(ErrorKind::io, "io_error", message) {}
};

}  // namespace isokit
