#pragma once

#include <stdexcept>
#include <string>

namespace dlmac {

enum class ErrorKind {
    parse,
    insufficient_data,
    empty_output,
    dimension,
    degenerate_data,
    divergence,
    checksum,
    schema,
    config,
    io,
    missing_input,  ///< an upstream artifact (trace, dataset, model) is absent
    model_mismatch, ///< a model was trained under different settings than the run uses
};

const char* to_string(ErrorKind kind);

/// Base class for every error the library raises. `kind()` is stable and
/// machine-readable; the CLI prints it verbatim.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

#define DLMAC_DEFINE_ERROR(Name, Kind)                                                   \
    class Name : public Error {                                                          \
    public:                                                                              \
        explicit Name(const std::string& message) : Error(ErrorKind::Kind, message) {}   \
    };

DLMAC_DEFINE_ERROR(InsufficientDataError, insufficient_data)
DLMAC_DEFINE_ERROR(EmptyOutputError, empty_output)
DLMAC_DEFINE_ERROR(DimensionError, dimension)
DLMAC_DEFINE_ERROR(DegenerateDataError, degenerate_data)
DLMAC_DEFINE_ERROR(ChecksumError, checksum)
DLMAC_DEFINE_ERROR(SchemaError, schema)
DLMAC_DEFINE_ERROR(ConfigError, config)
DLMAC_DEFINE_ERROR(IoError, io)
DLMAC_DEFINE_ERROR(MissingInputError, missing_input)
DLMAC_DEFINE_ERROR(ModelMismatchError, model_mismatch)

#undef DLMAC_DEFINE_ERROR

class DivergenceError : public Error {
public:
    DivergenceError(std::size_t epoch, const std::string& message)
        : Error(ErrorKind::divergence, "epoch " + std::to_string(epoch) + ": " + message),
          epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

} // namespace dlmac
