#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lpreform {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI when reporting failures as JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& reason)
        : Error("ParseError", "line " + std::to_string(line) + ": " + reason), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class UnsupportedFeature : public Error {
public:
    explicit UnsupportedFeature(const std::string& what) : Error("UnsupportedFeature", what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("IoError", what) {}
};

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& what) : Error("DimensionMismatch", what) {}
};

class InvalidPermutation : public Error {
public:
    explicit InvalidPermutation(const std::string& what) : Error("InvalidPermutation", what) {}
};

class InvalidInstance : public Error {
public:
    explicit InvalidInstance(const std::string& what) : Error("InvalidInstance", what) {}
};

class RankDeficient : public Error {
public:
    explicit RankDeficient(std::size_t row)
        : Error("RankDeficient", "basis matrix is singular at row " + std::to_string(row)), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class NonOptimalStatus : public Error {
public:
    explicit NonOptimalStatus(const std::string& status)
        : Error("NonOptimalStatus", "solver finished with status " + status), status_(status) {}

    const std::string& status() const noexcept { return status_; }

private:
    std::string status_;
};

class InvalidK : public Error {
public:
    explicit InvalidK(const std::string& what) : Error("InvalidK", what) {}
};

class EmptyCluster : public Error {
public:
    explicit EmptyCluster(const std::string& what) : Error("EmptyCluster", what) {}
};

class NonFinite : public Error {
public:
    explicit NonFinite(const std::string& what) : Error("NonFinite", what) {}
};

class GraphCycle : public Error {
public:
    explicit GraphCycle(const std::string& what) : Error("GraphCycle", what) {}
};

class AllSolvesFailed : public Error {
public:
    explicit AllSolvesFailed(const std::string& what) : Error("AllSolvesFailed", what) {}
};

class TooManyPermutations : public Error {
public:
    explicit TooManyPermutations(const std::string& what) : Error("TooManyPermutations", what) {}
};

class GenerationFailed : public Error {
public:
    explicit GenerationFailed(const std::string& what) : Error("GenerationFailed", what) {}
};

class BadFractions : public Error {
public:
    explicit BadFractions(const std::string& what) : Error("BadFractions", what) {}
};

class CheckpointError : public Error {
public:
    explicit CheckpointError(const std::string& what) : Error("CheckpointError", what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("ConfigError", what) {}
};

}  // namespace lpreform
