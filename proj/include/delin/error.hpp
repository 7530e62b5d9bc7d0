#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace delin {

enum class ErrorKind {
    domain,
    degenerate_geometry,
    insufficient_input,
    range_policy,
    implausible_geometry,
    geometry_mismatch,
    config,
    parse,
    version,
    join,
    io,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::domain: return "domain";
        case ErrorKind::degenerate_geometry: return "degenerate_geometry";
        case ErrorKind::insufficient_input: return "insufficient_input";
        case ErrorKind::range_policy: return "range_policy";
        case ErrorKind::implausible_geometry: return "implausible_geometry";
        case ErrorKind::geometry_mismatch: return "geometry_mismatch";
        case ErrorKind::config: return "config";
        case ErrorKind::parse: return "parse";
        case ErrorKind::version: return "version";
        case ErrorKind::join: return "join";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

// Single exception type for the library; `kind()` carries the category and,
// for sampled-geometry failures, `parameter()` the offending curve parameter.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what, std::optional<double> parameter = std::nullopt)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), parameter_(parameter) {}

    ErrorKind kind() const noexcept { return kind_; }
    std::optional<double> parameter() const noexcept { return parameter_; }

private:
    ErrorKind kind_;
    std::optional<double> parameter_;
};

}  // namespace delin
