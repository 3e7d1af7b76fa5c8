#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ldwr {

/// Invalid configuration: bad flag values, pools too small, datasets that
/// cannot serve the requested episode shape.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A class ended up with no descriptors to build a prototype or pool from.
class DegenerateClassError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Threshold statistics requested over fewer than two values.
class DegenerateStatisticsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed descriptor, parameter or report file.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          detail_(what),
          offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }
    /// The message without the offset suffix.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string detail_;
    std::uint64_t offset_;
};

}  // namespace ldwr
