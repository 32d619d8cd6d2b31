#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "dlsim/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary artifact layout assumes a little-endian host");

namespace dlsim::detail {

inline void write_u64(std::ostream& out, std::uint64_t value) {
    char buffer[sizeof(value)];
    std::memcpy(buffer, &value, sizeof(value));
    out.write(buffer, sizeof(value));
}

inline void write_i64(std::ostream& out, std::int64_t value) {
    write_u64(out, static_cast<std::uint64_t>(value));
}

inline void write_f64(std::ostream& out, double value) {
    char buffer[sizeof(value)];
    std::memcpy(buffer, &value, sizeof(value));
    out.write(buffer, sizeof(value));
}

inline std::uint64_t read_u64(std::istream& in, const std::string& context) {
    char buffer[sizeof(std::uint64_t)];
    if (!in.read(buffer, sizeof(buffer))) {
        throw ArtifactError(context + ": file truncated");
    }
    std::uint64_t value;
    std::memcpy(&value, buffer, sizeof(value));
    return value;
}

inline std::int64_t read_i64(std::istream& in, const std::string& context) {
    return static_cast<std::int64_t>(read_u64(in, context));
}

inline double read_f64(std::istream& in, const std::string& context) {
    char buffer[sizeof(double)];
    if (!in.read(buffer, sizeof(buffer))) {
        throw ArtifactError(context + ": file truncated");
    }
    double value;
    std::memcpy(&value, buffer, sizeof(value));
    return value;
}

}  // namespace dlsim::detail
