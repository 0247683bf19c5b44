#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nsv {


using Vec = std::vector<double>;

/// Dense row-major matrix, sized for the small systems this library works
/// with (state dims <= 4, net layers <= 256).
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

// ---------------------------------------------------------------------------
// Error taxonomy. CLI exit codes: 2 validation, 3 runtime, 4 provenance.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    Error(int exit_code, const std::string& msg) : std::runtime_error(msg), exit_code_(exit_code) {}
    int exit_code() const { return exit_code_; }

private:
    int exit_code_;
};

/// Bad configuration or violated call precondition.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(2, msg) {}
};

/// Shape/state-length contract violations.
class DimensionError : public ValidationError {
public:
    explicit DimensionError(const std::string& msg) : ValidationError(msg) {}
};

/// Failures while computing: divergence, degenerate inputs, I/O.
class ComputeError : public Error {
public:
    explicit ComputeError(const std::string& msg) : Error(3, msg) {}
};

/// Artifact hash mismatch against recorded provenance.
class ProvenanceError : public Error {
public:
    explicit ProvenanceError(const std::string& msg) : Error(4, msg) {}
};

// ---------------------------------------------------------------------------
// Vector helpers.
// ---------------------------------------------------------------------------

inline void check_dim(std::span<const double> v, std::size_t expected, const char* what) {
    if (v.size() != expected)
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(expected) +
                             ", got " + std::to_string(v.size()));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double dist2(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Shortest-round-trip decimal formatting, used by every text artifact so that
// reading a file back reproduces bit-identical doubles.
// ---------------------------------------------------------------------------

inline std::string format_double(double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double x = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ComputeError("malformed number: '" + std::string(s) + "'");
    return x;
}

// ---------------------------------------------------------------------------
// Logging: level read from NSV_LOG (error|warn|info|debug), default warn.
// ---------------------------------------------------------------------------

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel log_level();
void log(LogLevel level, const std::string& msg);

inline void log_warn(const std::string& msg) { log(LogLevel::warn, msg); }
inline void log_info(const std::string& msg) { log(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log(LogLevel::debug, msg); }

}  // namespace nsv
