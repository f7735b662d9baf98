#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sasefel {

/// Invalid parameters, grids or documents. Carries every problem found, not just the first.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg), messages_{msg} {}
    explicit ConfigError(std::vector<std::string> msgs)
        : std::runtime_error(join(msgs)), messages_(std::move(msgs)) {}

    const std::vector<std::string>& messages() const noexcept { return messages_; }

private:
    static std::string join(const std::vector<std::string>& msgs) {
        std::string out;
        for (const auto& m : msgs) {
            if (!out.empty()) out += "\n";
            out += m;
        }
        return out;
    }
    std::vector<std::string> messages_;
};

class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a realization breaks the conservation or positivity bounds.
class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& msg, double time, double conservation_defect)
        : std::runtime_error(msg), time_(time), defect_(conservation_defect) {}

    double time() const noexcept { return time_; }
    double conservation_defect() const noexcept { return defect_; }

private:
    double time_;
    double defect_;
};

/// Curve does not have the shape an analysis step requires (e.g. bimodal input to a single-peak fit).
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FitError : public std::runtime_error {
public:
    FitError(const std::string& msg, int iterations, double last_residual)
        : std::runtime_error(msg), iterations_(iterations), residual_(last_residual) {}

    int iterations() const noexcept { return iterations_; }
    double last_residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

/// A scan point failed; records which realization broke.
class RealizationError : public std::runtime_error {
public:
    RealizationError(const std::string& msg, std::size_t realization)
        : std::runtime_error(msg), realization_(realization) {}

    std::size_t realization() const noexcept { return realization_; }

private:
    std::size_t realization_;
};

}  // namespace sasefel
