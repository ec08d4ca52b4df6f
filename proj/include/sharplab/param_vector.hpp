#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sharplab {

struct Segment {
    std::string name;
    std::size_t start = 0;
    std::size_t length = 0;

    friend bool operator==(const Segment&, const Segment&) = default;
};

/// Half-open index ranges into a flat parameter array.
struct IndexRanges {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;

    /// Euclidean norm of `values` restricted to the ranges.
    double norm(std::span<const double> values) const;
    std::size_t size() const;
};

/// Flat parameter values with named, contiguous segments covering the array.
class ParamVector {
public:
    ParamVector() = default;
    /// Single segment named "w" covering everything.
    explicit ParamVector(std::vector<double> values);
    ParamVector(std::vector<double> values, std::vector<Segment> segments);

    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    const std::vector<Segment>& segments() const noexcept { return segments_; }

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    /// Ranges for the named segments; an empty list selects the last `fallback_last` segments.
    IndexRanges select(const std::vector<std::string>& names, std::size_t fallback_last = 2) const;

    bool all_finite() const;

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

private:
    void validate() const;

    std::vector<double> values_;
    std::vector<Segment> segments_;
};

void to_json(nlohmann::json& j, const ParamVector& p);
void from_json(const nlohmann::json& j, ParamVector& p);

}  // namespace sharplab
