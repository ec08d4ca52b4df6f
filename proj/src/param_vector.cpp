#include "sharplab/param_vector.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "sharplab/error.hpp"

namespace sharplab {

double IndexRanges::norm(std::span<const double> values) const {
    double acc = 0.0;
    for (const auto& [begin, end] : ranges)
        for (std::size_t i = begin; i < end; ++i) acc += values[i] * values[i];
    return std::sqrt(acc);
}

std::size_t IndexRanges::size() const {
    std::size_t n = 0;
    for (const auto& [begin, end] : ranges) n += end - begin;
    return n;
}

ParamVector::ParamVector(std::vector<double> values)
    : values_(std::move(values)), segments_{{"w", 0, values_.size()}} {
    validate();
}

ParamVector::ParamVector(std::vector<double> values, std::vector<Segment> segments)
    : values_(std::move(values)), segments_(std::move(segments)) {
    validate();
}

void ParamVector::validate() const {
    std::size_t cursor = 0;
    for (const auto& s : segments_) {
        if (s.start != cursor) throw ConfigError("ParamVector: segment '" + s.name + "' is not contiguous");
        cursor += s.length;
    }
    if (cursor != values_.size())
        throw ConfigError("ParamVector: segment lengths sum to " + std::to_string(cursor) + ", expected " +
                          std::to_string(values_.size()));
    if (!all_finite()) throw NumericError("ParamVector: non-finite value");
}

bool ParamVector::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

IndexRanges ParamVector::select(const std::vector<std::string>& names, std::size_t fallback_last) const {
    IndexRanges out;
    if (names.empty()) {
        const std::size_t first = segments_.size() > fallback_last ? segments_.size() - fallback_last : 0;
        for (std::size_t k = first; k < segments_.size(); ++k)
            out.ranges.emplace_back(segments_[k].start, segments_[k].start + segments_[k].length);
        return out;
    }
    for (const auto& name : names) {
        auto it = std::find_if(segments_.begin(), segments_.end(), [&](const Segment& s) { return s.name == name; });
        if (it == segments_.end()) throw ConfigError("unknown parameter segment '" + name + "'");
        out.ranges.emplace_back(it->start, it->start + it->length);
    }
    return out;
}

void to_json(nlohmann::json& j, const ParamVector& p) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : p.segments()) segs.push_back({{"name", s.name}, {"start", s.start}, {"length", s.length}});
    j = {{"values", std::vector<double>(p.values().begin(), p.values().end())}, {"segments", segs}};
}

void from_json(const nlohmann::json& j, ParamVector& p) {
    std::vector<Segment> segments;
    for (const auto& s : j.at("segments"))
        segments.push_back({s.at("name").get<std::string>(), s.at("start").get<std::size_t>(),
                            s.at("length").get<std::size_t>()});
    p = ParamVector(j.at("values").get<std::vector<double>>(), std::move(segments));
}

}  // namespace sharplab
