#pragma once

#include <string>
#include <variant>

#include <json.hpp>

#include "distopt/problem.hpp"

namespace distopt {

inline constexpr int kProblemSchemaVersion = 1;

// Reals are written as hex-float strings so measurement data round-trips bit-exactly.
// Readers also accept plain JSON numbers.
nlohmann::json ToJson(const TargetTrackingSpec& spec);
nlohmann::json ToJson(const FactoredLeastSquaresSpec& spec);

TargetTrackingSpec TrackingSpecFromJson(const nlohmann::json& doc);
FactoredLeastSquaresSpec FactoredSpecFromJson(const nlohmann::json& doc);

using ProblemSpec = std::variant<TargetTrackingSpec, FactoredLeastSquaresSpec>;

// Dispatches on the document's "kind" field.
ProblemSpec ProblemSpecFromJson(const nlohmann::json& doc);
SeparableProblem BuildProblem(const ProblemSpec& spec);

}  // namespace distopt
