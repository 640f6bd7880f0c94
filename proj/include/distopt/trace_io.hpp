#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "distopt/simnet.hpp"

namespace distopt {

inline constexpr std::string_view kTraceCsvHeader =
    "iter,mse,consensus_residual,bytes_sent,packets_sent,wall_ns,diverged";

std::string TraceCsv(const RunTrace& trace);
std::vector<IterationRecord> ParseTraceCsv(std::string_view text);

// Run header plus final iterates and oracle, so MSE can be recomputed offline.
nlohmann::json TraceSidecar(const RunTrace& trace);
RunTrace ParseTrace(std::string_view csv, const nlohmann::json& sidecar);

// Real-valued JSON field: numbers as-is, non-finite values as "inf"/"-inf"/"nan" strings.
nlohmann::json RealToJson(double v);
double RealFromJson(const nlohmann::json& v);

// Writes to a sibling temp file, then renames over the target.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view contents);
std::string ReadFile(const std::filesystem::path& path);

// Writes <stem>.csv and <stem>.json.
void WriteTrace(const RunTrace& trace, const std::filesystem::path& stem);
RunTrace ReadTrace(const std::filesystem::path& stem);

}  // namespace distopt
