#pragma once

#include <string>

#include <json.hpp>

#include "adalab/analysis.hpp"
#include "adalab/oracle.hpp"
#include "adalab/trajectory.hpp"

namespace adalab {

using Json = nlohmann::ordered_json;

/// JSON has no inf/nan; those are written as the strings "inf", "-inf", "nan".
Json json_number(double v);
double number_from_json(const Json& j);

Json to_json(const CheckEntry& entry);
Json to_json(const InvariantReport& report);
Json to_json(const TheoremBound& bound);
Json to_json(const GenSmoothBound& bound);
Json to_json(const NoiseSpec& spec);
Json to_json(const NoiseFit& fit);
Json to_json(const HyperParams& hyper);

/// Lossless round trip (doubles are printed with enough digits to reparse exactly).
Json to_json(const TrajectoryRecord& traj);
TrajectoryRecord trajectory_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);
/// Writes to a temporary name and renames, so readers never see a partial file.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace adalab
