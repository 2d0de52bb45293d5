#pragma once

#include "gpcl/calibrator.hpp"
#include "gpcl/loss_engine.hpp"
#include "gpcl/simulator.hpp"

#include <iosfwd>
#include <string>

#include <json.hpp>

namespace gpcl {

/// {model, amplitudes[], knots_years[], cumulated[j][k]}
nlohmann::json to_json(const IntensitySchedule& schedule);
IntensitySchedule schedule_from_json(const nlohmann::json& j);
IntensitySchedule load_schedule_file(const std::string& path);
void save_json_file(const std::string& path, const nlohmann::json& j);

/// 64-bit FNV-1a of the canonical schedule JSON, as hex.
std::string schedule_hash(const IntensitySchedule& schedule);

/// `count,probability`
void write_distribution_csv(std::ostream& out, const LossDistribution& dist);
LossDistribution read_distribution_csv(std::istream& in, double t = 0.0);

/// `count,frequency,std_err`
void write_empirical_csv(std::ostream& out, const EmpiricalDistribution& emp);
nlohmann::json run_metadata(const EmpiricalDistribution& emp, const IntensitySchedule& schedule);

/// Fitted parameters (rows = amplitudes, columns = maturities), error table
/// (rows = instruments, columns = maturities), objective and settings.
nlohmann::json calibration_json(const CalibrationResult& result, const CalibrationProblem& problem);

/// Per-instrument model value, market mid, bid-ask width (all in bp) and error.
nlohmann::json pricing_report(const CalibrationProblem& problem, const ObjectiveValue& value);

} // namespace gpcl
