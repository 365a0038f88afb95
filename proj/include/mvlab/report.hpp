#pragma once

#include <filesystem>

#include "mvlab/io.hpp"
#include "mvlab/lyapunov.hpp"
#include "mvlab/periodic.hpp"

namespace mvlab {

Json certify_config_to_json(const CertifyConfig& cfg);
/// Keys sim, burn_in, trailing, phases, tol, tail_radii, n_proj; missing
/// keys keep the values in `defaults`.
CertifyConfig certify_config_from_json(const Json& j, const CertifyConfig& defaults);

Json to_json(const PeriodicCertificate& c);
Json to_json(const PeriodMapLog& log);
Json to_json(const RadialScanReport& r);
Json to_json(const TailCriteriaReport& r);
Json to_json(const ChebyshevReport& r);
Json to_json(const ItoCheckReport& r);
Json to_json(const CesaroReport& r);
Json to_json(const SweepReport& r);

/// Directory with phase_00.csv ... and phases.json.
void export_phase_set(const PhaseMeasureSet& ps, const std::filesystem::path& dir);
PhaseMeasureSet import_phase_set(const std::filesystem::path& dir);

/// `radius,a_hat,v_hat` rows.
void write_scan_csv(const RadialScanReport& r, const std::filesystem::path& path);

}  // namespace mvlab
