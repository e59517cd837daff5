#pragma once

#include <ostream>

#include "tslam/eval/depth_metrics.hpp"
#include "tslam/eval/trajectory.hpp"
#include "tslam/io/config.hpp"

namespace tslam {

/// Flat `key = value` lines followed by one machine-readable row.
inline void write_trajectory_report(std::ostream& os, const TrajectoryEvalReport& r) {
  os << "alignment = " << to_string(r.alignment) << '\n';
  os << "associated = " << r.associated << '\n';
  os << "dropped_estimate = " << r.dropped_estimate << '\n';
  os << "dropped_reference = " << r.dropped_reference << '\n';
  os << "scale = " << format_double(r.scale) << '\n';
  os << "ate_rmse = " << format_double(r.ate_rmse) << '\n';
  os << "rpe_deg = " << format_double(r.rpe_deg) << '\n';
  os << "# row: ate_rmse rpe_deg associated scale\n";
  os << "row " << format_double(r.ate_rmse) << ' ' << format_double(r.rpe_deg) << ' ' << r.associated << ' '
     << format_double(r.scale) << '\n';
}

inline void write_depth_report(std::ostream& os, const DepthEvalReport& r) {
  os << "count = " << r.count << '\n';
  os << "scale = " << format_double(r.scale) << '\n';
  os << "abs_rel = " << format_double(r.abs_rel) << '\n';
  os << "sq_rel = " << format_double(r.sq_rel) << '\n';
  os << "rmse = " << format_double(r.rmse) << '\n';
  os << "a1 = " << format_double(r.a1) << '\n';
  os << "a2 = " << format_double(r.a2) << '\n';
  os << "a3 = " << format_double(r.a3) << '\n';
  os << "# row: abs_rel sq_rel rmse a1 a2 a3\n";
  os << "row " << format_double(r.abs_rel) << ' ' << format_double(r.sq_rel) << ' ' << format_double(r.rmse) << ' '
     << format_double(r.a1) << ' ' << format_double(r.a2) << ' ' << format_double(r.a3) << '\n';
}

}  // namespace tslam
