#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hrve/experiments.hpp"

namespace hrve {

/// Outcome of one acceptance-style check.
struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::string format_slope(const std::optional<SlopeFit>& f);

/// Plain-text table of a sweep: per (estimator, L) statistics, then slopes.
void write_sweep_summary(std::ostream& os, const SweepResult& r);
/// Columns: L_over_eps, then fluct/sys/total (with standard errors) for each
/// estimator.
void write_sweep_data(std::ostream& os, const SweepResult& r);
void write_sweep_gnuplot(std::ostream& os, const std::string& data_file);

void write_decay_summary(std::ostream& os, const DecayProfile& p);
void write_decay_gnuplot(std::ostream& os, const std::string& data_file);

void write_two_scale_summary(std::ostream& os, const TwoScaleReport& r);
void write_localization_summary(std::ostream& os, const LocalizationReport& r);
void write_localization_csv(std::ostream& os, const LocalizationReport& r);

/// Threshold checks applied by `--assert`; bands are multiplied by
/// `band_scale`.
std::vector<Check> sweep_checks(const SweepResult& r, double band_scale);
std::vector<Check> decay_checks(const DecayProfile& p, int d, double band_scale);
std::vector<Check> two_scale_checks(const TwoScaleReport& r, double band_scale);
std::vector<Check> localization_checks(const LocalizationReport& r, double band_scale);

/// Fit of a profile read back from CSV: window [2 eps, H/4] with H recovered
/// from the layer spacing.
DecayProfile refit_decay(DecayProfile p);

} // namespace hrve
