#ifndef CODIS_REPORT_HPP
#define CODIS_REPORT_HPP

#include <string>
#include <vector>

#include "codis/fcn.hpp"
#include "codis/types.hpp"

namespace codis::report {

struct PropertyRow {
  long signal = 0;
  int event = 0;
  std::string origin;
  int level = 1;
  double velocity = 0.0;   // mm/s
  double diameter = 0.0;   // um
  double amplitude = 0.0;  // volts
};

void write_property_table(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& meta,
                          const std::vector<PropertyRow>& rows);
std::vector<PropertyRow> read_property_table(const std::string& path);

// diameter vs velocity scatter with marginal histograms, colored by level
void scatter_with_marginals(const std::vector<PropertyRow>& rows, const std::string& path);

// quartile boxes per coincidence level for velocity/diameter/amplitude
void level_summaries(const std::vector<PropertyRow>& rows, const std::string& path);

struct RecoveryRow {
  std::string method;
  double events = 0.0;
  double fraction = 0.0;
};
void write_recovery(const std::string& path, const std::vector<RecoveryRow>& rows);
std::vector<RecoveryRow> read_recovery(const std::string& path);
void recovery_bars(const std::vector<RecoveryRow>& rows, const std::string& path);

void transfer_heatmap(const std::vector<std::string>& row_names,
                      const std::vector<std::string>& col_names,
                      const std::vector<std::vector<double>>& values, const std::string& title,
                      const std::string& path);

// waveform with its class activation map as a color strip underneath
void cam_strips(const fcn::FcnModel& model, const std::vector<LabeledSignal>& samples,
                const std::string& path);

}  // namespace codis::report

#endif
