#pragma once

#include <string>
#include <vector>

#include "apc/harness/config.hpp"

namespace apc::harness {

// "apc version=... seed=... config_hash=0x..."; written as the first line of
// every output file (as a '#' comment in CSVs, an XML comment in SVGs).
std::string provenance_line(const ExperimentConfig& config);

// Quotes a field when it holds a comma, quote or line break.
std::string csv_field(const std::string& s);

// Writes `<dir>/<name>`: the provenance comment, then the rows verbatim.
// Returns the path.
std::string write_csv(const ExperimentConfig& config, const std::string& name, const std::string& header,
                      const std::vector<std::string>& rows);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // optional symmetric error bars
  std::string color = "#1f77b4";
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<double> markers;  // vertical dashed lines at these x values
};

// Self-contained line chart.
std::string render_svg(const PlotSpec& plot, const std::string& comment);
std::string write_svg(const ExperimentConfig& config, const std::string& name, const PlotSpec& plot);

// Trailing mean over at most `window` values, restarting wherever `restart` is true.
std::vector<double> moving_average(const std::vector<double>& v, int window, const std::vector<bool>& restart = {});

}  // namespace apc::harness
