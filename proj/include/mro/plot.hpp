#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mro/domain.hpp"

namespace mro::plot {

struct Curve {
  std::vector<Index> checkpoints;
  std::vector<double> values;
};

/// Reads the `checkpoint,performance` schema.
Curve read_curve_csv(std::istream& in);

/// Median and interquartile band of several runs over one checkpoint grid.
struct Series {
  std::string label;
  std::vector<Index> checkpoints;
  std::vector<double> median;
  std::vector<double> q25;
  std::vector<double> q75;
  Index runs = 0;
};

/// Throws DomainError when the curves do not share one checkpoint grid.
Series summarize(std::string label, const std::vector<Curve>& curves);

/// Linear-interpolated quantile of `values` (need not be sorted).
double quantile(std::vector<double> values, double q);

struct Support {
  std::string label;
  MixedStrategy strategy;
};

/// Series (one per algorithm, manifest order) from the successful runs of a
/// run_experiment manifest; curve paths resolve against its directory.
std::vector<Series> series_from_manifest(const std::filesystem::path& manifest);
/// Strategy of each algorithm's first successful run.
std::vector<Support> supports_from_manifest(const std::filesystem::path& manifest);

struct FigureOptions {
  std::string title;
  std::string x_label = "iteration";
  std::string y_label = "performance";
  int width = 720;
  int height = 440;
};

/// Median polyline per series; band where a series has more than one run.
std::string performance_svg(const std::vector<Series>& series, const FigureOptions& options = {});

/// One stem panel per strategy: probability against decision-point index.
/// `num_points` of 0 sizes the axis to the largest index in the support.
std::string support_svg(const std::vector<Support>& supports, Index num_points = 0,
                        const FigureOptions& options = {});

}  // namespace mro::plot
