#pragma once

#include <array>
#include <string>
#include <vector>

#include "sparseloc/types.hpp"

namespace sparseloc {

/// 8-connected components of a binary mask, ordered by smallest row-major
/// pixel, each returned as a separate binary mask.
std::vector<std::vector<uint8_t>> connected_components(const std::vector<uint8_t>& mask, int height,
                                                       int width);

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Zero-denominator convention: a ratio with empty denominator is 1 when the
/// complementary error count is also 0, else 0. f1 is 0 when P + R = 0.
PRF prf_from_counts(int tp, int fp, int fn);

struct LocalizationResult {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    PRF prf;
};

/// tp: predicted points inside any instance mask; fp: points outside all
/// masks; fn: instance masks containing no predicted point.
LocalizationResult point_localization_metrics(const KeypointSet& pred,
                                              const std::vector<std::vector<uint8_t>>& instances,
                                              int height, int width);

PRF aggregate_localization(const std::vector<PRF>& per_image);

struct StationMetrics {
    std::array<PRF, 6> per_station;
    PRF average;  // unweighted mean over the 6 stations
};

/// Per image, a station is predicted present iff any predicted point lies in
/// its region; per station, binary P/R/F1 over images.
StationMetrics multilabel_station_metrics(const std::vector<KeypointSet>& preds,
                                          const std::vector<const std::vector<uint8_t>*>& maps,
                                          const std::vector<std::array<int, 6>>& gt_presence,
                                          int height, int width);

struct MetricsReport {
    std::vector<LocalizationResult> per_image;
    PRF localization_mean;
    StationMetrics stations;
};

void report_to_csv(const MetricsReport& report, const std::string& path);
void report_to_json(const MetricsReport& report, const std::string& path);

}  // namespace sparseloc
