#pragma once

#include <string>
#include <vector>

#include "sparseloc/types.hpp"

namespace sparseloc {

/// One group of bars (e.g. one loss) with a value per series (P, R, F1).
struct BarGroup {
    std::string label;
    std::vector<double> values;
};

/// Self-contained grouped bar chart; values are expected in [0,1].
void write_bar_chart_svg(const std::string& path, const std::string& title,
                         const std::vector<std::string>& series_names,
                         const std::vector<BarGroup>& groups);

}  // namespace sparseloc
