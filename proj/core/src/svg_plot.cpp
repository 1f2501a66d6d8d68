#include "sparseloc/svg_plot.hpp"

#include <algorithm>
#include <fstream>

namespace sparseloc {

void write_bar_chart_svg(const std::string& path, const std::string& title,
                         const std::vector<std::string>& series_names,
                         const std::vector<BarGroup>& groups) {
    if (groups.empty() || series_names.empty())
        throw InputError("write_bar_chart_svg: nothing to plot");
    for (const BarGroup& g : groups)
        if (g.values.size() != series_names.size())
            throw DimensionError("write_bar_chart_svg: group '" + g.label +
                                 "' does not match series count");

    const int ns = static_cast<int>(series_names.size());
    const int ng = static_cast<int>(groups.size());
    const double bar_w = 22.0, gap = 6.0, group_gap = 28.0;
    const double group_w = ns * bar_w + (ns - 1) * gap;
    const double plot_h = 240.0, margin_l = 50.0, margin_t = 40.0, margin_b = 50.0;
    const double width = margin_l + ng * (group_w + group_gap) + 120.0;
    const double height = margin_t + plot_h + margin_b;

    static const char* colors[] = {"#4878d0", "#ee854a", "#6acc64", "#d65f5f", "#956cb4",
                                   "#8c613c"};

    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                  "font-family=\"sans-serif\" font-size=\"11\">\n",
                  width, height);
    f << buf;
    f << "<text x=\"" << margin_l << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";

    // y axis with gridlines every 0.2
    for (int i = 0; i <= 5; ++i) {
        const double v = i / 5.0;
        const double y = margin_t + plot_h * (1.0 - v);
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n"
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.1f</text>\n",
                      margin_l, y, width - 100.0, y, margin_l - 6.0, y + 4.0, v);
        f << buf;
    }

    for (int g = 0; g < ng; ++g) {
        const double gx = margin_l + g * (group_w + group_gap) + group_gap / 2.0;
        for (int s = 0; s < ns; ++s) {
            const double v = std::clamp(groups[g].values[s], 0.0, 1.0);
            const double h = plot_h * v;
            const double x = gx + s * (bar_w + gap);
            std::snprintf(buf, sizeof(buf),
                          "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
                          "fill=\"%s\"><title>%s %s = %.4f</title></rect>\n",
                          x, margin_t + plot_h - h, bar_w, h, colors[s % 6],
                          groups[g].label.c_str(), series_names[s].c_str(), groups[g].values[s]);
            f << buf;
        }
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%s</text>\n",
                      gx + group_w / 2.0, margin_t + plot_h + 18.0, groups[g].label.c_str());
        f << buf;
    }

    // legend
    for (int s = 0; s < ns; ++s) {
        const double y = margin_t + s * 18.0;
        std::snprintf(buf, sizeof(buf),
                      "<rect x=\"%.1f\" y=\"%.1f\" width=\"12\" height=\"12\" fill=\"%s\"/>\n"
                      "<text x=\"%.1f\" y=\"%.1f\">%s</text>\n",
                      width - 90.0, y, colors[s % 6], width - 72.0, y + 10.0,
                      series_names[s].c_str());
        f << buf;
    }
    f << "</svg>\n";
}

}  // namespace sparseloc
