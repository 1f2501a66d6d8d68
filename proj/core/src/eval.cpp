#include "sparseloc/eval.hpp"

#include <algorithm>
#include <deque>
#include <fstream>

#include <json.hpp>

using nlohmann::json;

namespace sparseloc {

std::vector<std::vector<uint8_t>> connected_components(const std::vector<uint8_t>& mask, int height,
                                                       int width) {
    std::vector<std::vector<uint8_t>> components;
    std::vector<uint8_t> visited(mask.size(), 0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const size_t idx = static_cast<size_t>(y) * width + x;
            if (!mask[idx] || visited[idx]) continue;
            std::vector<uint8_t> comp(mask.size(), 0);
            std::deque<std::pair<int, int>> queue{{y, x}};
            visited[idx] = 1;
            comp[idx] = 1;
            while (!queue.empty()) {
                auto [cy, cx] = queue.front();
                queue.pop_front();
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || ny >= height || nx < 0 || nx >= width) continue;
                        const size_t nidx = static_cast<size_t>(ny) * width + nx;
                        if (visited[nidx] || !mask[nidx]) continue;
                        visited[nidx] = 1;
                        comp[nidx] = 1;
                        queue.push_back({ny, nx});
                    }
            }
            components.push_back(std::move(comp));
        }
    }
    return components;
}

PRF prf_from_counts(int tp, int fp, int fn) {
    PRF out;
    out.precision = (tp + fp > 0) ? double(tp) / (tp + fp) : (fn == 0 ? 1.0 : 0.0);
    out.recall = (tp + fn > 0) ? double(tp) / (tp + fn) : (fp == 0 ? 1.0 : 0.0);
    const double pr = out.precision + out.recall;
    out.f1 = pr > 0.0 ? 2.0 * out.precision * out.recall / pr : 0.0;
    return out;
}

LocalizationResult point_localization_metrics(const KeypointSet& pred,
                                              const std::vector<std::vector<uint8_t>>& instances,
                                              int height, int width) {
    LocalizationResult res;
    std::vector<uint8_t> covered(instances.size(), 0);
    for (const Keypoint& kp : pred.points) {
        if (kp.row < 0 || kp.row >= height || kp.col < 0 || kp.col >= width)
            throw BoundsError("point_localization_metrics: prediction out of image bounds");
        const size_t idx = static_cast<size_t>(kp.row) * width + kp.col;
        bool inside = false;
        for (size_t m = 0; m < instances.size(); ++m) {
            if (instances[m][idx]) {
                inside = true;
                covered[m] = 1;
            }
        }
        if (inside)
            ++res.tp;
        else
            ++res.fp;
    }
    for (uint8_t c : covered)
        if (!c) ++res.fn;
    res.prf = prf_from_counts(res.tp, res.fp, res.fn);
    return res;
}

PRF aggregate_localization(const std::vector<PRF>& per_image) {
    if (per_image.empty())
        throw InputError("aggregate_localization: empty per-image list");
    PRF mean;
    for (const PRF& p : per_image) {
        mean.precision += p.precision;
        mean.recall += p.recall;
        mean.f1 += p.f1;
    }
    const double inv = 1.0 / per_image.size();
    mean.precision *= inv;
    mean.recall *= inv;
    mean.f1 *= inv;
    return mean;
}

StationMetrics multilabel_station_metrics(const std::vector<KeypointSet>& preds,
                                          const std::vector<const std::vector<uint8_t>*>& maps,
                                          const std::vector<std::array<int, 6>>& gt_presence,
                                          int height, int width) {
    if (preds.size() != maps.size() || preds.size() != gt_presence.size())
        throw DimensionError("multilabel_station_metrics: per-image inputs not aligned");

    for (const auto* map : maps) {
        std::array<bool, 6> seen{};
        for (uint8_t v : *map) {
            if (v < 1 || v > 6) throw InputError("station map contains label outside 1..6");
            seen[v - 1] = true;
        }
        for (bool s : seen)
            if (!s) throw InputError("station map missing one of labels 1..6");
    }

    std::array<int, 6> tp{}, fp{}, fn{};
    for (size_t i = 0; i < preds.size(); ++i) {
        std::array<int, 6> predicted{};
        for (const Keypoint& kp : preds[i].points) {
            if (kp.row < 0 || kp.row >= height || kp.col < 0 || kp.col >= width)
                throw BoundsError("multilabel_station_metrics: prediction out of bounds");
            const uint8_t s = (*maps[i])[static_cast<size_t>(kp.row) * width + kp.col];
            predicted[s - 1] = 1;
        }
        for (int s = 0; s < 6; ++s) {
            if (predicted[s] && gt_presence[i][s]) ++tp[s];
            else if (predicted[s] && !gt_presence[i][s]) ++fp[s];
            else if (!predicted[s] && gt_presence[i][s]) ++fn[s];
        }
    }

    StationMetrics out;
    for (int s = 0; s < 6; ++s) {
        out.per_station[s] = prf_from_counts(tp[s], fp[s], fn[s]);
        out.average.precision += out.per_station[s].precision;
        out.average.recall += out.per_station[s].recall;
        out.average.f1 += out.per_station[s].f1;
    }
    out.average.precision /= 6.0;
    out.average.recall /= 6.0;
    out.average.f1 /= 6.0;
    return out;
}

namespace {
json prf_to_json(const PRF& p) {
    return json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}
}  // namespace

void report_to_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "row,image,tp,fp,fn,precision,recall,f1\n";
    char buf[256];
    for (size_t i = 0; i < report.per_image.size(); ++i) {
        const LocalizationResult& r = report.per_image[i];
        std::snprintf(buf, sizeof(buf), "image,%zu,%d,%d,%d,%.17g,%.17g,%.17g\n", i, r.tp, r.fp,
                      r.fn, r.prf.precision, r.prf.recall, r.prf.f1);
        f << buf;
    }
    std::snprintf(buf, sizeof(buf), "localization_mean,,,,,%.17g,%.17g,%.17g\n",
                  report.localization_mean.precision, report.localization_mean.recall,
                  report.localization_mean.f1);
    f << buf;
    for (int s = 0; s < 6; ++s) {
        const PRF& p = report.stations.per_station[s];
        std::snprintf(buf, sizeof(buf), "station,%d,,,,%.17g,%.17g,%.17g\n", s + 1, p.precision,
                      p.recall, p.f1);
        f << buf;
    }
    std::snprintf(buf, sizeof(buf), "station_mean,,,,,%.17g,%.17g,%.17g\n",
                  report.stations.average.precision, report.stations.average.recall,
                  report.stations.average.f1);
    f << buf;
}

void report_to_json(const MetricsReport& report, const std::string& path) {
    json j;
    json per_image = json::array();
    for (const LocalizationResult& r : report.per_image) {
        json e = prf_to_json(r.prf);
        e["tp"] = r.tp;
        e["fp"] = r.fp;
        e["fn"] = r.fn;
        per_image.push_back(std::move(e));
    }
    j["per_image"] = std::move(per_image);
    j["localization_mean"] = prf_to_json(report.localization_mean);
    json stations = json::array();
    for (const PRF& p : report.stations.per_station) stations.push_back(prf_to_json(p));
    j["stations"] = std::move(stations);
    j["station_mean"] = prf_to_json(report.stations.average);
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

}  // namespace sparseloc
