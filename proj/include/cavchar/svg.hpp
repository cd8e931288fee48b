#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace cavchar::svg {

struct Series {
    Eigen::ArrayXd x;
    Eigen::ArrayXd y;
    std::string label;
    bool scatter = false;  // markers instead of a polyline
    std::string color;     // default palette when empty
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<Series> series;
    int width = 860;
    int height = 560;
};

// Deterministic standalone SVG; non-finite and non-positive-on-log points are
// dropped per series.
std::string render_svg(const PlotSpec& spec);

} // namespace cavchar::svg
