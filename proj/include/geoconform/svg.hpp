#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace geoconform::svg {

// Minimal static-SVG builder for the report figures. Numbers are formatted
// with fixed precision so output is byte-stable across runs.
class Canvas {
public:
    Canvas(double width, double height) : width_(width), height_(height) {
        body_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width)
              << "\" height=\"" << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << ' '
              << fmt(height) << "\">\n";
        body_ << "<rect width=\"" << fmt(width) << "\" height=\"" << fmt(height)
              << "\" fill=\"white\"/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double stroke_width = 1.0, bool dashed = false) {
        body_ << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2)
              << "\" y2=\"" << fmt(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\""
              << fmt(stroke_width) << '"';
        if (dashed) body_ << " stroke-dasharray=\"6 4\"";
        body_ << "/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill) {
        body_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w)
              << "\" height=\"" << fmt(h) << "\" fill=\"" << fill << "\"/>\n";
    }

    void circle(double cx, double cy, double r, const std::string& fill,
                double opacity = 1.0) {
        body_ << "<circle cx=\"" << fmt(cx) << "\" cy=\"" << fmt(cy) << "\" r=\"" << fmt(r)
              << "\" fill=\"" << fill << "\" fill-opacity=\"" << fmt(opacity) << "\"/>\n";
    }

    void text(double x, double y, const std::string& s, int size = 12,
              const std::string& anchor = "start") {
        body_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\"" << size
              << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << escape(s)
              << "</text>\n";
    }

    std::string finish() {
        body_ << "</svg>\n";
        return body_.str();
    }

    double width() const { return width_; }
    double height() const { return height_; }

private:
    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return buf;
    }

    static std::string escape(const std::string& s) {
        std::string out;
        for (char c : s) {
            if (c == '<') out += "&lt;";
            else if (c == '>') out += "&gt;";
            else if (c == '&') out += "&amp;";
            else out += c;
        }
        return out;
    }

    double width_;
    double height_;
    std::ostringstream body_;
};

/// Maps data coordinates into a pixel box with the y axis flipped.
struct LinearScale {
    double data_lo = 0.0, data_hi = 1.0;
    double px_lo = 0.0, px_hi = 1.0;

    double operator()(double v) const {
        const double t = (v - data_lo) / (data_hi - data_lo);
        return px_lo + t * (px_hi - px_lo);
    }
};

inline std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
    const double span = hi - lo;
    if (!(span > 0.0)) return {lo};
    double step = std::pow(10.0, std::floor(std::log10(span / target)));
    for (double mult : {1.0, 2.0, 5.0, 10.0}) {
        if (span / (step * mult) <= target) {
            step *= mult;
            break;
        }
    }
    std::vector<double> ticks;
    for (double v = std::ceil(lo / step) * step; v <= hi + step * 1e-9; v += step)
        ticks.push_back(v);
    return ticks;
}

}  // namespace geoconform::svg
