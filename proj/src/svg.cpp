#include "cellrobust/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace cellrobust {

SvgWriter::SvgWriter(double width, double height) : width_(width), height_(height) {}

std::string SvgWriter::num(double v) {
    if (v == 0.0) v = 0.0;  // normalize -0
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string SvgWriter::escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string SvgWriter::lerp_color(const std::string& from, const std::string& to, double t) {
    t = std::clamp(t, 0.0, 1.0);
    auto channel = [&](int off) {
        const int a = std::stoi(from.substr(static_cast<std::size_t>(off), 2), nullptr, 16);
        const int b = std::stoi(to.substr(static_cast<std::size_t>(off), 2), nullptr, 16);
        return static_cast<int>(std::lround(a + t * (b - a)));
    };
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02X%02X%02X", channel(1), channel(3), channel(5));
    return buf;
}

void SvgWriter::rect(double x, double y, double w, double h, const std::string& fill,
                     const std::string& stroke, double stroke_width) {
    body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) +
             "\" height=\"" + num(h) + "\" fill=\"" + fill + "\"";
    if (!stroke.empty())
        body_ += " stroke=\"" + stroke + "\" stroke-width=\"" + num(stroke_width) + "\"";
    body_ += "/>\n";
}

void SvgWriter::line(double x1, double y1, double x2, double y2, const std::string& stroke,
                     double stroke_width) {
    body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) +
             "\" y2=\"" + num(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" +
             num(stroke_width) + "\"/>\n";
}

void SvgWriter::circle(double cx, double cy, double r, const std::string& fill) {
    body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) +
             "\" fill=\"" + fill + "\"/>\n";
}

void SvgWriter::text(double x, double y, const std::string& content, double font_size,
                     const std::string& anchor, const std::string& transform,
                     const std::string& fill) {
    body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(font_size) +
             "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\" fill=\"" + fill + "\"";
    if (!transform.empty()) body_ += " transform=\"" + transform + "\"";
    body_ += ">" + escape(content) + "</text>\n";
}

void SvgWriter::polyline(const std::string& points, const std::string& stroke,
                         double stroke_width) {
    body_ += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" + stroke +
             "\" stroke-width=\"" + num(stroke_width) + "\"/>\n";
}

void SvgWriter::raw(const std::string& fragment) { body_ += fragment; }

std::string SvgWriter::finish() const {
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width_) + "\" height=\"" +
           num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " + num(height_) + "\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"" + num(width_) + "\" height=\"" + num(height_) +
           "\" fill=\"#FFFFFF\"/>\n";
    out += body_;
    out += "</svg>\n";
    return out;
}

}  // namespace cellrobust
