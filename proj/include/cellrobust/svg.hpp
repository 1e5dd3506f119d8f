#pragma once

#include <string>

namespace cellrobust {

/// Minimal SVG emitter. All numbers are formatted with fixed precision so
/// output bytes are reproducible for identical input.
class SvgWriter {
public:
    SvgWriter(double width, double height);

    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke = "", double stroke_width = 0.0);
    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double stroke_width = 1.0);
    void circle(double cx, double cy, double r, const std::string& fill);
    void text(double x, double y, const std::string& content, double font_size,
              const std::string& anchor = "start", const std::string& transform = "",
              const std::string& fill = "#000000");
    void polyline(const std::string& points, const std::string& stroke, double stroke_width);
    void raw(const std::string& fragment);

    std::string finish() const;

    static std::string num(double v);
    static std::string escape(const std::string& s);
    /// Linear interpolation between two #RRGGBB colors, t clamped to [0,1].
    static std::string lerp_color(const std::string& from, const std::string& to, double t);

private:
    std::string body_;
    double width_;
    double height_;
};

}  // namespace cellrobust
