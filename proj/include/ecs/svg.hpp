#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ecs/error.hpp"
#include "ecs/util.hpp"

namespace ecs {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

// Minimal SVG builder. Coordinates are printed with two decimals so output
// is byte-stable.
class SvgWriter {
 public:
  SvgWriter(double width, double height) {
    out_ = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
            "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
  }

  void rect(double x, double y, double w, double h, std::string_view fill, std::string_view cls = {},
            std::string_view stroke = {}, double stroke_width = 0.0) {
    out_ += "<rect";
    if (!cls.empty()) out_ += " class=\"" + std::string(cls) + "\"";
    out_ += " x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) + "\" fill=\"" +
            std::string(fill) + "\"";
    if (!stroke.empty()) out_ += " stroke=\"" + std::string(stroke) + "\" stroke-width=\"" + num(stroke_width) + "\"";
    out_ += "/>\n";
  }

  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width,
            std::string_view cls = {}) {
    out_ += "<line";
    if (!cls.empty()) out_ += " class=\"" + std::string(cls) + "\"";
    out_ += " x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
            "\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"" + num(width) + "\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, std::string_view stroke, std::string_view cls = {}) {
    out_ += "<polyline";
    if (!cls.empty()) out_ += " class=\"" + std::string(cls) + "\"";
    out_ += " fill=\"none\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"2.00\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) out_ += ' ';
      out_ += num(pts[i].first) + "," + num(pts[i].second);
    }
    out_ += "\"/>\n";
  }

  void circle(double cx, double cy, double r, std::string_view fill) {
    out_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) + "\" fill=\"" + std::string(fill) +
            "\"/>\n";
  }

  void text(double x, double y, std::string_view content, double size = 12.0, std::string_view anchor = "start") {
    out_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" + num(size) +
            "\" text-anchor=\"" + std::string(anchor) + "\">" + xml_escape(content) + "</text>\n";
  }

  std::string finish() {
    out_ += "</svg>\n";
    return std::move(out_);
  }

  static std::string num(double v) { return fixed(v, 2); }

 private:
  std::string out_;
};

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace ecs
