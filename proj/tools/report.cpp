#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

namespace evtrojan::cli {

namespace {

std::string escape(const std::string& s) {
  std::string out;
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

std::string num(double v, int digits = 1) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Bar {
  std::string name;
  std::optional<double> value;  // nullopt: missing; infinity: "inf"
};

std::optional<double> read_metric(const nlohmann::json& doc, const std::string& metric) {
  if (!doc.is_object() || !doc.contains(metric)) return std::nullopt;
  const auto& v = doc.at(metric);
  if (v.is_number()) return v.get<double>();
  if (v.is_string() && v.get<std::string>() == "inf") return INFINITY;
  return std::nullopt;
}

}  // namespace

std::string bar_chart_svg(const std::vector<ReportRun>& runs, const std::string& metric,
                          const std::string& title) {
  std::vector<Bar> bars;
  for (const auto& r : runs) bars.push_back({r.name, read_metric(r.doc, metric)});

  const bool is_rate = metric == "cda" || metric == "asr";
  double top = is_rate ? 1.0 : 0.0;
  for (const auto& b : bars)
    if (b.value && std::isfinite(*b.value)) top = std::max(top, *b.value);
  if (top <= 0.0) top = 1.0;

  const int bar_w = 60, gap = 30, left = 60, plot_h = 240, top_pad = 40, bottom_pad = 60;
  const int width = left + static_cast<int>(bars.size()) * (bar_w + gap) + gap;
  const int height = top_pad + plot_h + bottom_pad;
  const int base = top_pad + plot_h;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
                    "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<text x=\"" + std::to_string(width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         escape(title) + "</text>\n";
  svg += "<line x1=\"" + std::to_string(left) + "\" y1=\"" + std::to_string(base) + "\" x2=\"" +
         std::to_string(width - 10) + "\" y2=\"" + std::to_string(base) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + std::to_string(left) + "\" y1=\"" + std::to_string(top_pad) + "\" x2=\"" +
         std::to_string(left) + "\" y2=\"" + std::to_string(base) + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = top * k / 4.0;
    const int y = base - plot_h * k / 4;
    svg += "<text x=\"" + std::to_string(left - 6) + "\" y=\"" + std::to_string(y + 4) +
           "\" text-anchor=\"end\">" + num(v, is_rate ? 2 : 1) + "</text>\n";
  }

  int x = left + gap;
  for (const auto& b : bars) {
    std::string label = "n/a";
    if (b.value) {
      const double v = std::isfinite(*b.value) ? std::clamp(*b.value / top, 0.0, 1.0) : 1.0;
      const int h = static_cast<int>(std::lround(v * plot_h));
      svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(base - h) + "\" width=\"" +
             std::to_string(bar_w) + "\" height=\"" + std::to_string(h) + "\" fill=\"#4a78b5\"/>\n";
      label = std::isfinite(*b.value) ? num(*b.value, is_rate ? 3 : 2) : "inf";
      svg += "<text x=\"" + std::to_string(x + bar_w / 2) + "\" y=\"" + std::to_string(base - h - 4) +
             "\" text-anchor=\"middle\">" + label + "</text>\n";
    } else {
      svg += "<text x=\"" + std::to_string(x + bar_w / 2) + "\" y=\"" + std::to_string(base - 4) +
             "\" text-anchor=\"middle\">n/a</text>\n";
    }
    svg += "<text x=\"" + std::to_string(x + bar_w / 2) + "\" y=\"" + std::to_string(base + 18) +
           "\" text-anchor=\"middle\">" + escape(b.name) + "</text>\n";
    x += bar_w + gap;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace evtrojan::cli
