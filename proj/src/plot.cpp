#include "spinstar/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace spinstar {

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_number(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() ? v : std::numeric_limits<double>::quiet_NaN();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
  return out;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  throw std::invalid_argument("CSV has no column '" + name + "'");
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::stringstream ss(text);
  std::string line;
  bool have_header = false;
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line);
    if (!have_header) {
      t.header = cells;
      have_header = true;
      continue;
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(to_number(c));
    row.resize(t.header.size(), std::numeric_limits<double>::quiet_NaN());
    t.rows.push_back(row);
  }
  if (!have_header) throw std::invalid_argument("CSV has no header");
  return t;
}

std::string render_svg(const CsvTable& table, const PlotSpec& spec) {
  const int xc = table.column(spec.x_column);
  const int ec = spec.y_error_column.empty() ? -1 : table.column(spec.y_error_column);
  std::vector<int> yc;
  for (const auto& s : spec.series) yc.push_back(table.column(s.y_column));

  auto in_range = [&](double x) {
    return std::isfinite(x) && (!spec.x_range || (x >= spec.x_range->first && x <= spec.x_range->second));
  };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& r : table.rows) {
    const double x = r[xc] * spec.x_scale;
    if (!in_range(r[xc])) continue;
    for (std::size_t s = 0; s < yc.size(); ++s) {
      const double y = r[yc[s]] * spec.y_scale;
      if (!std::isfinite(y)) continue;
      const double e = (s == 0 && ec >= 0 && std::isfinite(r[ec])) ? r[ec] * spec.y_scale : 0.0;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y - e);
      y1 = std::max(y1, y + e);
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double left = 80, right = 20, top = 40, bottom = 55;
  const double pw = spec.width - left - right, ph = spec.height - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << spec.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(spec.title)
    << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ticks(x0, x1)) {
    o << "<line x1=\"" << fmt("%.2f", px(t)) << "\" x2=\"" << fmt("%.2f", px(t)) << "\" y1=\"" << top + ph
      << "\" y2=\"" << top + ph + 5 << "\" stroke=\"black\"/>";
    o << "<text x=\"" << fmt("%.2f", px(t)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
      << fmt("%.4g", t) << "</text>\n";
  }
  for (double t : ticks(y0, y1)) {
    o << "<line x1=\"" << left - 5 << "\" x2=\"" << left << "\" y1=\"" << fmt("%.2f", py(t)) << "\" y2=\""
      << fmt("%.2f", py(t)) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << left - 8 << "\" y=\"" << fmt("%.2f", py(t) + 4) << "\" text-anchor=\"end\">"
      << fmt("%.4g", t) << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << spec.height - 12 << "\" text-anchor=\"middle\">"
    << escape(spec.x_label) << "</text>\n";
  o << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(spec.y_label) << "</text>\n";

  for (std::size_t s = 0; s < yc.size(); ++s) {
    const char* color = kColors[s % 5];
    std::ostringstream pts;
    for (const auto& r : table.rows) {
      if (!in_range(r[xc]) || !std::isfinite(r[yc[s]])) continue;
      const double x = px(r[xc] * spec.x_scale), y = py(r[yc[s]] * spec.y_scale);
      if (spec.series[s].scatter) {
        o << "<circle cx=\"" << fmt("%.2f", x) << "\" cy=\"" << fmt("%.2f", y) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
        if (s == 0 && ec >= 0 && std::isfinite(r[ec])) {
          const double e = r[ec] * spec.y_scale;
          o << "<line x1=\"" << fmt("%.2f", x) << "\" x2=\"" << fmt("%.2f", x) << "\" y1=\""
            << fmt("%.2f", py(r[yc[s]] * spec.y_scale - e)) << "\" y2=\""
            << fmt("%.2f", py(r[yc[s]] * spec.y_scale + e)) << "\" stroke=\"" << color << "\"/>\n";
        }
      } else {
        pts << fmt("%.2f", x) << ',' << fmt("%.2f", y) << ' ';
      }
    }
    if (!spec.series[s].scatter)
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\" points=\"" << pts.str() << "\"/>\n";
    o << "<text x=\"" << left + pw - 10 << "\" y=\"" << top + 16 + 16 * s << "\" text-anchor=\"end\" fill=\""
      << color << "\">" << escape(spec.series[s].label.empty() ? spec.series[s].y_column : spec.series[s].label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void plot_csv_file(const std::string& csv_path, const std::string& svg_path, const PlotSpec& spec) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot read '" + csv_path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::ofstream out(svg_path);
  if (!out) throw std::runtime_error("cannot write '" + svg_path + "'");
  out << render_svg(parse_csv(ss.str()), spec);
}

}  // namespace spinstar
