#include "mflab/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "mflab/errors.hpp"

namespace mflab {

void ResultTable::add_row(std::vector<double> row) {
  if (row.size() != columns.size())
    throw InvalidInput("table '" + name + "': row has " + std::to_string(row.size()) + " values, expected " +
                       std::to_string(columns.size()));
  rows.push_back(std::move(row));
}

std::size_t ResultTable::col(const std::string& c) const {
  const auto it = std::find(columns.begin(), columns.end(), c);
  if (it == columns.end()) throw InvalidInput("table '" + name + "' has no column '" + c + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> ResultTable::column(const std::string& c) const {
  const std::size_t j = col(c);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[j]);
  return out;
}

namespace {

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_csv(const ResultTable& t) {
  std::string out;
  for (std::size_t j = 0; j < t.columns.size(); ++j) out += (j ? "," : "") + t.columns[j];
  out += '\n';
  for (const auto& r : t.rows) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j) out += ',';
      out += fmt17(r[j]);
    }
    out += '\n';
  }
  return out;
}

ResultTable parse_csv(const std::string& text) {
  ResultTable t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("parse_csv: empty input");
  {
    std::istringstream h(line);
    std::string c;
    while (std::getline(h, c, ',')) t.columns.push_back(c);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream r(line);
    std::string cell;
    while (std::getline(r, cell, ',')) {
      if (cell == "nan") row.push_back(std::numeric_limits<double>::quiet_NaN());
      else if (cell == "inf") row.push_back(std::numeric_limits<double>::infinity());
      else if (cell == "-inf") row.push_back(-std::numeric_limits<double>::infinity());
      else {
        char* end = nullptr;
        row.push_back(std::strtod(cell.c_str(), &end));
        if (end != cell.c_str() + cell.size()) throw InvalidInput("parse_csv: bad number '" + cell + "'");
      }
    }
    t.add_row(std::move(row));
  }
  return t;
}

// --------------------------------------------------------------------- SVG

namespace {

constexpr double kW = 800, kH = 600, kL = 90, kR = 190, kT = 50, kB = 70;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Axis {
  bool log = false;
  double lo = 0, hi = 1;

  double tr(double v) const { return log ? std::log10(v) : v; }
  double frac(double v) const { return (tr(v) - lo) / (hi - lo); }
  bool ok(double v) const { return std::isfinite(v) && (!log || v > 0); }

  void fit(const std::vector<double>& vals) {
    double a = std::numeric_limits<double>::infinity(), b = -a;
    for (double v : vals)
      if (ok(v)) {
        a = std::min(a, tr(v));
        b = std::max(b, tr(v));
      }
    if (!std::isfinite(a)) return;
    if (b - a < 1e-12) {
      a -= 0.5;
      b += 0.5;
    }
    const double pad = log ? 0.0 : 0.04 * (b - a);
    lo = a - pad;
    hi = b + pad;
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (int e = static_cast<int>(std::floor(lo)); e <= static_cast<int>(std::ceil(hi)); ++e)
        if (e >= lo - 1e-9 && e <= hi + 1e-9) out.push_back(std::pow(10.0, e));
      if (out.size() < 2) out = {std::pow(10.0, lo), std::pow(10.0, hi)};
      return out;
    }
    const double raw = (hi - lo) / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return out;
  }
};

}  // namespace

std::string render_svg(const ResultTable& t, const PlotSpec& spec) {
  if (t.rows.empty()) return "";
  const std::vector<double> xs = t.column(spec.x);
  Axis ax{spec.log_x}, ay{spec.log_y};
  ax.fit(xs);
  std::vector<double> all;
  for (const auto* group : {&spec.series, &spec.envelopes})
    for (const auto& c : *group)
      for (double v : t.column(c)) all.push_back(v);
  bool any = false;
  for (double v : all) any = any || ay.ok(v);
  if (!any) return "";
  ay.fit(all);

  const double pw = kW - kL - kR, ph = kH - kT - kB;
  auto px = [&](double v) { return kL + ax.frac(v) * pw; };
  auto py = [&](double v) { return kT + (1.0 - ay.frac(v)) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" viewBox=\"0 0 800 600\">\n";
  s << "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n";
  s << "<text x=\"" << num(kL + pw / 2) << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
    << esc(spec.title) << "</text>\n";
  s << "<rect x=\"" << num(kL) << "\" y=\"" << num(kT) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double v : ax.ticks()) {
    const double x = px(v);
    s << "<line x1=\"" << num(x) << "\" y1=\"" << num(kT + ph) << "\" x2=\"" << num(x) << "\" y2=\"" << num(kT + ph + 5)
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << num(x) << "\" y=\"" << num(kT + ph + 20)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << tick_label(v) << "</text>\n";
  }
  for (double v : ay.ticks()) {
    const double y = py(v);
    s << "<line x1=\"" << num(kL - 5) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kL) << "\" y2=\"" << num(y)
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << num(kL - 8) << "\" y=\"" << num(y + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" << tick_label(v) << "</text>\n";
  }
  s << "<text x=\"" << num(kL + pw / 2) << "\" y=\"" << num(kH - 20)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << esc(spec.x)
    << (spec.log_x ? " (log)" : "") << "</text>\n";
  if (spec.log_y)
    s << "<text x=\"20\" y=\"" << num(kT + ph / 2) << "\" transform=\"rotate(-90 20 " << num(kT + ph / 2)
      << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">log scale</text>\n";

  int idx = 0;
  double legend_y = kT + 10;
  auto draw = [&](const std::string& c, bool dashed) {
    const char* color = kColors[idx++ % 7];
    const std::vector<double> ys = t.column(c);
    if (spec.markers && !dashed) {
      for (std::size_t i = 0; i < xs.size(); ++i)
        if (ax.ok(xs[i]) && ay.ok(ys[i]))
          s << "<circle cx=\"" << num(px(xs[i])) << "\" cy=\"" << num(py(ys[i])) << "\" r=\"4\" fill=\"" << color
            << "\"/>\n";
    } else {
      std::string pts;
      for (std::size_t i = 0; i < xs.size(); ++i)
        if (ax.ok(xs[i]) && ay.ok(ys[i])) pts += num(px(xs[i])) + "," + num(py(ys[i])) + " ";
      s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << (dashed ? "1.5" : "2") << "\""
        << (dashed ? " stroke-dasharray=\"8 5\"" : "") << " points=\"" << pts << "\"/>\n";
    }
    s << "<line x1=\"" << num(kW - kR + 10) << "\" y1=\"" << num(legend_y) << "\" x2=\"" << num(kW - kR + 40)
      << "\" y2=\"" << num(legend_y) << "\" stroke=\"" << color << "\" stroke-width=\"2\""
      << (dashed ? " stroke-dasharray=\"8 5\"" : "") << "/>\n";
    s << "<text x=\"" << num(kW - kR + 46) << "\" y=\"" << num(legend_y + 4)
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << esc(c) << "</text>\n";
    legend_y += 20;
  };
  for (const auto& c : spec.series) draw(c, false);
  for (const auto& c : spec.envelopes) draw(c, true);
  s << "</svg>\n";
  return s.str();
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open '" + p.string() + "' for writing");
  f << content;
  f.close();
  if (!f) throw IoError("failed writing '" + p.string() + "'");
}

}  // namespace

std::vector<std::string> emit_outputs(const ResultTable& t, const std::string& dir, bool plots) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  std::vector<std::string> written;
  const fs::path base(dir);
  write_file(base / (t.name + ".csv"), to_csv(t));
  written.push_back((base / (t.name + ".csv")).string());
  write_file(base / (t.name + ".meta.json"), t.meta.dump(2) + "\n");
  written.push_back((base / (t.name + ".meta.json")).string());
  if (plots && !t.rows.empty()) {
    for (const auto& p : t.plots) {
      const std::string svg = render_svg(t, p);
      if (svg.empty()) continue;
      write_file(base / (p.stem + ".svg"), svg);
      written.push_back((base / (p.stem + ".svg")).string());
    }
  }
  return written;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("fit_line: need at least two matching points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidInput("fit_line: x values are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

}  // namespace mflab
