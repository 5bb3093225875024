#include "depslab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "depslab/rollout.hpp"

namespace depslab::metrics {

PartialMoments partial_moments(std::span<const double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("partial moments need at least 2 samples");
  const double mu = algo::mean_of(samples);
  double below = 0.0;
  double above = 0.0;
  for (double x : samples) {
    const double d = x - mu;
    if (d < 0.0) {
      below += d * d;
    } else {
      above += d * d;
    }
  }
  const auto n = static_cast<double>(samples.size());
  return {std::sqrt(below / n), std::sqrt(above / n)};
}

ReturnStats summarize(std::span<const double> samples) {
  ReturnStats s;
  s.mean = algo::mean_of(samples);
  if (samples.size() >= 2) {
    const PartialMoments pm = partial_moments(samples);
    s.sigma_minus = pm.lower;
    s.sigma_plus = pm.upper;
  }
  return s;
}

ReturnStats expected_return(const env::Environment& environment, std::span<const double> design,
                            const policy::Policy& policy, std::span<const double> theta,
                            std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("expected_return: sample count must be positive");
  const auto returns = algo::sample_returns(environment, design, policy, theta, n, rng);
  return summarize(returns);
}

// ---------------------------------------------------------------------------

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

std::string csv_header(const std::vector<std::string>& design_names) {
  std::string h = "iter,return_mean,sigma_minus,sigma_plus";
  for (const auto& n : design_names) h += ",psi_" + n;
  return h;
}

std::string csv_line(const RunRow& row) {
  std::string s = std::to_string(row.iteration);
  s += ',' + format_number(row.stats.mean);
  s += ',' + format_number(row.stats.sigma_minus);
  s += ',' + format_number(row.stats.sigma_plus);
  for (double p : row.design) s += ',' + format_number(p);
  return s;
}

void write_run_csv(const RunRecord& record, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << csv_header(record.design_names) << '\n';
  for (const auto& row : record.rows) out << csv_line(row) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path);
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cell;
  std::istringstream s(line);
  while (std::getline(s, cell, sep)) parts.push_back(cell);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

double parse_number(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw std::runtime_error(where + ": bad number '" + text + "'");
}

}  // namespace

RunRecord read_run_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  const auto header = split(line, ',');
  const std::vector<std::string> fixed = {"iter", "return_mean", "sigma_minus", "sigma_plus"};
  if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin())) {
    throw std::runtime_error(path + ":1: expected header starting with " + csv_header({}));
  }
  RunRecord record;
  for (std::size_t i = fixed.size(); i < header.size(); ++i) {
    if (header[i].rfind("psi_", 0) != 0) {
      throw std::runtime_error(path + ":1: design column '" + header[i] + "' lacks psi_ prefix");
    }
    record.design_names.push_back(header[i].substr(4));
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw std::runtime_error(where + ": expected " + std::to_string(header.size()) + " fields");
    }
    RunRow row;
    const double iter = parse_number(cells[0], where);
    if (iter < 0 || iter != std::floor(iter)) throw std::runtime_error(where + ": bad iteration");
    row.iteration = static_cast<std::size_t>(iter);
    if (!record.rows.empty() && row.iteration <= record.rows.back().iteration) {
      throw std::runtime_error(where + ": iterations must increase");
    }
    row.stats.mean = parse_number(cells[1], where);
    row.stats.sigma_minus = parse_number(cells[2], where);
    row.stats.sigma_plus = parse_number(cells[3], where);
    for (std::size_t i = 4; i < cells.size(); ++i) row.design.push_back(parse_number(cells[i], where));
    record.rows.push_back(std::move(row));
  }
  return record;
}

// ---------------------------------------------------------------------------

std::vector<CurvePoint> aggregate(const Series& series, bool* truncated) {
  if (series.runs.empty()) throw std::invalid_argument("series '" + series.label + "' has no runs");
  std::size_t common = series.runs.front().rows.size();
  bool cut = false;
  for (const auto& run : series.runs) {
    if (run.rows.size() != common) cut = true;
    common = std::min(common, run.rows.size());
  }
  if (truncated) *truncated = *truncated || cut;
  std::vector<CurvePoint> points;
  for (std::size_t k = 0; k < common; ++k) {
    std::vector<double> means;
    for (const auto& run : series.runs) means.push_back(run.rows[k].stats.mean);
    CurvePoint p;
    p.iteration = static_cast<double>(series.runs.front().rows[k].iteration);
    if (means.size() >= 2) {
      const ReturnStats s = summarize(means);
      p.mean = s.mean;
      p.lower = s.mean - s.sigma_minus;
      p.upper = s.mean + s.sigma_plus;
    } else {
      const ReturnStats& s = series.runs.front().rows[k].stats;
      p.mean = s.mean;
      p.lower = s.mean - s.sigma_minus;
      p.upper = s.mean + s.sigma_plus;
    }
    points.push_back(p);
  }
  return points;
}

namespace {

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

}  // namespace

void write_learning_curve_svg(const std::vector<Series>& series, const std::string& path,
                              const std::string& title, bool* truncated) {
  if (series.empty()) throw std::invalid_argument("learning curve needs at least one series");
  constexpr double kWidth = 720, kHeight = 440;
  constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;
  constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                     "#8c564b"};

  std::vector<std::vector<CurvePoint>> curves;
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool first = true;
  for (const auto& s : series) {
    curves.push_back(aggregate(s, truncated));
    for (const auto& p : curves.back()) {
      if (first) {
        x_min = x_max = p.iteration;
        y_min = p.lower;
        y_max = p.upper;
        first = false;
      }
      x_min = std::min(x_min, p.iteration);
      x_max = std::max(x_max, p.iteration);
      y_min = std::min(y_min, p.lower);
      y_max = std::max(y_max, p.upper);
    }
  }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * plot_w; };
  auto sy = [&](double y) { return kTop + (y_max - y) / (y_max - y_min) * plot_h; };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) {
    out << "<text x=\"" << kLeft << "\" y=\"24\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
  }
  out << "<g stroke=\"black\" fill=\"none\">\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w
      << "\" y2=\"" << kTop + plot_h << "\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kTop + plot_h << "\"/>\n</g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x_min + (x_max - x_min) * i / 4.0;
    const double yv = y_min + (y_max - y_min) * i / 4.0;
    out << "<text x=\"" << sx(xv) << "\" y=\"" << kTop + plot_h + 18
        << "\" text-anchor=\"middle\">" << format_number(std::round(xv)) << "</text>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">"
        << format_number(std::round(yv * 1000) / 1000) << "</text>\n";
  }
  out << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\">iteration k</text>\n";
  out << "<text transform=\"translate(16," << kTop + plot_h / 2
      << ") rotate(-90)\" text-anchor=\"middle\">average expected return</text>\n";

  for (std::size_t s = 0; s < curves.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    const auto& c = curves[s];
    out << "<g class=\"series\" data-label=\"" << xml_escape(series[s].label) << "\">\n";
    out << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (const auto& p : c) out << sx(p.iteration) << ',' << sy(p.upper) << ' ';
    for (auto it = c.rbegin(); it != c.rend(); ++it) {
      out << sx(it->iteration) << ',' << sy(it->lower) << ' ';
    }
    out << "\"/>\n<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : c) out << sx(p.iteration) << ',' << sy(p.mean) << ' ';
    out << "\"/>\n</g>\n";
    const double ly = kTop + 16 + 20 * static_cast<double>(s);
    out << "<line x1=\"" << kWidth - kRight + 15 << "\" y1=\"" << ly << "\" x2=\""
        << kWidth - kRight + 40 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"3\"/>\n";
    out << "<text x=\"" << kWidth - kRight + 46 << "\" y=\"" << ly + 4 << "\">"
        << xml_escape(series[s].label) << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace depslab::metrics
