#include "apc/harness/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "apc/common/errors.hpp"

namespace apc::harness {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '<') out += "&lt;";
    else if (ch == '>') out += "&gt;";
    else if (ch == '&') out += "&amp;";
    else out += ch;
  }
  return out;
}

std::string open_output(const ExperimentConfig& config, const std::string& name, std::ofstream& out) {
  std::filesystem::create_directories(config.output_dir);
  const std::string path = (std::filesystem::path(config.output_dir) / name).string();
  out.open(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  return path;
}

}  // namespace

std::string provenance_line(const ExperimentConfig& config) {
  char hash[24];
  std::snprintf(hash, sizeof hash, "0x%016llx", static_cast<unsigned long long>(config_hash(config)));
  return std::string("apc version=") + kVersion + " seed=" + std::to_string(config.seed) + " config_hash=" + hash;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string write_csv(const ExperimentConfig& config, const std::string& name, const std::string& header,
                      const std::vector<std::string>& rows) {
  std::ofstream out;
  const std::string path = open_output(config, name, out);
  out << "# " << provenance_line(config) << "\n" << header << "\n";
  for (const auto& r : rows) out << r << "\n";
  if (!out) throw ConfigError("failed writing '" + path + "'");
  return path;
}

std::string render_svg(const PlotSpec& plot, const std::string& comment) {
  constexpr double W = 720, H = 420, L = 70, R = 160, T = 40, B = 55;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : plot.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double e = i < s.err.size() ? s.err[i] : 0.0;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i] - e);
      y1 = std::max(y1, s.y[i] + e);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<!-- " << escape(comment) << " -->\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' '
    << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(plot.title) << "</text>\n";
  o << "<g stroke=\"#888\" fill=\"none\"><rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R
    << "\" height=\"" << H - T - B << "\"/></g>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x0 + (x1 - x0) * i / 5, yv = y0 + (y1 - y0) * i / 5;
    o << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << fmt(py(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv) << "</text>\n";
    o << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << fmt(py(yv)) << "\" y2=\"" << fmt(py(yv))
      << "\" stroke=\"#eee\"/>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape(plot.x_label)
    << "</text>\n";
  o << "<text transform=\"translate(18," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(plot.y_label) << "</text>\n";
  for (double m : plot.markers)
    o << "<line x1=\"" << fmt(px(m)) << "\" x2=\"" << fmt(px(m)) << "\" y1=\"" << T << "\" y2=\"" << H - B
      << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) o << (i ? " " : "") << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i]));
    o << "\"/>\n";
    for (std::size_t i = 0; i < s.err.size() && i < s.x.size(); ++i)
      o << "<line x1=\"" << fmt(px(s.x[i])) << "\" x2=\"" << fmt(px(s.x[i])) << "\" y1=\"" << fmt(py(s.y[i] - s.err[i]))
        << "\" y2=\"" << fmt(py(s.y[i] + s.err[i])) << "\" stroke=\"" << s.color << "\"/>\n";
    const double ly = T + 14 + 18 * static_cast<double>(k);
    o << "<line x1=\"" << W - R + 10 << "\" x2=\"" << W - R + 30 << "\" y1=\"" << ly - 4 << "\" y2=\"" << ly - 4
      << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << W - R + 35 << "\" y=\"" << ly << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string write_svg(const ExperimentConfig& config, const std::string& name, const PlotSpec& plot) {
  std::ofstream out;
  const std::string path = open_output(config, name, out);
  out << render_svg(plot, provenance_line(config));
  if (!out) throw ConfigError("failed writing '" + path + "'");
  return path;
}

std::vector<double> moving_average(const std::vector<double>& v, int window, const std::vector<bool>& restart) {
  std::vector<double> out(v.size());
  std::size_t begin = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i < restart.size() && restart[i]) {
      begin = i;
      sum = 0.0;
    }
    sum += v[i];
    if (i - begin + 1 > static_cast<std::size_t>(window)) sum -= v[i - window];
    out[i] = sum / static_cast<double>(std::min<std::size_t>(i - begin + 1, window));
  }
  return out;
}

}  // namespace apc::harness
