#include "coad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "coad/error.hpp"

namespace coad {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_same_extent(const Plane& a, const Plane& b, const char* what) {
  if (a.height != b.height || a.width != b.width || a.values.size() != b.values.size()) {
    throw ShapeError(std::string(what) + ": map is " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                     ", ground truth is " + std::to_string(b.height) + "x" + std::to_string(b.width));
  }
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// 2x / (x^2 + 1 + sigma + eps) over the pixels where mask is set; sigma is
// the sample standard deviation.
double object_score(const std::vector<double>& values, const Plane& mask, bool foreground) {
  double sum = 0;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if ((mask.values[i] > 0.5) == foreground) {
      sum += values[i];
      ++n;
    }
  }
  if (n == 0) return 0;
  const double x = sum / n;
  double var = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if ((mask.values[i] > 0.5) == foreground) var += (values[i] - x) * (values[i] - x);
  }
  const double sigma = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
  return 2.0 * x / (x * x + 1.0 + sigma + kEps);
}

double s_object(const Plane& map, const Plane& gt) {
  std::vector<double> fg(map.values.size()), bg(map.values.size());
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    const bool pos = gt.values[i] > 0.5;
    fg[i] = pos ? map.values[i] : 0.0;
    bg[i] = pos ? 0.0 : 1.0 - map.values[i];
  }
  const double u = mean_of(gt.values);
  return u * object_score(fg, gt, true) + (1 - u) * object_score(bg, gt, false);
}

// SSIM-style structural term on the sub-rectangle [y0, y1) x [x0, x1).
double region_ssim(const Plane& map, const Plane& gt, std::int64_t y0, std::int64_t y1, std::int64_t x0,
                   std::int64_t x1) {
  const double n = static_cast<double>((y1 - y0) * (x1 - x0));
  if (n <= 0) return 0;
  double mx = 0, my = 0;
  for (std::int64_t y = y0; y < y1; ++y) {
    for (std::int64_t x = x0; x < x1; ++x) {
      mx += map.at(y, x);
      my += gt.at(y, x);
    }
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::int64_t y = y0; y < y1; ++y) {
    for (std::int64_t x = x0; x < x1; ++x) {
      const double dx = map.at(y, x) - mx, dy = gt.at(y, x) - my;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
  }
  sxx /= (n - 1 + kEps);
  syy /= (n - 1 + kEps);
  sxy /= (n - 1 + kEps);
  const double alpha = 4 * mx * my * sxy;
  const double beta = (mx * mx + my * my) * (sxx + syy);
  if (alpha != 0) return alpha / (beta + kEps);
  return beta == 0 ? 1.0 : 0.0;
}

double s_region(const Plane& map, const Plane& gt) {
  const std::int64_t rows = gt.height, cols = gt.width;
  double total = 0, sx = 0, sy = 0;
  for (std::int64_t y = 0; y < rows; ++y) {
    for (std::int64_t x = 0; x < cols; ++x) {
      const double v = gt.at(y, x);
      total += v;
      sx += v * static_cast<double>(x + 1);
      sy += v * static_cast<double>(y + 1);
    }
  }
  // 1-based centroid; the split puts columns [0, cx) left and rows [0, cy) top
  std::int64_t cx, cy;
  if (total == 0) {
    cx = std::llround(cols / 2.0);
    cy = std::llround(rows / 2.0);
  } else {
    cx = std::llround(sx / total);
    cy = std::llround(sy / total);
  }
  const double area = static_cast<double>(rows * cols);
  const double w1 = static_cast<double>(cx * cy) / area;
  const double w2 = static_cast<double>((cols - cx) * cy) / area;
  const double w3 = static_cast<double>(cx * (rows - cy)) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  double q = 0;
  if (w1 > 0) q += w1 * region_ssim(map, gt, 0, cy, 0, cx);
  if (w2 > 0) q += w2 * region_ssim(map, gt, 0, cy, cx, cols);
  if (w3 > 0) q += w3 * region_ssim(map, gt, cy, rows, 0, cx);
  if (w4 > 0) q += w4 * region_ssim(map, gt, cy, rows, cx, cols);
  return q;
}

std::int64_t positives(const Plane& gt) {
  return std::count_if(gt.values.begin(), gt.values.end(), [](double v) { return v > 0.5; });
}

}  // namespace

Plane plane_from_raster(const Raster& gray) {
  if (gray.channels != 1) throw ShapeError("plane_from_raster: expected a gray raster");
  Plane p(gray.height, gray.width, std::vector<double>(gray.pixels.size()));
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) p.values[i] = gray.pixels[i] / 255.0;
  return p;
}

Plane binary_plane_from_raster(const Raster& gray) {
  if (gray.channels != 1) throw ShapeError("binary_plane_from_raster: expected a gray raster");
  Plane p(gray.height, gray.width, std::vector<double>(gray.pixels.size()));
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) p.values[i] = gray.pixels[i] > 127 ? 1.0 : 0.0;
  return p;
}

double mae(const Plane& map, const Plane& gt) {
  require_same_extent(map, gt, "mae");
  if (map.values.empty()) throw ShapeError("mae: empty plane");
  double s = 0;
  for (std::size_t i = 0; i < map.values.size(); ++i) s += std::fabs(map.values[i] - gt.values[i]);
  return s / static_cast<double>(map.values.size());
}

double f_beta(double precision, double recall) {
  const double denom = kFBeta2 * precision + recall;
  if (precision + recall <= 0 || denom <= 0) return 0;
  return (1 + kFBeta2) * precision * recall / denom;
}

std::optional<double> f_measure(const Plane& map, const Plane& gt) {
  require_same_extent(map, gt, "f_measure");
  const std::int64_t pos = positives(gt);
  if (pos == 0) return std::nullopt;
  const double tau = std::min(2.0 * mean_of(map.values), 1.0);
  std::int64_t tp = 0, predicted = 0;
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (map.values[i] >= tau) {
      ++predicted;
      if (gt.values[i] > 0.5) ++tp;
    }
  }
  const double precision = predicted ? static_cast<double>(tp) / predicted : 0.0;
  const double recall = static_cast<double>(tp) / pos;
  return f_beta(precision, recall);
}

std::optional<PrCurve> pr_curve(const Plane& map, const Plane& gt) {
  require_same_extent(map, gt, "pr_curve");
  const std::int64_t pos = positives(gt);
  if (pos == 0) return std::nullopt;
  // histogram of quantised map values split by label; cumulate from the top
  std::array<std::int64_t, kPrThresholds> hist_pos{}, hist_neg{};
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    // largest k with k/255 <= v
    const double v = std::clamp(map.values[i], 0.0, 1.0);
    auto k = static_cast<std::int64_t>(std::floor(v * 255.0));
    while (k < 255 && (k + 1) / 255.0 <= v) ++k;
    while (k > 0 && k / 255.0 > v) --k;
    (gt.values[i] > 0.5 ? hist_pos : hist_neg)[static_cast<std::size_t>(k)]++;
  }
  PrCurve curve;
  std::int64_t tp = 0, fp = 0;
  for (int k = kPrThresholds - 1; k >= 0; --k) {
    tp += hist_pos[static_cast<std::size_t>(k)];
    fp += hist_neg[static_cast<std::size_t>(k)];
    curve[static_cast<std::size_t>(k)] = {tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0,
                                          static_cast<double>(tp) / pos};
  }
  return curve;
}

PrCurve pr_curve(const std::vector<Plane>& maps, const std::vector<Plane>& gts) {
  if (maps.empty()) throw ShapeError("pr_curve: no maps");
  if (maps.size() != gts.size()) throw ShapeError("pr_curve: map and ground truth counts differ");
  PrCurve mean{};
  std::int64_t n = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    auto c = pr_curve(maps[i], gts[i]);
    if (!c) continue;
    ++n;
    for (int k = 0; k < kPrThresholds; ++k) {
      mean[k].precision += (*c)[k].precision;
      mean[k].recall += (*c)[k].recall;
    }
  }
  if (n == 0) throw ShapeError("pr_curve: every ground truth is empty");
  for (auto& p : mean) {
    p.precision /= n;
    p.recall /= n;
  }
  return mean;
}

double s_measure(const Plane& map, const Plane& gt) {
  require_same_extent(map, gt, "s_measure");
  if (map.values.empty()) throw ShapeError("s_measure: empty plane");
  const double y = mean_of(gt.values);
  if (y == 0) return 1.0 - mean_of(map.values);
  if (y == 1) return mean_of(map.values);
  constexpr double kAlpha = 0.5;
  const double q = kAlpha * s_object(map, gt) + (1 - kAlpha) * s_region(map, gt);
  return std::max(q, 0.0);
}

void MetricsAccumulator::add(const Plane& map, const Plane& gt) {
  sum_mae_ += mae(map, gt);
  sum_s_ += s_measure(map, gt);
  ++n_images_;
  auto f = f_measure(map, gt);
  if (!f) return;
  auto curve = pr_curve(map, gt);
  sum_f_ += *f;
  ++n_f_;
  for (int k = 0; k < kPrThresholds; ++k) {
    sum_p_[k] += (*curve)[k].precision;
    sum_r_[k] += (*curve)[k].recall;
  }
}

MetricsReport MetricsAccumulator::report() const {
  MetricsReport r;
  r.n_images = n_images_;
  r.n_undefined_f = n_images_ - n_f_;
  if (n_images_ == 0) return r;
  r.mae = sum_mae_ / n_images_;
  r.s_measure = sum_s_ / n_images_;
  if (n_f_ > 0) {
    r.f_measure = sum_f_ / n_f_;
    for (int k = 0; k < kPrThresholds; ++k) {
      r.pr_curve[k] = {sum_p_[k] / n_f_, sum_r_[k] / n_f_};
      r.max_f = std::max(r.max_f, f_beta(r.pr_curve[k].precision, r.pr_curve[k].recall));
    }
  }
  return r;
}

void write_report_tsv(std::ostream& out, const MetricsReport& r) {
  char buf[64];
  auto line = [&](const char* name, double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    out << name << '\t' << buf << '\n';
  };
  line("f_measure", r.f_measure);
  line("max_f", r.max_f);
  line("mae", r.mae);
  line("s_measure", r.s_measure);
  out << "n_images\t" << r.n_images << '\n';
  out << "n_undefined_f\t" << r.n_undefined_f << '\n';
}

MetricsReport read_report_tsv(std::istream& in) {
  MetricsReport r;
  std::string name;
  std::string value;
  while (std::getline(in, name, '\t') && std::getline(in, value)) {
    try {
      if (name == "f_measure") r.f_measure = std::stod(value);
      else if (name == "max_f") r.max_f = std::stod(value);
      else if (name == "mae") r.mae = std::stod(value);
      else if (name == "s_measure") r.s_measure = std::stod(value);
      else if (name == "n_images") r.n_images = std::stoll(value);
      else if (name == "n_undefined_f") r.n_undefined_f = std::stoll(value);
    } catch (const std::exception&) {
      throw IoError("report: bad value for " + name);
    }
  }
  return r;
}

void write_pr_csv(std::ostream& out, const PrCurve& curve) {
  out << "threshold,precision,recall\n";
  char buf[96];
  for (int k = 0; k < kPrThresholds; ++k) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f\n", k / 255.0, curve[k].precision, curve[k].recall);
    out << buf;
  }
}

std::string format_report_table(const MetricsReport& r) {
  std::ostringstream out;
  char buf[128];
  out << "metric        value\n";
  out << "------------  --------\n";
  std::snprintf(buf, sizeof(buf), "F-measure     %.4f\nmax F         %.4f\nMAE           %.4f\nS-measure     %.4f\n",
                r.f_measure, r.max_f, r.mae, r.s_measure);
  out << buf;
  out << "images        " << r.n_images << '\n';
  if (r.n_undefined_f > 0) out << "(" << r.n_undefined_f << " images with empty ground truth excluded from F)\n";
  return out.str();
}

}  // namespace coad
