#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "coad/raster.hpp"

namespace coad {

// Row-major real-valued plane. Saliency maps live in [0, 1]; ground truth
// planes hold 0 or 1.
struct Plane {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(std::int64_t h, std::int64_t w, std::vector<double> v) : height(h), width(w), values(std::move(v)) {}
  double at(std::int64_t y, std::int64_t x) const { return values[static_cast<std::size_t>(y * width + x)]; }
};

Plane plane_from_raster(const Raster& gray);      // v / 255
Plane binary_plane_from_raster(const Raster& gray);  // v > 127

inline constexpr double kFBeta2 = 0.3;
inline constexpr int kPrThresholds = 256;

double mae(const Plane& map, const Plane& gt);

// Adaptive-threshold F-measure: binarise at min(2 mean(map), 1) (map >= tau).
// nullopt when the ground truth has no positive pixel.
std::optional<double> f_measure(const Plane& map, const Plane& gt);
double f_beta(double precision, double recall);

struct PrPoint {
  double precision = 0;
  double recall = 0;
};
using PrCurve = std::array<PrPoint, kPrThresholds>;

// Per-image curve at thresholds k/255, k = 0..255 (map >= threshold).
// Precision is 0 when nothing is predicted positive. nullopt on empty gt.
std::optional<PrCurve> pr_curve(const Plane& map, const Plane& gt);
// Mean of per-image curves over the images with a nonempty ground truth.
PrCurve pr_curve(const std::vector<Plane>& maps, const std::vector<Plane>& gts);

// Structure measure with alpha = 0.5 (object-aware + region-aware terms).
double s_measure(const Plane& map, const Plane& gt);

struct MetricsReport {
  double f_measure = 0;  // mean adaptive F over images with a nonempty gt
  double max_f = 0;      // max over thresholds of F(mean P, mean R)
  double mae = 0;
  double s_measure = 0;
  PrCurve pr_curve{};
  std::int64_t n_images = 0;
  std::int64_t n_undefined_f = 0;  // images excluded from F and the P-R curve
};

class MetricsAccumulator {
 public:
  void add(const Plane& map, const Plane& gt);
  MetricsReport report() const;
  std::int64_t count() const { return n_images_; }

 private:
  std::int64_t n_images_ = 0;
  std::int64_t n_f_ = 0;
  double sum_mae_ = 0, sum_s_ = 0, sum_f_ = 0;
  std::array<double, kPrThresholds> sum_p_{}, sum_r_{};
};

// name<TAB>value, one metric per line.
void write_report_tsv(std::ostream& out, const MetricsReport& report);
// "threshold,precision,recall" plus 256 rows.
void write_pr_csv(std::ostream& out, const PrCurve& curve);
std::string format_report_table(const MetricsReport& report);
// Parses the tab-separated form back (pr_curve left empty).
MetricsReport read_report_tsv(std::istream& in);

}  // namespace coad
