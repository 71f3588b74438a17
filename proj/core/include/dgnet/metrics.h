#ifndef DGNET_METRICS_H_
#define DGNET_METRICS_H_

#include <array>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dgnet/image.h"

namespace dgnet {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

struct MetricsReport {
  ConfusionCounts counts;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
  double rfr = 0.0;  // region fitting rate; set-identical to iou
  // Row-normalised confusion matrix: {oil->oil, oil->background} and
  // {background->oil, background->background}.
  std::array<double, 2> oil_row{};
  std::array<double, 2> background_row{};
};

// Pixel counts with 1 = oil. Masks must share a shape and be binary.
ConfusionCounts confusion(const Image& gt, const Image& pred);

// If tp + fp + fn == 0 the overlap scores are all 1.
MetricsReport score(const ConfusionCounts& counts);

struct DistributionSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population
  std::int64_t outlier_count = 0;  // beyond 1.5 IQR from the quartiles
};

// Quartiles by linear interpolation between order statistics.
DistributionSummary summarize(std::span<const double> values);

struct MaskPair {
  std::string name;
  const Image* gt;
  const Image* pred;
};

struct BatchReport {
  std::vector<std::string> names;
  std::vector<MetricsReport> per_image;
  MetricsReport pooled;
  DistributionSummary accuracy;
  DistributionSummary iou;
};

BatchReport batch_eval(std::span<const MaskPair> pairs);

// image,tp,fp,fn,tn,accuracy,precision,recall,f1,iou,rfr with a POOLED row.
void write_report_csv(const BatchReport& report, std::ostream& out);
// metric,min,q1,median,q3,max,mean,std,outlier_count
void write_summary_csv(const BatchReport& report, std::ostream& out);
// Two lines, four decimals: "oil a b" / "background c d".
std::string format_confusion_matrix(const MetricsReport& report);

}  // namespace dgnet

#endif  // DGNET_METRICS_H_
