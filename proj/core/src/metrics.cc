#include "dgnet/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dgnet/error.h"

namespace dgnet {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

ConfusionCounts confusion(const Image& gt, const Image& pred) {
  if (gt.height != pred.height || gt.width != pred.width) {
    throw ShapeError("confusion: ground truth is " + std::to_string(gt.height) + "x" +
                     std::to_string(gt.width) + " but prediction is " +
                     std::to_string(pred.height) + "x" + std::to_string(pred.width));
  }
  if (!is_binary(gt) || !is_binary(pred)) {
    throw ValidationError("confusion: masks must contain only 0 and 1");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < gt.pixels.size(); ++i) {
    const bool g = gt.pixels[i] != 0.0f;
    const bool p = pred.pixels[i] != 0.0f;
    if (g && p) ++c.tp;
    else if (!g && p) ++c.fp;
    else if (g && !p) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace {

std::array<double, 2> normalized_row(std::int64_t hit, std::int64_t miss) {
  const std::int64_t n = hit + miss;
  if (n == 0) return {1.0, 0.0};
  return {static_cast<double>(hit) / n, static_cast<double>(miss) / n};
}

}  // namespace

MetricsReport score(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.fn < 0 || c.tn < 0) {
    throw ValidationError("score: negative confusion count");
  }
  if (c.total() == 0) throw ValidationError("score: zero total pixel count");
  MetricsReport r;
  r.counts = c;
  const auto tp = static_cast<double>(c.tp);
  const auto fp = static_cast<double>(c.fp);
  const auto fn = static_cast<double>(c.fn);
  r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fp + c.fn == 0) {
    r.precision = r.recall = r.f1 = r.iou = 1.0;
  } else {
    r.precision = c.tp + c.fp > 0 ? tp / (tp + fp) : 0.0;
    r.recall = c.tp + c.fn > 0 ? tp / (tp + fn) : 0.0;
    r.f1 = r.precision + r.recall > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    r.iou = tp / (tp + fp + fn);
  }
  r.rfr = r.iou;
  r.oil_row = normalized_row(c.tp, c.fn);
  r.background_row = normalized_row(c.tn, c.fp);
  // reversed so the diagonal holds the correct fractions
  std::swap(r.background_row[0], r.background_row[1]);
  return r;
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

DistributionSummary summarize(std::span<const double> values) {
  if (values.empty()) throw ValidationError("summarize: no values");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  DistributionSummary s;
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile_sorted(v, 0.25);
  s.median = quantile_sorted(v, 0.5);
  s.q3 = quantile_sorted(v, 0.75);
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(v.size()));
  const double iqr = s.q3 - s.q1;
  const double lo = s.q1 - 1.5 * iqr, hi = s.q3 + 1.5 * iqr;
  for (double x : v) {
    if (x < lo || x > hi) ++s.outlier_count;
  }
  return s;
}

BatchReport batch_eval(std::span<const MaskPair> pairs) {
  if (pairs.empty()) throw ValidationError("batch_eval: no mask pairs");
  BatchReport out;
  ConfusionCounts pooled;
  std::vector<double> acc, iou;
  for (const MaskPair& p : pairs) {
    const ConfusionCounts c = confusion(*p.gt, *p.pred);
    pooled += c;
    out.names.push_back(p.name);
    out.per_image.push_back(score(c));
    acc.push_back(out.per_image.back().accuracy);
    iou.push_back(out.per_image.back().iou);
  }
  out.pooled = score(pooled);
  out.accuracy = summarize(acc);
  out.iou = summarize(iou);
  return out;
}

namespace {

void report_row(std::ostream& out, const std::string& name, const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), ",%lld,%lld,%lld,%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                static_cast<long long>(r.counts.tp), static_cast<long long>(r.counts.fp),
                static_cast<long long>(r.counts.fn), static_cast<long long>(r.counts.tn),
                r.accuracy, r.precision, r.recall, r.f1, r.iou, r.rfr);
  out << name << buf;
}

void summary_row(std::ostream& out, const char* metric, const DistributionSummary& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%lld\n", metric, s.min,
                s.q1, s.median, s.q3, s.max, s.mean, s.std,
                static_cast<long long>(s.outlier_count));
  out << buf;
}

}  // namespace

void write_report_csv(const BatchReport& report, std::ostream& out) {
  out << "image,tp,fp,fn,tn,accuracy,precision,recall,f1,iou,rfr\n";
  for (std::size_t i = 0; i < report.per_image.size(); ++i) {
    report_row(out, report.names[i], report.per_image[i]);
  }
  report_row(out, "POOLED", report.pooled);
}

void write_summary_csv(const BatchReport& report, std::ostream& out) {
  out << "metric,min,q1,median,q3,max,mean,std,outlier_count\n";
  summary_row(out, "accuracy", report.accuracy);
  summary_row(out, "iou", report.iou);
}

std::string format_confusion_matrix(const MetricsReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "oil %.4f %.4f\nbackground %.4f %.4f\n", r.oil_row[0],
                r.oil_row[1], r.background_row[0], r.background_row[1]);
  return buf;
}

}  // namespace dgnet
