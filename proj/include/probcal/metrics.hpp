// Calibration and classification metrics for binary probability predictions.
//
// Bins are equal-width on [0,1], left-closed and right-open, except the last
// bin which also contains 1.0. AUROC counts tied pairs as one half. Accuracy
// predicts 1 iff pred > threshold (strict).
#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace probcal {

struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double mean_pred = 0.0;
  double frac_pos = 0.0;
};

std::vector<ReliabilityBin> reliability(std::span<const double> preds, std::span<const int> labels,
                                        std::size_t bins = 10);

/// Count-weighted mean of |frac_pos - mean_pred| over nonempty bins.
double ece(std::span<const double> preds, std::span<const int> labels, std::size_t bins = 10);

/// Throws UndefinedMetric when labels contain a single class.
double auroc(std::span<const double> preds, std::span<const int> labels);

double accuracy(std::span<const double> preds, std::span<const int> labels,
                double threshold = 0.5);

/// CSV with header `bin_lo,bin_hi,count,mean_pred,frac_pos`.
void write_reliability_csv(std::ostream& out, std::span<const ReliabilityBin> bins);

}  // namespace probcal
