#include "probcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "probcal/errors.hpp"
#include "probcal/format.hpp"

namespace probcal {

namespace {

void check_inputs(std::span<const double> preds, std::span<const int> labels) {
  if (preds.empty()) throw std::invalid_argument("metrics need at least one prediction");
  if (preds.size() != labels.size())
    throw std::invalid_argument("predictions and labels differ in length");
  for (int y : labels)
    if (y != 0 && y != 1) throw std::invalid_argument("labels must be 0 or 1");
}

std::size_t bin_index(double p, std::size_t bins) {
  const auto b = static_cast<std::size_t>(std::floor(p * static_cast<double>(bins)));
  return std::min(b, bins - 1);
}

}  // namespace

std::vector<ReliabilityBin> reliability(std::span<const double> preds, std::span<const int> labels,
                                        std::size_t bins) {
  check_inputs(preds, labels);
  if (bins == 0) throw std::invalid_argument("need at least one bin");
  std::vector<ReliabilityBin> out(bins);
  std::vector<double> sum_pred(bins, 0.0);
  std::vector<double> sum_pos(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo = static_cast<double>(b) / static_cast<double>(bins);
    out[b].hi = static_cast<double>(b + 1) / static_cast<double>(bins);
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double p = preds[i];
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("predictions must lie in [0,1]");
    const std::size_t b = bin_index(p, bins);
    ++out[b].count;
    sum_pred[b] += p;
    sum_pos[b] += labels[i];
  }
  for (std::size_t b = 0; b < bins; ++b) {
    if (out[b].count == 0) continue;
    const auto n = static_cast<double>(out[b].count);
    out[b].mean_pred = sum_pred[b] / n;
    out[b].frac_pos = sum_pos[b] / n;
  }
  return out;
}

double ece(std::span<const double> preds, std::span<const int> labels, std::size_t bins) {
  const auto table = reliability(preds, labels, bins);
  double total = 0.0;
  for (const auto& bin : table) {
    if (bin.count == 0) continue;
    total += static_cast<double>(bin.count) * std::abs(bin.frac_pos - bin.mean_pred);
  }
  return total / static_cast<double>(preds.size());
}

double auroc(std::span<const double> preds, std::span<const int> labels) {
  check_inputs(preds, labels);
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return preds[a] < preds[b]; });

  // Mann-Whitney: sum of midranks of the positives.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && preds[order[j]] == preds[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = preds.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw UndefinedMetric("AUROC needs at least one positive and one negative label");
  const auto np = static_cast<double>(n_pos);
  const auto nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double accuracy(std::span<const double> preds, std::span<const int> labels, double threshold) {
  check_inputs(preds, labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    hits += static_cast<int>(preds[i] > threshold) == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

void write_reliability_csv(std::ostream& out, std::span<const ReliabilityBin> bins) {
  out << "bin_lo,bin_hi,count,mean_pred,frac_pos\n";
  for (const auto& b : bins)
    out << fmt_double(b.lo) << ',' << fmt_double(b.hi) << ',' << b.count << ','
        << fmt_double(b.mean_pred) << ',' << fmt_double(b.frac_pos) << '\n';
}

}  // namespace probcal
