#pragma once

#include <string>
#include <vector>

namespace edgecal {

// One confidence bin [lo, hi) (last bin closed at 1).
struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  double mean_confidence = 0.0;  // 0 for empty bins
  double frac_positive = 0.0;    // 0 for empty bins
  long count = 0;
};

struct ReliabilityDiagram {
  std::vector<ReliabilityBin> bins;
  long total = 0;

  // ECE recomputed from the binned statistics; equals ece() on the same data.
  double ece() const;
  std::string to_csv() const;
  std::string to_svg() const;
};

// Eq.-style expected calibration error over equal-width bins on [0,1].
// Returned in [0,1]; multiply by 100 for table-style reporting.
double ece(const std::vector<double>& confidences, const std::vector<int>& labels,
           int n_bins);

ReliabilityDiagram reliability_diagram(const std::vector<double>& confidences,
                                       const std::vector<int>& labels, int n_bins);

// Sum-form negative log-likelihood; confidences clipped to
// [1e-12, 1 - 1e-12] before the logs.
double nll(const std::vector<double>& confidences, const std::vector<int>& labels);

// Mean of -(2y-1) * p over the set.
double confidence_penalty(const std::vector<double>& calibrated,
                          const std::vector<int>& labels);

// L_NLL + L_Cal + lambda * L_ECE with the per-term values retained.
struct LossBreakdown {
  double nll = 0.0;
  double cal = 0.0;
  double ece = 0.0;
  double lambda = 0.0;
  double total() const { return nll + cal + lambda * ece; }
};

LossBreakdown loss_breakdown(const std::vector<double>& calibrated,
                             const std::vector<int>& labels, double lambda,
                             int ece_bins = 15);

}  // namespace edgecal
