#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "edgecal/trainer.hpp"

namespace edgecal {

enum class CalibratorKind { Temperature, Isotonic, Histogram, Bbq, EmbMlp, InNOut };

CalibratorKind calibrator_kind_from_string(const std::string& s);
std::string to_string(CalibratorKind k);

// Single global temperature minimizing NLL on the fit set.
double fit_temperature(const std::vector<double>& logits,
                       const std::vector<int>& labels);

// Isotonic regression step function fitted by pool-adjacent-violators.
struct IsotonicCalibrator {
  std::vector<double> breakpoints;  // sorted fit confidences
  std::vector<double> values;       // non-decreasing fitted values

  double predict(double confidence) const;
};

IsotonicCalibrator fit_isotonic(const std::vector<double>& confidences,
                                const std::vector<int>& labels);

// Equal-width binning; empty bins inherit their midpoint.
struct HistogramCalibrator {
  int n_bins = 15;
  std::vector<double> bin_values;

  double predict(double confidence) const;
};

HistogramCalibrator fit_histogram(const std::vector<double>& confidences,
                                  const std::vector<int>& labels, int n_bins = 15);

// Score-weighted ensemble of equal-frequency binning models with
// Beta(1,1) per-bin priors.
struct BbqModel {
  std::vector<double> edges;   // interior bin edges, ascending
  std::vector<double> values;  // posterior mean per bin, size edges.size()+1
};

struct BbqCalibrator {
  std::vector<BbqModel> models;
  std::vector<double> weights;  // sum to 1

  double predict(double confidence) const;
};

BbqCalibrator fit_bbq(const std::vector<double>& confidences,
                      const std::vector<int>& labels);

// Fitted post-hoc calibrator of any baseline variant; applies to scored edges.
// The Emb.+MLP and IN-N-OUT variants are fitted in their own modules and can
// be wrapped here for the shared apply/serialize surface.
struct FittedCalibrator {
  CalibratorKind kind = CalibratorKind::Temperature;
  double temperature = 1.0;
  IsotonicCalibrator isotonic;
  HistogramCalibrator histogram;
  BbqCalibrator bbq;
  bool fitted = false;

  // Fills the calibrated probability (and temperature where applicable).
  void apply(std::vector<ScoredEdge>& scored) const;

  nlohmann::json to_json() const;
  static FittedCalibrator from_json(const nlohmann::json& j);
};

FittedCalibrator fit_calibrator(CalibratorKind kind,
                                const std::vector<ScoredEdge>& fit_set);

}  // namespace edgecal
