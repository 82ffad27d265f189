#include "edgecal/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "edgecal/error.hpp"
#include "edgecal/metrics.hpp"

namespace edgecal {

using nlohmann::json;

CalibratorKind calibrator_kind_from_string(const std::string& s) {
  if (s == "temp") return CalibratorKind::Temperature;
  if (s == "iso") return CalibratorKind::Isotonic;
  if (s == "hist") return CalibratorKind::Histogram;
  if (s == "bbq") return CalibratorKind::Bbq;
  if (s == "embmlp") return CalibratorKind::EmbMlp;
  if (s == "innout") return CalibratorKind::InNOut;
  throw ContractError("unknown calibrator: " + s);
}

std::string to_string(CalibratorKind k) {
  switch (k) {
    case CalibratorKind::Temperature: return "temp";
    case CalibratorKind::Isotonic: return "iso";
    case CalibratorKind::Histogram: return "hist";
    case CalibratorKind::Bbq: return "bbq";
    case CalibratorKind::EmbMlp: return "embmlp";
    case CalibratorKind::InNOut: return "innout";
  }
  return "?";
}

double fit_temperature(const std::vector<double>& logits,
                       const std::vector<int>& labels) {
  if (logits.size() != labels.size() || logits.empty())
    throw ContractError("fit_temperature: bad input lengths");
  bool has_pos = false, has_neg = false;
  for (int y : labels) (y ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw ContractError("fit_temperature: both classes required");

  auto objective = [&](double log_t) {
    double t = std::exp(log_t);
    std::vector<double> probs(logits.size());
    for (size_t i = 0; i < logits.size(); ++i)
      probs[i] = stable_sigmoid(logits[i] / t);
    return nll(probs, labels);
  };

  // Golden-section search on log T in [-4, 4].
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = -4.0, b = 4.0;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = objective(c), fd = objective(d);
  while (b - a > 1e-6) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = objective(d);
    }
  }
  return std::exp((a + b) / 2.0);
}

IsotonicCalibrator fit_isotonic(const std::vector<double>& confidences,
                                const std::vector<int>& labels) {
  if (confidences.size() != labels.size() || confidences.size() < 2)
    throw ContractError("fit_isotonic: need at least 2 aligned samples");

  std::vector<size_t> order(confidences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return confidences[a] < confidences[b];
  });

  // Merge duplicate confidences so the step function is single-valued.
  std::vector<double> xs, ys, ws;
  for (size_t i : order) {
    if (!xs.empty() && xs.back() == confidences[i]) {
      ys.back() = (ys.back() * ws.back() + labels[i]) / (ws.back() + 1.0);
      ws.back() += 1.0;
    } else {
      xs.push_back(confidences[i]);
      ys.push_back(static_cast<double>(labels[i]));
      ws.push_back(1.0);
    }
  }

  // Pool-adjacent-violators on the weighted points.
  std::vector<double> val, w;
  std::vector<size_t> len;
  for (size_t i = 0; i < xs.size(); ++i) {
    val.push_back(ys[i]);
    w.push_back(ws[i]);
    len.push_back(1);
    while (val.size() > 1 && val[val.size() - 2] > val.back()) {
      double merged_w = w[w.size() - 2] + w.back();
      double merged_v =
          (val[val.size() - 2] * w[w.size() - 2] + val.back() * w.back()) /
          merged_w;
      val.pop_back();
      w.pop_back();
      size_t l = len.back();
      len.pop_back();
      val.back() = merged_v;
      w.back() = merged_w;
      len.back() += l;
    }
  }

  IsotonicCalibrator out;
  out.breakpoints = xs;
  out.values.reserve(xs.size());
  for (size_t b = 0; b < val.size(); ++b)
    for (size_t k = 0; k < len[b]; ++k) out.values.push_back(val[b]);
  return out;
}

double IsotonicCalibrator::predict(double confidence) const {
  if (breakpoints.empty()) throw ContractError("isotonic calibrator is unfitted");
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), confidence);
  if (it == breakpoints.begin()) return values.front();
  return values[static_cast<size_t>(it - breakpoints.begin()) - 1];
}

HistogramCalibrator fit_histogram(const std::vector<double>& confidences,
                                  const std::vector<int>& labels, int n_bins) {
  if (confidences.empty() || confidences.size() != labels.size())
    throw ContractError("fit_histogram: need at least 1 aligned sample");
  if (n_bins < 1) throw ContractError("fit_histogram: need at least one bin");
  HistogramCalibrator cal;
  cal.n_bins = n_bins;
  std::vector<long> count(n_bins, 0), pos(n_bins, 0);
  for (size_t i = 0; i < confidences.size(); ++i) {
    double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0))
      throw ContractError("fit_histogram: confidence outside [0,1]");
    int b = static_cast<int>(c * n_bins);
    if (b >= n_bins) b = n_bins - 1;
    count[b]++;
    pos[b] += labels[i];
  }
  cal.bin_values.resize(n_bins);
  for (int b = 0; b < n_bins; ++b)
    cal.bin_values[b] = count[b] > 0
                            ? static_cast<double>(pos[b]) / count[b]
                            : (b + 0.5) / n_bins;
  return cal;
}

double HistogramCalibrator::predict(double confidence) const {
  if (bin_values.empty()) throw ContractError("histogram calibrator is unfitted");
  int b = static_cast<int>(confidence * n_bins);
  if (b >= n_bins) b = n_bins - 1;
  if (b < 0) b = 0;
  return bin_values[b];
}

namespace {

BbqModel fit_bbq_model(const std::vector<double>& sorted_conf,
                       const std::vector<int>& labels_by_conf, int n_bins,
                       double* log_score) {
  size_t m = sorted_conf.size();
  BbqModel model;
  std::vector<size_t> starts;
  for (int b = 0; b < n_bins; ++b)
    starts.push_back(b * m / static_cast<size_t>(n_bins));
  starts.push_back(m);
  for (int b = 1; b < n_bins; ++b) {
    size_t s = starts[b];
    // midpoint edge between the neighboring sorted samples
    model.edges.push_back(s == 0 || s >= m
                              ? sorted_conf.back()
                              : 0.5 * (sorted_conf[s - 1] + sorted_conf[s]));
  }
  double score = 0.0;
  for (int b = 0; b < n_bins; ++b) {
    long n = 0, pos = 0;
    for (size_t i = starts[b]; i < starts[static_cast<size_t>(b) + 1]; ++i) {
      ++n;
      pos += labels_by_conf[i];
    }
    long neg = n - pos;
    model.values.push_back(static_cast<double>(pos + 1) /
                           static_cast<double>(n + 2));
    // Beta(1,1) marginal likelihood: pos! neg! / (n+1)!
    score += std::lgamma(static_cast<double>(pos) + 1.0) +
             std::lgamma(static_cast<double>(neg) + 1.0) -
             std::lgamma(static_cast<double>(n) + 2.0);
  }
  *log_score = score;
  return model;
}

}  // namespace

BbqCalibrator fit_bbq(const std::vector<double>& confidences,
                      const std::vector<int>& labels) {
  if (confidences.size() != labels.size() || confidences.size() < 10)
    throw ContractError("fit_bbq: need at least 10 aligned samples");
  size_t m = confidences.size();

  std::vector<size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return confidences[a] < confidences[b];
  });
  std::vector<double> sorted_conf(m);
  std::vector<int> sorted_labels(m);
  for (size_t i = 0; i < m; ++i) {
    sorted_conf[i] = confidences[order[i]];
    sorted_labels[i] = labels[order[i]];
  }

  // Geometric range of bin counts around sqrt(M): [sqrt(M)/2, 2 sqrt(M)].
  double root = std::sqrt(static_cast<double>(m));
  const int k_models = 5;
  std::vector<int> bin_counts;
  for (int i = 0; i < k_models; ++i) {
    double b = 0.5 * root * std::pow(4.0, static_cast<double>(i) / (k_models - 1));
    int bi = std::max(1, std::min(static_cast<int>(m),
                                  static_cast<int>(std::lround(b))));
    if (bin_counts.empty() || bin_counts.back() != bi) bin_counts.push_back(bi);
  }

  BbqCalibrator cal;
  std::vector<double> log_scores;
  for (int b : bin_counts) {
    double ls = 0.0;
    cal.models.push_back(fit_bbq_model(sorted_conf, sorted_labels, b, &ls));
    log_scores.push_back(ls);
  }
  double max_ls = *std::max_element(log_scores.begin(), log_scores.end());
  double total = 0.0;
  for (double ls : log_scores) total += std::exp(ls - max_ls);
  for (double ls : log_scores) cal.weights.push_back(std::exp(ls - max_ls) / total);
  return cal;
}

double BbqCalibrator::predict(double confidence) const {
  if (models.empty()) throw ContractError("bbq calibrator is unfitted");
  double acc = 0.0;
  for (size_t k = 0; k < models.size(); ++k) {
    const BbqModel& mo = models[k];
    size_t b = static_cast<size_t>(
        std::upper_bound(mo.edges.begin(), mo.edges.end(), confidence) -
        mo.edges.begin());
    acc += weights[k] * mo.values[b];
  }
  return acc;
}

FittedCalibrator fit_calibrator(CalibratorKind kind,
                                const std::vector<ScoredEdge>& fit_set) {
  std::vector<double> logits, probs;
  std::vector<int> labels;
  for (const ScoredEdge& s : fit_set) {
    if (s.label != 0 && s.label != 1)
      throw ContractError("fit_calibrator: unlabeled edge in fit set");
    logits.push_back(s.logit);
    probs.push_back(s.probability());
    labels.push_back(s.label);
  }
  FittedCalibrator cal;
  cal.kind = kind;
  switch (kind) {
    case CalibratorKind::Temperature:
      cal.temperature = fit_temperature(logits, labels);
      break;
    case CalibratorKind::Isotonic:
      cal.isotonic = fit_isotonic(probs, labels);
      break;
    case CalibratorKind::Histogram:
      cal.histogram = fit_histogram(probs, labels);
      break;
    case CalibratorKind::Bbq:
      cal.bbq = fit_bbq(probs, labels);
      break;
    default:
      throw ContractError("fit_calibrator handles the four classical variants only");
  }
  cal.fitted = true;
  return cal;
}

void FittedCalibrator::apply(std::vector<ScoredEdge>& scored) const {
  if (!fitted) throw ContractError("apply: calibrator is unfitted");
  for (ScoredEdge& s : scored) {
    switch (kind) {
      case CalibratorKind::Temperature:
        s.temperature = temperature;
        s.calibrated = stable_sigmoid(s.logit / temperature);
        break;
      case CalibratorKind::Isotonic:
        s.calibrated = isotonic.predict(s.probability());
        break;
      case CalibratorKind::Histogram:
        s.calibrated = histogram.predict(s.probability());
        break;
      case CalibratorKind::Bbq:
        s.calibrated = bbq.predict(s.probability());
        break;
      default:
        throw ContractError("apply: variant handled elsewhere");
    }
  }
}

json FittedCalibrator::to_json() const {
  if (!fitted) throw ContractError("to_json: calibrator is unfitted");
  json j{{"magic", "EDGECAL1"},
         {"kind", "calibrator"},
         {"variant", to_string(kind)}};
  switch (kind) {
    case CalibratorKind::Temperature:
      j["temperature"] = temperature;
      break;
    case CalibratorKind::Isotonic:
      j["breakpoints"] = isotonic.breakpoints;
      j["values"] = isotonic.values;
      break;
    case CalibratorKind::Histogram:
      j["n_bins"] = histogram.n_bins;
      j["bin_values"] = histogram.bin_values;
      break;
    case CalibratorKind::Bbq: {
      json models = json::array();
      for (const BbqModel& m : bbq.models)
        models.push_back({{"edges", m.edges}, {"values", m.values}});
      j["models"] = models;
      j["weights"] = bbq.weights;
      break;
    }
    default:
      throw ContractError("to_json: variant handled elsewhere");
  }
  return j;
}

FittedCalibrator FittedCalibrator::from_json(const json& j) {
  if (j.value("magic", "") != "EDGECAL1" || j.value("kind", "") != "calibrator")
    throw ContractError("not an EDGECAL1 calibrator file");
  FittedCalibrator cal;
  cal.kind = calibrator_kind_from_string(j.at("variant").get<std::string>());
  switch (cal.kind) {
    case CalibratorKind::Temperature:
      cal.temperature = j.at("temperature").get<double>();
      break;
    case CalibratorKind::Isotonic:
      cal.isotonic.breakpoints = j.at("breakpoints").get<std::vector<double>>();
      cal.isotonic.values = j.at("values").get<std::vector<double>>();
      break;
    case CalibratorKind::Histogram:
      cal.histogram.n_bins = j.at("n_bins").get<int>();
      cal.histogram.bin_values = j.at("bin_values").get<std::vector<double>>();
      break;
    case CalibratorKind::Bbq: {
      for (const auto& m : j.at("models")) {
        BbqModel model;
        model.edges = m.at("edges").get<std::vector<double>>();
        model.values = m.at("values").get<std::vector<double>>();
        cal.bbq.models.push_back(std::move(model));
      }
      cal.bbq.weights = j.at("weights").get<std::vector<double>>();
      break;
    }
    default:
      throw ContractError("from_json: variant handled elsewhere");
  }
  cal.fitted = true;
  return cal;
}

}  // namespace edgecal
