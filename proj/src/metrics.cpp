#include "edgecal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "edgecal/error.hpp"

namespace edgecal {

namespace {

void check_inputs(const std::vector<double>& confidences,
                  const std::vector<int>& labels) {
  if (confidences.empty()) throw ContractError("empty confidence list");
  if (confidences.size() != labels.size())
    throw ContractError("confidence/label length mismatch");
  for (double c : confidences)
    if (!(c >= 0.0 && c <= 1.0))
      throw ContractError("confidence outside [0,1]: " + std::to_string(c));
  for (int y : labels)
    if (y != 0 && y != 1) throw ContractError("label must be 0 or 1");
}

int bin_of(double c, int n_bins) {
  int b = static_cast<int>(c * n_bins);
  return b >= n_bins ? n_bins - 1 : b;
}

}  // namespace

double ece(const std::vector<double>& confidences, const std::vector<int>& labels,
           int n_bins) {
  check_inputs(confidences, labels);
  if (n_bins < 1) throw ContractError("ece: need at least one bin");
  std::vector<double> resid(n_bins, 0.0);
  for (size_t i = 0; i < confidences.size(); ++i)
    resid[bin_of(confidences[i], n_bins)] += labels[i] - confidences[i];
  double acc = 0.0;
  for (double r : resid) acc += std::fabs(r);
  return acc / static_cast<double>(confidences.size());
}

ReliabilityDiagram reliability_diagram(const std::vector<double>& confidences,
                                       const std::vector<int>& labels,
                                       int n_bins) {
  check_inputs(confidences, labels);
  if (n_bins < 1) throw ContractError("reliability_diagram: need at least one bin");
  ReliabilityDiagram d;
  d.total = static_cast<long>(confidences.size());
  d.bins.resize(n_bins);
  std::vector<double> conf_sum(n_bins, 0.0);
  std::vector<long> pos(n_bins, 0);
  for (size_t i = 0; i < confidences.size(); ++i) {
    int b = bin_of(confidences[i], n_bins);
    d.bins[b].count += 1;
    conf_sum[b] += confidences[i];
    pos[b] += labels[i];
  }
  for (int b = 0; b < n_bins; ++b) {
    d.bins[b].lo = static_cast<double>(b) / n_bins;
    d.bins[b].hi = static_cast<double>(b + 1) / n_bins;
    if (d.bins[b].count > 0) {
      d.bins[b].mean_confidence = conf_sum[b] / d.bins[b].count;
      d.bins[b].frac_positive = static_cast<double>(pos[b]) / d.bins[b].count;
    }
  }
  return d;
}

double ReliabilityDiagram::ece() const {
  double acc = 0.0;
  for (const ReliabilityBin& b : bins)
    acc += static_cast<double>(b.count) *
           std::fabs(b.frac_positive - b.mean_confidence);
  return total > 0 ? acc / static_cast<double>(total) : 0.0;
}

std::string ReliabilityDiagram::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "bin_lo,bin_hi,mean_conf,frac_pos,count\n";
  for (const ReliabilityBin& b : bins)
    os << b.lo << "," << b.hi << "," << b.mean_confidence << ","
       << b.frac_positive << "," << b.count << "\n";
  return os.str();
}

std::string ReliabilityDiagram::to_svg() const {
  const double w = 360, h = 360, pad = 40;
  auto px = [&](double x) { return pad + x * (w - 2 * pad); };
  auto py = [&](double y) { return h - pad - y * (h - 2 * pad); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
     << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1)
     << "\" y2=\"" << py(1)
     << "\" stroke=\"#999\" stroke-dasharray=\"4,4\"/>\n";
  os << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1)
     << "\" y2=\"" << py(0) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(0)
     << "\" y2=\"" << py(1) << "\" stroke=\"black\"/>\n";
  bool first = true;
  std::ostringstream path;
  for (const ReliabilityBin& b : bins) {
    if (b.count == 0) continue;
    path << (first ? "M" : "L") << px(b.mean_confidence) << " "
         << py(b.frac_positive) << " ";
    first = false;
  }
  if (!first)
    os << "<path d=\"" << path.str()
       << "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
  for (const ReliabilityBin& b : bins) {
    if (b.count == 0) continue;
    os << "<circle cx=\"" << px(b.mean_confidence) << "\" cy=\""
       << py(b.frac_positive) << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
  }
  os << "<text x=\"" << w / 2 << "\" y=\"" << h - 8
     << "\" text-anchor=\"middle\" font-size=\"12\">mean confidence</text>\n";
  os << "<text x=\"12\" y=\"" << h / 2
     << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 12 "
     << h / 2 << ")\">frequency of positives</text>\n";
  os << "</svg>\n";
  return os.str();
}

double nll(const std::vector<double>& confidences, const std::vector<int>& labels) {
  check_inputs(confidences, labels);
  const double eps = 1e-12;
  double acc = 0.0;
  for (size_t i = 0; i < confidences.size(); ++i) {
    double p = std::min(std::max(confidences[i], eps), 1.0 - eps);
    acc += labels[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  return acc;
}

double confidence_penalty(const std::vector<double>& calibrated,
                          const std::vector<int>& labels) {
  check_inputs(calibrated, labels);
  double acc = 0.0;
  for (size_t i = 0; i < calibrated.size(); ++i)
    acc += -(2.0 * labels[i] - 1.0) * calibrated[i];
  return acc / static_cast<double>(calibrated.size());
}

LossBreakdown loss_breakdown(const std::vector<double>& calibrated,
                             const std::vector<int>& labels, double lambda,
                             int ece_bins) {
  if (lambda <= 0.0) throw ContractError("lambda must be positive");
  LossBreakdown lb;
  lb.nll = nll(calibrated, labels);
  lb.cal = confidence_penalty(calibrated, labels);
  lb.ece = ece(calibrated, labels, ece_bins);
  lb.lambda = lambda;
  return lb;
}

}  // namespace edgecal
