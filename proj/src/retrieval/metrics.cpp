#include "scapv/retrieval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "scapv/numkit/errors.hpp"

namespace scapv::retrieval {

namespace {

constexpr double kUnitNormTolerance = 1e-6;

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::size_t RankedList::relevant_total() const {
  return static_cast<std::size_t>(std::count(relevant.begin(), relevant.end(), char{1}));
}

std::vector<RankedList> rank_all(std::span<const head::DescriptorRecord> db) {
  if (db.size() < 2) throw ContractError("rank_all needs at least 2 records, got " + std::to_string(db.size()));
  const std::size_t d = db.front().vector.size();
  for (const auto& r : db) {
    if (r.vector.size() != d) throw DimensionError("rank_all: mixed descriptor widths");
    double ss = 0.0;
    for (double v : r.vector) ss += v * v;
    if (std::abs(std::sqrt(ss) - 1.0) > kUnitNormTolerance) {
      throw ContractError("rank_all: descriptor '" + r.object_id + "' is not unit norm");
    }
  }
  std::vector<RankedList> lists;
  lists.reserve(db.size());
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t q = 0; q < db.size(); ++q) {
    scored.clear();
    for (std::size_t j = 0; j < db.size(); ++j) {
      if (j == q) continue;
      double dot = 0.0;
      for (std::size_t t = 0; t < d; ++t) dot += db[q].vector[t] * db[j].vector[t];
      scored.emplace_back(dot, j);
    }
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return db[a.second].object_id < db[b.second].object_id;
    });
    RankedList list;
    list.query_id = db[q].object_id;
    list.query_label = db[q].label;
    for (const auto& [score, j] : scored) {
      list.ids.push_back(db[j].object_id);
      list.relevant.push_back(db[j].label == db[q].label ? 1 : 0);
    }
    lists.push_back(std::move(list));
  }
  return lists;
}

double average_precision(const RankedList& list) {
  const std::size_t r = list.relevant_total();
  if (r == 0) return 0.0;
  double acc = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < list.relevant.size(); ++i) {
    if (list.relevant[i]) {
      ++hits;
      acc += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return acc / static_cast<double>(r);
}

double f1_at_n(const RankedList& list) {
  const std::size_t r = list.relevant_total();
  if (r == 0) return 0.0;
  const std::size_t n = std::min(r, list.relevant.size());
  const auto hits = static_cast<double>(std::count(list.relevant.begin(), list.relevant.begin() + static_cast<std::ptrdiff_t>(n), char{1}));
  const double precision = hits / static_cast<double>(n);
  const double recall = hits / static_cast<double>(r);
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

double ndcg_at_n(const RankedList& list) {
  const std::size_t r = list.relevant_total();
  if (r == 0) return 0.0;
  const std::size_t n = std::min(r, list.relevant.size());
  double dcg = 0.0, ideal = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double discount = 1.0 / std::log2(static_cast<double>(i) + 2.0);
    if (list.relevant[i]) dcg += discount;
    ideal += discount;
  }
  return dcg / ideal;
}

MetricReport aggregate_metrics(std::span<const RankedList> lists) {
  if (lists.empty()) throw ContractError("aggregate_metrics: empty corpus");
  MetricReport report;
  std::map<int, ClassMetrics> classes;
  for (const auto& list : lists) {
    const MetricValues v{f1_at_n(list), average_precision(list), ndcg_at_n(list)};
    report.micro.f1 += v.f1;
    report.micro.map += v.map;
    report.micro.ndcg += v.ndcg;
    auto& c = classes[list.query_label];
    c.label = list.query_label;
    ++c.queries;
    c.values.f1 += v.f1;
    c.values.map += v.map;
    c.values.ndcg += v.ndcg;
  }
  const auto nq = static_cast<double>(lists.size());
  report.micro = {report.micro.f1 / nq, report.micro.map / nq, report.micro.ndcg / nq};
  for (auto& [label, c] : classes) {
    const auto n = static_cast<double>(c.queries);
    c.values = {c.values.f1 / n, c.values.map / n, c.values.ndcg / n};
    report.macro.f1 += c.values.f1;
    report.macro.map += c.values.map;
    report.macro.ndcg += c.values.ndcg;
    report.per_class.push_back(c);
  }
  const auto nc = static_cast<double>(classes.size());
  report.macro = {report.macro.f1 / nc, report.macro.map / nc, report.macro.ndcg / nc};
  report.micro_macro = {(report.micro.f1 + report.macro.f1) / 2.0, (report.micro.map + report.macro.map) / 2.0,
                        (report.micro.ndcg + report.macro.ndcg) / 2.0};
  return report;
}

std::string format_report(const MetricReport& report) {
  std::string out = "setting\tF1@N\tmAP\tNDCG@N\n";
  auto row = [&](const std::string& name, const MetricValues& v) {
    out += name + "\t" + fixed6(v.f1) + "\t" + fixed6(v.map) + "\t" + fixed6(v.ndcg) + "\n";
  };
  row("micro", report.micro);
  row("macro", report.macro);
  row("micro+macro", report.micro_macro);
  out += "\nclass\tqueries\tF1@N\tmAP\tNDCG@N\n";
  for (const auto& c : report.per_class) {
    out += std::to_string(c.label) + "\t" + std::to_string(c.queries) + "\t" + fixed6(c.values.f1) + "\t" +
           fixed6(c.values.map) + "\t" + fixed6(c.values.ndcg) + "\n";
  }
  return out;
}

}  // namespace scapv::retrieval
