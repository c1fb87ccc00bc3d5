#pragma once

#include <span>
#include <string>
#include <vector>

#include "scapv/head/head.hpp"

namespace scapv::retrieval {

// One query's ranking over every other record, most similar first.
struct RankedList {
  std::string query_id;
  int query_label = 0;
  std::vector<std::string> ids;
  std::vector<char> relevant;  // same class as the query

  // R: relevant records in the corpus, query excluded.
  std::size_t relevant_total() const;
};

// Ranks every record against all others by cosine similarity (the dot product
// of unit vectors), descending, ties by ascending object id. Throws
// ContractError for fewer than 2 records or a non-unit vector.
std::vector<RankedList> rank_all(std::span<const head::DescriptorRecord> db);

// (1/R) * sum of precision@k over relevant positions k; 0 when R = 0.
double average_precision(const RankedList& list);
// Harmonic mean of precision and recall over the top N = R; 0 when R = 0.
double f1_at_n(const RankedList& list);
// Binary-gain DCG over the top N = R, normalized by the ideal DCG; 0 when
// R = 0.
double ndcg_at_n(const RankedList& list);

struct MetricValues {
  double f1 = 0.0;
  double map = 0.0;
  double ndcg = 0.0;
};

struct ClassMetrics {
  int label = 0;
  std::size_t queries = 0;
  MetricValues values;
};

struct MetricReport {
  MetricValues micro;        // mean over queries
  MetricValues macro;        // mean over classes of per-class query means
  MetricValues micro_macro;  // (micro + macro) / 2
  std::vector<ClassMetrics> per_class;  // ascending label
};

MetricReport aggregate_metrics(std::span<const RankedList> lists);

// Tab-separated report, 6 decimal places:
//   setting  F1@N  mAP  NDCG@N       (micro, macro, micro+macro)
// followed by a blank line and the per-class table
//   class  queries  F1@N  mAP  NDCG@N
std::string format_report(const MetricReport& report);

}  // namespace scapv::retrieval
