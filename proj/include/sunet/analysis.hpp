// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sunet/synthdata.hpp"

namespace sunet {

struct SentenceRecord {
  std::string sample_id;
  int slice_index = 0;
  std::vector<int> ids;
  std::string mode = "infer";
};

// JSONL, one object per line: {"sample_id","slice_index","ids","mode"}.
void write_sentences_jsonl(const std::filesystem::path& path, const std::vector<SentenceRecord>& records);
std::vector<SentenceRecord> read_sentences_jsonl(const std::filesystem::path& path);

struct AnalysisRecord {
  std::string sample_id;
  int slice_index = 0;
  std::vector<int> ids;
  RegionStats stats;
};

class JoinError : public std::runtime_error {
 public:
  JoinError(const std::string& what, std::vector<std::string> unmatched)
      : std::runtime_error(what), unmatched_(std::move(unmatched)) {}
  const std::vector<std::string>& unmatched() const noexcept { return unmatched_; }

 private:
  std::vector<std::string> unmatched_;
};

/// Joins on (sample_id, slice_index). Every sentence must match exactly one
/// stats row and every stats row one sentence; all sentences share one
/// length. Unmatched keys ("id/slice") are listed in the JoinError.
std::vector<AnalysisRecord> join_records(const std::vector<SentenceRecord>& sentences,
                                         const std::vector<StatsRow>& stats);

/// One-hot design for the symbol at 1-based position k. Ids seen fewer than
/// min_count times pool into OTHER; the most frequent level (ties: smaller
/// id, OTHER last) is the dropped reference.
struct PositionDesign {
  Eigen::MatrixXd X;                // rows x columns, no intercept column
  std::vector<std::string> columns;  // symbol id as text, or "OTHER"
  std::string reference;
};
inline constexpr int kOtherLevel = -1;
PositionDesign encode_position(const std::vector<std::vector<int>>& sentences, std::size_t k, std::size_t min_count);

struct LinearFit {
  Eigen::VectorXd coef;  // intercept first
  double r2 = 0.0;
};
/// Least squares with intercept via ridge-jittered (1e-8) normal equations.
/// r2 is the squared Pearson correlation of fitted and observed values, 0 when
/// either is constant.
LinearFit fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

struct LogisticFit {
  Eigen::VectorXd coef;  // intercept first
  double log_likelihood = 0.0;       // unpenalized, at the penalized optimum
  double null_log_likelihood = 0.0;  // intercept-only MLE
  double pseudo_r2 = 0.0;            // McFadden
  std::size_t iterations = 0;
  std::vector<double> objective_trace;  // penalized negative log-likelihood per iterate
};
/// Penalized Bernoulli MLE by Newton iterations, falling back to a gradient
/// step when the Hessian is not positive definite; backtracking keeps the
/// objective nonincreasing. Penalty 0.5 * l2 * |w|^2, intercept excluded.
/// Throws DegenerateOutcome when y holds a single class.
LogisticFit fit_logistic(const Eigen::MatrixXd& X, const std::vector<int>& y, double l2 = 1e-4);

struct MultinomialFit {
  std::vector<std::string> classes;  // classes[0] is the reference
  Eigen::MatrixXd coef;              // (K-1) x (1 + columns), intercept first
  double log_likelihood = 0.0;
  double null_log_likelihood = 0.0;
  double pseudo_r2 = 0.0;
  std::size_t iterations = 0;
  std::vector<double> objective_trace;
};
/// Penalized multinomial logit against the most frequent class (ties:
/// lexicographically smaller), by gradient ascent with backtracking line search.
MultinomialFit fit_multinomial(const Eigen::MatrixXd& X, const std::vector<std::string>& y, double l2 = 1e-4,
                               std::size_t max_iterations = 20000);

enum class ModelKind { Linear, BinaryLogistic, MultinomialLogistic };
std::string to_string(ModelKind k);

struct PositionStat {
  std::size_t position = 0;  // 1-based
  double statistic = 0.0;
};

struct RegressionReport {
  std::string outcome;
  ModelKind kind = ModelKind::Linear;
  std::vector<PositionStat> positions;
  std::size_t best_position = 0;  // 0 when skipped
  std::string skip_reason;        // nonempty when skipped

  bool skipped() const { return !skip_reason.empty(); }
};

struct AnalysisOptions {
  std::size_t min_count = 5;
  double l2 = 1e-4;
  std::size_t max_k = 2;
  double min_coverage = 0.2;
};

/// Tumor on every record; Area, Eccentricity, Laterality, Location and extra
/// columns only where a tumour is present. S* is the first position with the
/// largest statistic. Records are processed in (sample_id, slice) order.
std::vector<RegressionReport> table2_report(std::vector<AnalysisRecord> records, const AnalysisOptions& options);

void write_table2_csv(const std::filesystem::path& path, const std::vector<RegressionReport>& reports);

struct Pattern {
  std::vector<int> prefix;
  std::size_t support = 0;  // class records matching the prefix
  double coverage = 0.0;    // support / class size
  double purity = 0.0;      // support / all records matching the prefix
};

struct ClassPatterns {
  std::string label;
  std::size_t class_size = 0;
  std::vector<Pattern> patterns;
};

/// Per class, the maximal prefixes of length 1..max_k with coverage >=
/// min_coverage and purity > 0.9, sorted by coverage then prefix.
std::vector<ClassPatterns> mine_prefixes(const std::vector<std::vector<int>>& sentences,
                                         const std::vector<std::string>& labels, std::size_t max_k,
                                         double min_coverage);

std::string format_prefix(const std::vector<int>& prefix);  // "657, 653, *"
// class<TAB>pattern<TAB>coverage<TAB>purity per line.
void write_patterns(const std::filesystem::path& path, const std::vector<ClassPatterns>& patterns);

}  // namespace sunet
