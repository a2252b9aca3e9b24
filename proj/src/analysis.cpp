// SPDX-License-Identifier: Apache-2.0
#include "sunet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include "json.hpp"
#include <set>
#include <tuple>

#include "sunet/errors.hpp"

namespace sunet {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Sentence log I/O and join

void write_sentences_jsonl(const std::filesystem::path& path, const std::vector<SentenceRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const SentenceRecord& r : records) {
    nlohmann::ordered_json j;
    j["sample_id"] = r.sample_id;
    j["slice_index"] = r.slice_index;
    j["ids"] = r.ids;
    j["mode"] = r.mode;
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<SentenceRecord> read_sentences_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string file = path.string();
  std::vector<SentenceRecord> out;
  std::size_t start = 0;
  while (start < data.size()) {
    std::size_t end = data.find('\n', start);
    if (end == std::string::npos) end = data.size();
    const std::string line = data.substr(start, end - start);
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(file, start + (e.byte > 0 ? e.byte - 1 : 0), "invalid JSON");
      }
      try {
        SentenceRecord r;
        r.sample_id = j.at("sample_id").get<std::string>();
        r.slice_index = j.at("slice_index").get<int>();
        r.ids = j.at("ids").get<std::vector<int>>();
        if (j.contains("mode")) r.mode = j.at("mode").get<std::string>();
        out.push_back(std::move(r));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(file, start, std::string("bad sentence record: ") + e.what());
      }
    }
    start = end + 1;
  }
  return out;
}

std::vector<AnalysisRecord> join_records(const std::vector<SentenceRecord>& sentences,
                                         const std::vector<StatsRow>& stats) {
  auto key = [](const std::string& id, int slice) { return id + "/" + std::to_string(slice); };
  std::map<std::string, const StatsRow*> by_key;
  std::vector<std::string> unmatched;
  for (const StatsRow& r : stats) {
    if (!by_key.emplace(key(r.sample_id, r.slice_index), &r).second) {
      unmatched.push_back("duplicate stats row " + key(r.sample_id, r.slice_index));
    }
  }
  std::set<std::string> used;
  std::vector<AnalysisRecord> out;
  for (const SentenceRecord& s : sentences) {
    const std::string k = key(s.sample_id, s.slice_index);
    const auto it = by_key.find(k);
    if (it == by_key.end()) {
      unmatched.push_back("sentence " + k);
      continue;
    }
    if (!used.insert(k).second) {
      unmatched.push_back("duplicate sentence " + k);
      continue;
    }
    out.push_back({s.sample_id, s.slice_index, s.ids, it->second->stats});
  }
  for (const auto& [k, row] : by_key) {
    if (!used.contains(k)) unmatched.push_back("stats " + k);
  }
  if (!unmatched.empty()) {
    std::string msg = "cannot join sentences with stats; unmatched:";
    for (const auto& u : unmatched) msg += " " + u;
    throw JoinError(msg, unmatched);
  }
  if (out.empty()) throw JoinError("no records to analyze", {});
  for (const auto& r : out) {
    if (r.ids.size() != out.front().ids.size() || r.ids.empty()) {
      throw JoinError("sentences differ in length (" + key(r.sample_id, r.slice_index) + ")", {});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoding

PositionDesign encode_position(const std::vector<std::vector<int>>& sentences, std::size_t k, std::size_t min_count) {
  if (sentences.empty()) throw std::invalid_argument("encode_position: empty sentence log");
  if (k < 1) throw std::invalid_argument("encode_position: positions are 1-based");
  std::map<int, std::size_t> counts;
  for (const auto& s : sentences) {
    if (k > s.size()) throw std::invalid_argument("encode_position: k exceeds sentence length");
    ++counts[s[k - 1]];
  }
  std::map<int, int> level_of;  // id -> level id (itself or OTHER)
  std::map<int, std::size_t> level_count;
  for (const auto& [id, c] : counts) {
    const int level = c >= min_count ? id : kOtherLevel;
    level_of[id] = level;
    level_count[level] += c;
  }
  // Most frequent; ties to the smaller id with OTHER ranked last.
  auto rank = [](int level) { return level == kOtherLevel ? std::numeric_limits<long long>::max() : level; };
  int reference = level_count.begin()->first;
  for (const auto& [level, c] : level_count) {
    const std::size_t best = level_count[reference];
    if (c > best || (c == best && rank(level) < rank(reference))) reference = level;
  }
  std::vector<int> columns;
  for (const auto& [level, c] : level_count) {
    if (level != reference && level != kOtherLevel) columns.push_back(level);
  }
  if (reference != kOtherLevel && level_count.contains(kOtherLevel)) columns.push_back(kOtherLevel);

  PositionDesign d;
  d.X = MatrixXd::Zero(static_cast<Eigen::Index>(sentences.size()), static_cast<Eigen::Index>(columns.size()));
  std::map<int, Eigen::Index> col_of;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    col_of[columns[c]] = static_cast<Eigen::Index>(c);
    d.columns.push_back(columns[c] == kOtherLevel ? "OTHER" : std::to_string(columns[c]));
  }
  d.reference = reference == kOtherLevel ? "OTHER" : std::to_string(reference);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto it = col_of.find(level_of[sentences[i][k - 1]]);
    if (it != col_of.end()) d.X(static_cast<Eigen::Index>(i), it->second) = 1.0;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Fits

namespace {

MatrixXd with_intercept(const MatrixXd& X) {
  MatrixXd Z(X.rows(), X.cols() + 1);
  Z.col(0).setOnes();
  Z.rightCols(X.cols()) = X;
  return Z;
}

// log(1 + exp(x)) without overflow
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double pearson_sq(const VectorXd& a, const VectorXd& b) {
  const VectorXd da = a.array() - a.mean();
  const VectorXd db = b.array() - b.mean();
  const double saa = da.squaredNorm(), sbb = db.squaredNorm();
  // Treat numerically constant vectors as constant.
  if (saa <= 1e-24 * std::max(1.0, a.squaredNorm()) || sbb <= 1e-24 * std::max(1.0, b.squaredNorm())) return 0.0;
  const double r = da.dot(db) / std::sqrt(saa * sbb);
  return std::min(1.0, r * r);
}

double mcfadden(double ll, double ll0) {
  if (ll0 >= 0.0) return 0.0;
  return std::clamp(1.0 - ll / ll0, 0.0, 1.0);
}

}  // namespace

LinearFit fit_linear(const MatrixXd& X, const VectorXd& y) {
  if (X.rows() != y.size()) throw ShapeError("fit_linear: X has " + std::to_string(X.rows()) + " rows, y has " +
                                             std::to_string(y.size()));
  if (y.size() < X.cols() + 1) throw ShapeError("fit_linear: need at least columns + 1 rows");
  const MatrixXd Z = with_intercept(X);
  MatrixXd A = Z.transpose() * Z;
  A.diagonal().array() += 1e-8;
  LinearFit f;
  f.coef = A.ldlt().solve(Z.transpose() * y);
  f.r2 = pearson_sq(Z * f.coef, y);
  return f;
}

LogisticFit fit_logistic(const MatrixXd& X, const std::vector<int>& y, double l2) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (X.rows() != n) throw ShapeError("fit_logistic: X rows differ from y length");
  if (n == 0) throw DegenerateOutcome("degenerate outcome: no records");
  double positives = 0;
  for (int v : y) {
    if (v != 0 && v != 1) throw std::invalid_argument("fit_logistic: y must be 0/1");
    positives += v;
  }
  if (positives == 0 || positives == double(n)) throw DegenerateOutcome("degenerate outcome: single class");
  if (l2 < 0) throw std::invalid_argument("fit_logistic: l2 must be >= 0");

  const MatrixXd Z = with_intercept(X);
  const Eigen::Index p = Z.cols();
  VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[static_cast<std::size_t>(i)];
  VectorXd penalty = VectorXd::Constant(p, l2);
  penalty(0) = 0.0;

  auto loglik = [&](const VectorXd& beta) {
    const VectorXd eta = Z * beta;
    double ll = 0;
    for (Eigen::Index i = 0; i < n; ++i) ll += yv(i) * eta(i) - softplus(eta(i));
    return ll;
  };
  auto objective = [&](const VectorXd& beta) {
    return -loglik(beta) + 0.5 * (penalty.array() * beta.array().square()).sum();
  };

  const double ybar = positives / double(n);
  LogisticFit f;
  f.null_log_likelihood = positives * std::log(ybar) + (double(n) - positives) * std::log(1.0 - ybar);
  VectorXd beta = VectorXd::Zero(p);
  beta(0) = std::log(ybar / (1.0 - ybar));
  double obj = objective(beta);
  f.objective_trace.push_back(obj);

  for (std::size_t it = 0; it < 100; ++it) {
    const VectorXd eta = Z * beta;
    VectorXd mu(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = 1.0 / (1.0 + std::exp(-eta(i)));
      w(i) = mu(i) * (1.0 - mu(i));
    }
    const VectorXd grad = Z.transpose() * (mu - yv) + penalty.cwiseProduct(beta);
    if (grad.norm() < 1e-8) break;
    MatrixXd H = Z.transpose() * w.asDiagonal() * Z;
    H.diagonal() += penalty;
    Eigen::LLT<MatrixXd> llt(H);
    VectorXd dir = llt.info() == Eigen::Success ? VectorXd(-llt.solve(grad)) : VectorXd(-grad);
    if (!dir.allFinite() || grad.dot(dir) >= 0) dir = -grad;
    double step = 1.0, trial = objective(beta + dir);
    while (trial > obj + 1e-4 * step * grad.dot(dir) && step > 1e-12) {
      step *= 0.5;
      trial = objective(beta + step * dir);
    }
    ++f.iterations;
    if (!(trial <= obj)) break;
    beta += step * dir;
    obj = trial;
    f.objective_trace.push_back(obj);
  }
  f.coef = beta;
  f.log_likelihood = loglik(beta);
  f.pseudo_r2 = mcfadden(f.log_likelihood, f.null_log_likelihood);
  return f;
}

MultinomialFit fit_multinomial(const MatrixXd& X, const std::vector<std::string>& y, double l2,
                               std::size_t max_iterations) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (X.rows() != n) throw ShapeError("fit_multinomial: X rows differ from y length");
  if (l2 < 0) throw std::invalid_argument("fit_multinomial: l2 must be >= 0");
  std::map<std::string, std::size_t> counts;
  for (const auto& v : y) ++counts[v];
  if (counts.size() < 2) throw DegenerateOutcome("degenerate outcome: single class");

  MultinomialFit f;
  std::string reference = counts.begin()->first;
  for (const auto& [label, c] : counts) {
    if (c > counts[reference]) reference = label;
  }
  f.classes.push_back(reference);
  for (const auto& [label, c] : counts) {
    if (label != reference) f.classes.push_back(label);
  }
  const auto K1 = static_cast<Eigen::Index>(f.classes.size() - 1);
  std::map<std::string, Eigen::Index> index_of;
  for (std::size_t k = 0; k < f.classes.size(); ++k) index_of[f.classes[k]] = static_cast<Eigen::Index>(k) - 1;

  const MatrixXd Z = with_intercept(X);
  const Eigen::Index p = Z.cols();
  MatrixXd Y = MatrixXd::Zero(n, K1);
  std::vector<Eigen::Index> cls(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    cls[static_cast<std::size_t>(i)] = index_of[y[static_cast<std::size_t>(i)]];
    if (cls[static_cast<std::size_t>(i)] >= 0) Y(i, cls[static_cast<std::size_t>(i)]) = 1.0;
  }
  MatrixXd penalty = MatrixXd::Constant(K1, p, l2);
  penalty.col(0).setZero();

  // B is (K-1) x p; eta = Z B^T.
  auto loglik_and_probs = [&](const MatrixXd& B, MatrixXd* P) {
    const MatrixXd eta = Z * B.transpose();
    double ll = 0;
    if (P) P->resize(n, K1);
    for (Eigen::Index i = 0; i < n; ++i) {
      double mx = 0.0;
      for (Eigen::Index k = 0; k < K1; ++k) mx = std::max(mx, eta(i, k));
      double denom = std::exp(-mx);
      for (Eigen::Index k = 0; k < K1; ++k) denom += std::exp(eta(i, k) - mx);
      const double lse = mx + std::log(denom);
      const Eigen::Index c = cls[static_cast<std::size_t>(i)];
      ll += (c >= 0 ? eta(i, c) : 0.0) - lse;
      if (P) {
        for (Eigen::Index k = 0; k < K1; ++k) (*P)(i, k) = std::exp(eta(i, k) - lse);
      }
    }
    return ll;
  };
  auto objective = [&](const MatrixXd& B) {
    return -loglik_and_probs(B, nullptr) + 0.5 * (penalty.array() * B.array().square()).sum();
  };

  const double n_ref = double(counts[reference]);
  f.null_log_likelihood = 0;
  for (const auto& [label, c] : counts) f.null_log_likelihood += double(c) * std::log(double(c) / double(n));

  MatrixXd B = MatrixXd::Zero(K1, p);
  for (Eigen::Index k = 0; k < K1; ++k) {
    B(k, 0) = std::log(double(counts[f.classes[static_cast<std::size_t>(k + 1)]]) / n_ref);
  }
  MatrixXd P;
  double obj = -loglik_and_probs(B, &P) + 0.5 * (penalty.array() * B.array().square()).sum();
  f.objective_trace.push_back(obj);
  MatrixXd grad = (P - Y).transpose() * Z + penalty.cwiseProduct(B);
  MatrixXd prev_B, prev_grad;
  double step0 = 1.0 / std::max(1.0, double(n));

  for (std::size_t it = 0; it < max_iterations; ++it) {
    if (grad.norm() < 1e-8) break;
    // Barzilai-Borwein trial step, then Armijo backtracking along -grad.
    if (it > 0) {
      const MatrixXd s = B - prev_B, g = grad - prev_grad;
      const double sg = (s.array() * g.array()).sum();
      if (sg > 0) step0 = (s.array() * s.array()).sum() / sg;
    }
    const double gg = grad.squaredNorm();
    double step = step0, trial = objective(B - step * grad);
    while (trial > obj - 1e-4 * step * gg && step > 1e-20) {
      step *= 0.5;
      trial = objective(B - step * grad);
    }
    ++f.iterations;
    if (!(trial <= obj)) break;
    prev_B = B;
    prev_grad = grad;
    B -= step * grad;
    obj = -loglik_and_probs(B, &P) + 0.5 * (penalty.array() * B.array().square()).sum();
    f.objective_trace.push_back(obj);
    grad = (P - Y).transpose() * Z + penalty.cwiseProduct(B);
  }
  f.coef = B;
  f.log_likelihood = loglik_and_probs(B, nullptr);
  f.pseudo_r2 = mcfadden(f.log_likelihood, f.null_log_likelihood);
  return f;
}

// ---------------------------------------------------------------------------
// Per-position regression report

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Linear: return "linear";
    case ModelKind::BinaryLogistic: return "binary_logistic";
    default: return "multinomial_logistic";
  }
}

namespace {

struct Outcome {
  std::string name;
  ModelKind kind;
  bool present_only;
  std::function<double(const RegionStats&)> numeric;
  std::function<std::string(const RegionStats&)> label;
};

RegressionReport run_outcome(const Outcome& o, const std::vector<const AnalysisRecord*>& rows,
                             const AnalysisOptions& opt) {
  RegressionReport rep;
  rep.outcome = o.name;
  rep.kind = o.kind;
  if (rows.size() < 2) {
    rep.skip_reason = "fewer than 2 records";
    return rep;
  }
  std::vector<std::vector<int>> sentences;
  for (const auto* r : rows) sentences.push_back(r->ids);
  std::vector<std::string> labels;
  VectorXd values(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (o.kind == ModelKind::Linear) values(static_cast<Eigen::Index>(i)) = o.numeric(rows[i]->stats);
    else labels.push_back(o.label(rows[i]->stats));
  }
  if (o.kind != ModelKind::Linear && std::set<std::string>(labels.begin(), labels.end()).size() < 2) {
    rep.skip_reason = "fewer than 2 levels";
    return rep;
  }
  const std::size_t length = sentences.front().size();
  for (std::size_t k = 1; k <= length; ++k) {
    const PositionDesign d = encode_position(sentences, k, opt.min_count);
    double stat = 0.0;
    switch (o.kind) {
      case ModelKind::Linear:
        stat = fit_linear(d.X, values).r2;
        break;
      case ModelKind::BinaryLogistic: {
        std::vector<int> y;
        for (const auto& l : labels) y.push_back(l == "1" ? 1 : 0);
        stat = fit_logistic(d.X, y, opt.l2).pseudo_r2;
        break;
      }
      case ModelKind::MultinomialLogistic:
        stat = fit_multinomial(d.X, labels, opt.l2).pseudo_r2;
        break;
    }
    rep.positions.push_back({k, stat});
  }
  rep.best_position = rep.positions.front().position;
  double best = rep.positions.front().statistic;
  for (const auto& ps : rep.positions) {
    if (ps.statistic > best) {
      best = ps.statistic;
      rep.best_position = ps.position;
    }
  }
  return rep;
}

}  // namespace

std::vector<RegressionReport> table2_report(std::vector<AnalysisRecord> records, const AnalysisOptions& options) {
  if (records.empty()) throw std::invalid_argument("table2_report: empty log");
  std::sort(records.begin(), records.end(), [](const AnalysisRecord& a, const AnalysisRecord& b) {
    return std::tie(a.sample_id, a.slice_index) < std::tie(b.sample_id, b.slice_index);
  });
  std::vector<Outcome> outcomes{
      {"Tumor", ModelKind::BinaryLogistic, false, {}, [](const RegionStats& s) { return s.present ? "1" : "0"; }},
      {"Area", ModelKind::Linear, true, [](const RegionStats& s) { return double(s.area); }, {}},
      {"Eccentricity", ModelKind::Linear, true, [](const RegionStats& s) { return s.eccentricity; }, {}},
      {"Laterality", ModelKind::MultinomialLogistic, true, {},
       [](const RegionStats& s) { return to_string(s.laterality); }},
      {"Location", ModelKind::MultinomialLogistic, true, {},
       [](const RegionStats& s) { return to_string(s.location); }},
  };
  std::vector<std::string> extras;
  for (const auto& [name, value] : records.front().stats.extra) extras.push_back(name);
  for (std::size_t e = 0; e < extras.size(); ++e) {
    outcomes.push_back({extras[e], ModelKind::MultinomialLogistic, true, {}, [e, name = extras[e]](const RegionStats& s) {
                          if (e >= s.extra.size() || s.extra[e].first != name) {
                            throw std::invalid_argument("records disagree on extra column " + name);
                          }
                          return s.extra[e].second;
                        }});
  }

  std::vector<const AnalysisRecord*> all, present;
  for (const auto& r : records) {
    all.push_back(&r);
    if (r.stats.present) present.push_back(&r);
  }
  std::vector<RegressionReport> out;
  for (const Outcome& o : outcomes) out.push_back(run_outcome(o, o.present_only ? present : all, options));
  return out;
}

void write_table2_csv(const std::filesystem::path& path, const std::vector<RegressionReport>& reports) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "outcome,model_kind,position,statistic,is_best\n";
  char buf[64];
  for (const auto& r : reports) {
    if (r.skipped()) {
      out << r.outcome << ',' << to_string(r.kind) << ",NA,NA,0\n";
      continue;
    }
    for (const auto& ps : r.positions) {
      std::snprintf(buf, sizeof buf, "%.10f", ps.statistic);
      out << r.outcome << ',' << to_string(r.kind) << ',' << ps.position << ',' << buf << ','
          << (ps.position == r.best_position ? 1 : 0) << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Prefix patterns

std::vector<ClassPatterns> mine_prefixes(const std::vector<std::vector<int>>& sentences,
                                         const std::vector<std::string>& labels, std::size_t max_k,
                                         double min_coverage) {
  if (sentences.size() != labels.size()) throw std::invalid_argument("mine_prefixes: labels do not match records");
  std::map<std::string, std::size_t> class_size;
  for (const auto& l : labels) ++class_size[l];

  // prefix -> (count per class, total)
  std::map<std::vector<int>, std::map<std::string, std::size_t>> per_class;
  std::map<std::vector<int>, std::size_t> total;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const std::size_t upto = std::min(max_k, sentences[i].size());
    for (std::size_t k = 1; k <= upto; ++k) {
      std::vector<int> prefix(sentences[i].begin(), sentences[i].begin() + long(k));
      ++per_class[prefix][labels[i]];
      ++total[prefix];
    }
  }

  std::vector<ClassPatterns> out;
  for (const auto& [label, size] : class_size) {
    ClassPatterns cp;
    cp.label = label;
    cp.class_size = size;
    std::set<std::vector<int>> qualifying;
    for (const auto& [prefix, counts] : per_class) {
      const auto it = counts.find(label);
      if (it == counts.end()) continue;
      const double coverage = double(it->second) / double(size);
      const double purity = double(it->second) / double(total[prefix]);
      if (coverage >= min_coverage && purity > 0.9) qualifying.insert(prefix);
    }
    for (const auto& prefix : qualifying) {
      bool maximal = true;
      for (const auto& other : qualifying) {
        if (other.size() > prefix.size() && std::equal(prefix.begin(), prefix.end(), other.begin())) {
          maximal = false;
          break;
        }
      }
      if (!maximal) continue;
      const std::size_t support = per_class[prefix][label];
      cp.patterns.push_back(
          {prefix, support, double(support) / double(size), double(support) / double(total[prefix])});
    }
    std::sort(cp.patterns.begin(), cp.patterns.end(), [](const Pattern& a, const Pattern& b) {
      if (a.coverage != b.coverage) return a.coverage > b.coverage;
      return a.prefix < b.prefix;
    });
    out.push_back(std::move(cp));
  }
  return out;
}

std::string format_prefix(const std::vector<int>& prefix) {
  std::string s;
  for (int id : prefix) s += std::to_string(id) + ", ";
  return s + "*";
}

void write_patterns(const std::filesystem::path& path, const std::vector<ClassPatterns>& patterns) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  char buf[64];
  for (const auto& cp : patterns) {
    for (const auto& p : cp.patterns) {
      std::snprintf(buf, sizeof buf, "%.6f\t%.6f", p.coverage, p.purity);
      out << cp.label << '\t' << format_prefix(p.prefix) << '\t' << buf << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace sunet
